//! Test-side oracles. Everything here is written from the contracts alone and
//! shares no code with the library beyond its data types.
#![allow(dead_code, clippy::needless_range_loop)]

use facegate::cascade::CascadeModel;
use facegate::detector::{DetectParams, Detection};
use facegate::encoding::{FaceEncoding, ENCODING_DIM};
use facegate::imageio::{GrayImage, Rect, RgbImage};
use facegate::integral::integral;
use facegate::synth::{render_scene, Background, FaceSpec};
use rand::Rng;

pub fn naive_rect_sum(img: &GrayImage, r: Rect) -> u64 {
    let mut s = 0u64;
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            s += img.get(x, y) as u64;
        }
    }
    s
}

pub fn naive_rect_sqsum(img: &GrayImage, r: Rect) -> u64 {
    let mut s = 0u64;
    for y in r.y..r.y + r.h {
        for x in r.x..r.x + r.w {
            let v = img.get(x, y) as u64;
            s += v * v;
        }
    }
    s
}

fn half_up(v: f64) -> u32 {
    (v + 0.5).floor() as u32
}

pub fn oracle_window_size(model: &CascadeModel, scale: f64) -> (u32, u32) {
    (half_up(model.window_w() as f64 * scale), half_up(model.window_h() as f64 * scale))
}

/// Scaled feature rectangle: every coordinate rounded half-up, then clamped
/// so the rectangle stays inside the scaled window.
pub fn oracle_scaled_rect(r: Rect, scale: f64, win_w: u32, win_h: u32) -> Rect {
    let x = half_up(r.x as f64 * scale).min(win_w);
    let y = half_up(r.y as f64 * scale).min(win_h);
    let w = half_up(r.w as f64 * scale);
    let h = half_up(r.h as f64 * scale);
    Rect::new(x, y, w.min(win_w - x), h.min(win_h - y))
}

/// Pass/fail of every stage at one window, evaluating all stages.
pub fn full_stage_eval(model: &CascadeModel, img: &GrayImage, x: u32, y: u32, scale: f64) -> Vec<bool> {
    let (ww, wh) = oracle_window_size(model, scale);
    let window = Rect::new(x, y, ww, wh);
    let area = ww as f64 * wh as f64;
    let mean = naive_rect_sum(img, window) as f64 / area;
    let var = naive_rect_sqsum(img, window) as f64 / area - mean * mean;
    let std = if var > 1.0 { var.sqrt() } else { 1.0 };
    model
        .stages()
        .iter()
        .map(|stage| {
            let mut total = 0.0;
            for stump in &stage.stumps {
                let mut acc = 0.0;
                for wr in model.features()[stump.feature].rects() {
                    let r = oracle_scaled_rect(wr.rect, scale, ww, wh);
                    let shifted = Rect::new(x + r.x, y + r.y, r.w, r.h);
                    acc += wr.weight * naive_rect_sum(img, shifted) as f64;
                }
                let f = acc / area;
                total += if f < stump.threshold * std { stump.left } else { stump.right };
            }
            total >= stage.threshold
        })
        .collect()
}

pub fn full_accept(model: &CascadeModel, img: &GrayImage, x: u32, y: u32, scale: f64) -> bool {
    full_stage_eval(model, img, x, y, scale).iter().all(|&p| p)
}

pub fn oracle_ladder(model: &CascadeModel, width: u32, height: u32, params: &DetectParams) -> Vec<f64> {
    let first =
        [1.0, params.min_size.0 as f64 / model.window_w() as f64, params.min_size.1 as f64 / model.window_h() as f64]
            .into_iter()
            .fold(f64::MIN, f64::max);
    let mut out = vec![];
    let mut s = first;
    while {
        let (w, h) = oracle_window_size(model, s);
        w <= width && h <= height
    } {
        out.push(s);
        s *= params.scale_factor;
    }
    out
}

/// Evaluates the cascade at every placement of every scale, then keeps the
/// placements on the slide grid of that scale.
pub fn oracle_scan(model: &CascadeModel, img: &GrayImage, params: &DetectParams) -> Vec<Rect> {
    let mut out = vec![];
    for scale in oracle_ladder(model, img.width(), img.height(), params) {
        let (ww, wh) = oracle_window_size(model, scale);
        let step = half_up(scale).max(1);
        for y in 0..=img.height() - wh {
            for x in 0..=img.width() - ww {
                if full_accept(model, img, x, y, scale) && x % step == 0 && y % step == 0 {
                    out.push(Rect::new(x, y, ww, wh));
                }
            }
        }
    }
    out
}

pub fn oracle_similar(a: &Rect, b: &Rect, eps: f64) -> bool {
    let delta = eps * (a.w.min(b.w) + a.h.min(b.h)) as f64 / 2.0;
    let edges_a = [a.x as f64, a.y as f64, (a.x + a.w) as f64, (a.y + a.h) as f64];
    let edges_b = [b.x as f64, b.y as f64, (b.x + b.w) as f64, (b.y + b.h) as f64];
    edges_a.iter().zip(edges_b).all(|(p, q)| (p - q).abs() <= delta)
}

fn rounded_mean(sum: u64, n: u64) -> u32 {
    let (q, r) = (sum / n, sum % n);
    (if 2 * r >= n { q + 1 } else { q }) as u32
}

/// Grouping through the Warshall transitive closure of the similarity relation.
pub fn oracle_group(cands: &[Rect], min_neighbors: u32, eps: f64) -> Vec<Detection> {
    if min_neighbors == 0 {
        return cands.iter().map(|&rect| Detection { rect, neighbors: 1 }).collect();
    }
    let n = cands.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = i == j || oracle_similar(&cands[i], &cands[j], eps);
        }
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let mut out = vec![];
    for i in 0..n {
        // A class is reported at its first member.
        if (0..i).any(|j| reach[i][j]) {
            continue;
        }
        let members: Vec<&Rect> = (0..n).filter(|&j| reach[i][j]).map(|j| &cands[j]).collect();
        let k = members.len() as u64;
        if k < min_neighbors.max(1) as u64 {
            continue;
        }
        let sum = |f: fn(&Rect) -> u32| members.iter().map(|r| f(r) as u64).sum::<u64>();
        out.push(Detection {
            rect: Rect::new(
                rounded_mean(sum(|r| r.x), k),
                rounded_mean(sum(|r| r.y), k),
                rounded_mean(sum(|r| r.w), k),
                rounded_mean(sum(|r| r.h), k),
            ),
            neighbors: k as u32,
        });
    }
    out
}

/// Candidates jittered around a few cluster centers, plus strays.
pub fn random_candidates(rng: &mut impl Rng) -> Vec<Rect> {
    let clusters = rng.gen_range(1..=5);
    let mut out = vec![];
    for _ in 0..clusters {
        let size: u32 = rng.gen_range(20..80);
        let (cx, cy): (u32, u32) = (rng.gen_range(0..300), rng.gen_range(0..300));
        for _ in 0..rng.gen_range(1..12) {
            let s = (size as i32 + rng.gen_range(-4..=4)) as u32;
            let x = (cx as i32 + rng.gen_range(-6..=6)).max(0) as u32;
            let y = (cy as i32 + rng.gen_range(-6..=6)).max(0) as u32;
            out.push(Rect::new(x, y, s, s));
        }
    }
    for _ in 0..rng.gen_range(0..4) {
        out.push(Rect::new(rng.gen_range(0..400), rng.gen_range(0..400), rng.gen_range(10..90), rng.gen_range(10..90)));
    }
    // Interleave so classes do not arrive contiguously.
    let n = out.len();
    for i in (1..n).rev() {
        out.swap(i, rng.gen_range(0..=i));
    }
    out
}

pub fn random_gray(rng: &mut impl Rng, w: u32, h: u32) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen()).unwrap()
}

pub const VGA_BACKGROUND: Background = Background::Noise { mean: 110, amplitude: 40, seed: 7 };

/// A 640x480 frame with a few synthetic faces on a noisy background.
pub fn vga_frame() -> RgbImage {
    let faces = [FaceSpec::new(260, 180, 120, 92), FaceSpec::new(60, 60, 64, 203), FaceSpec::new(480, 300, 96, 287)];
    render_scene(640, 480, VGA_BACKGROUND, &faces)
}

/// Windows of assorted texture for cascade checks: noise, smooth ramps,
/// flat patches and synthetic faces, at random scales.
pub fn random_windows(model: &CascadeModel, rng: &mut impl Rng, count: usize) -> Vec<(GrayImage, u32, u32, f64)> {
    (0..count)
        .map(|i| {
            let scale = rng.gen_range(1.0..2.5);
            let (ww, wh) = oracle_window_size(model, scale);
            let (w, h) = (ww + rng.gen_range(0..8), wh + rng.gen_range(0..8));
            let img = match i % 4 {
                0 => random_gray(rng, w, h),
                1 => {
                    let (a, b) = (rng.gen_range(0..256) as f64, rng.gen_range(0..256) as f64);
                    GrayImage::from_fn(w, h, |x, y| (a + (b - a) * (x + y) as f64 / (w + h) as f64) as u8).unwrap()
                }
                2 => GrayImage::filled(w, h, rng.gen()).unwrap(),
                _ => {
                    let face =
                        FaceSpec { texture: rng.gen_range(0.0..0.8), ..FaceSpec::new(0, 0, ww.min(wh), rng.gen()) };
                    let rgb = render_scene(w, h, Background::Flat(rng.gen()), &[face]);
                    facegate::imageio::to_grayscale(&rgb)
                }
            };
            let x = rng.gen_range(0..=w - ww);
            let y = rng.gen_range(0..=h - wh);
            (img, x, y, scale)
        })
        .collect()
}

/// Checks every in-bounds rectangle. For each top-left corner the naive sums
/// are grown one row and one column at a time.
pub fn check_all_rects(img: &GrayImage) -> usize {
    let ii = integral(img);
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut checked = 0;
    for y0 in 0..h {
        for x0 in 0..w {
            let mut col = vec![0u64; w];
            let mut col_sq = vec![0u64; w];
            for y1 in y0..h {
                let (mut s, mut q) = (0u64, 0u64);
                for x1 in x0..w {
                    let v = img.get(x1 as u32, y1 as u32) as u64;
                    col[x1] += v;
                    col_sq[x1] += v * v;
                    s += col[x1];
                    q += col_sq[x1];
                    let r = Rect::new(x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
                    assert_eq!(ii.rect_sum(r), s, "{r:?}");
                    assert_eq!(ii.rect_sqsum(r), q, "{r:?}");
                    checked += 1;
                }
            }
        }
    }
    checked
}

pub fn random_unit(rng: &mut impl Rng) -> FaceEncoding {
    let v: Vec<f64> = (0..ENCODING_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    FaceEncoding::from_slice(&v.iter().map(|x| x / n).collect::<Vec<_>>()).unwrap()
}

/// Pairs spread over the whole distance range, with a share of near-duplicates
/// around the decision boundary.
pub fn random_pair(rng: &mut impl Rng) -> (FaceEncoding, FaceEncoding) {
    let a = random_unit(rng);
    let b = if rng.gen_bool(0.5) {
        random_unit(rng)
    } else {
        let scale = rng.gen_range(0.0..0.1);
        let v: Vec<f64> = a.values().iter().map(|x| x + scale * rng.gen_range(-1.0..1.0)).collect();
        FaceEncoding::from_slice(&v).unwrap()
    };
    (a, b)
}
