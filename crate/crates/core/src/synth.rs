//! Deterministic synthetic data: a small hand-built cascade that fires on a
//! cartoon face pattern, a renderer for such faces, single-face fixtures and
//! the 12-image corpus bundled under `fixtures/corpus`.
//!
//! Nothing here resembles real faces. The fixtures exist so detection,
//! selection, encoding and evaluation can be checked exactly.

use std::sync::Arc;

use crate::cascade::{CascadeModel, HaarFeature, Stage, WeakStump, WeightedRect};
use crate::encoding::{ReferenceEmbedder, XorShift64Star};
use crate::eval::PrecomputedRecord;
use crate::imageio::{encode_ppm, Rect, RgbImage};
use crate::pipeline::{FacePipeline, PipelineConfig};

const WINDOW: u32 = 24;

fn wr(x: u32, y: u32, w: u32, h: u32, weight: f64) -> WeightedRect {
    WeightedRect { rect: Rect::new(x, y, w, h), weight }
}

fn stump(feature: usize, threshold: f64) -> WeakStump {
    WeakStump { feature, threshold, left: -1.0, right: 1.0 }
}

/// Feature layout of [`fixture_cascade`], one stump per stage, in stage order.
pub fn fixture_features() -> Vec<HaarFeature> {
    let f = |rects: Vec<WeightedRect>| HaarFeature::new(rects).expect("2 or 3 rects");
    vec![
        // mean(center 16x16) - mean(window): 576 / 256 = 2.25
        f(vec![wr(0, 0, 24, 24, -1.0), wr(4, 4, 16, 16, 2.25)]),
        // The dark frame is darker than the plain margin just inside it, on all four sides.
        // Weights balance the 3-unit frame strip against the 2-unit margin strip.
        f(vec![wr(0, 5, 3, 14, -1.0), wr(3, 5, 2, 14, 1.5)]),
        f(vec![wr(21, 5, 3, 14, -1.0), wr(19, 5, 2, 14, 1.5)]),
        f(vec![wr(5, 0, 14, 3, -1.0), wr(5, 3, 14, 2, 1.5)]),
        f(vec![wr(5, 21, 14, 3, -1.0), wr(5, 19, 14, 2, 1.5)]),
        // Forehead band brighter than the eye band, cheek band brighter than the mouth.
        f(vec![wr(5, 5, 14, 3, 1.0), wr(5, 8, 14, 3, -1.0)]),
        f(vec![wr(6, 13, 12, 2, 1.0), wr(6, 16, 12, 2, -1.0)]),
    ]
}

/// Stump thresholds of [`fixture_cascade`], in units of the window standard deviation.
pub const FIXTURE_THRESHOLDS: [f64; 7] = [0.25, 0.015, 0.015, 0.015, 0.015, 0.05, 0.01];

/// 24x24 cascade that fires on the pattern drawn by [`render_scene`].
///
/// Every stage holds one stump voting -1 below `threshold * std` and +1
/// otherwise, with a stage threshold of 0. A flat window has feature value 0
/// and is rejected by the first stage.
pub fn fixture_cascade() -> CascadeModel {
    fixture_cascade_with(&FIXTURE_THRESHOLDS)
}

/// [`fixture_cascade`] with other stump thresholds.
pub fn fixture_cascade_with(thresholds: &[f64; 7]) -> CascadeModel {
    let stages =
        thresholds.iter().enumerate().map(|(i, &t)| Stage { threshold: 0.0, stumps: vec![stump(i, t)] }).collect();
    CascadeModel::new(WINDOW, WINDOW, fixture_features(), stages).expect("valid fixture cascade")
}

/// One rendered face. `rect` is the square the face pattern occupies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceSpec {
    pub rect: Rect,
    /// Seeds the identity texture; same seed, same face.
    pub identity: u64,
    /// Multiplies face intensities (lighting change).
    pub gain: f64,
    /// Amplitude of per-pixel noise added inside the face.
    pub noise: u8,
    /// Relative contrast of the identity texture, in `[0, 1]`. Strong
    /// texture separates identities better but weakens detection.
    pub texture: f64,
}

impl FaceSpec {
    pub fn new(x: u32, y: u32, size: u32, identity: u64) -> Self {
        FaceSpec { rect: Rect::new(x, y, size, size), identity, gain: 1.0, noise: 0, texture: 0.3 }
    }
}

/// Background styles for synthetic frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    Flat(u8),
    /// Smooth horizontal ramp between two levels plus light noise.
    Gradient {
        from: u8,
        to: u8,
        seed: u64,
    },
    /// Uniform noise around a mean.
    Noise {
        mean: u8,
        amplitude: u8,
        seed: u64,
    },
}

/// Per-cell texture codes for an identity: bit 0 picks a horizontal or
/// vertical split, bit 1 which half is bright.
fn identity_cells(identity: u64) -> [u8; 16] {
    let mut rng = XorShift64Star::new(identity.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03);
    let mut cells = [0u8; 16];
    for c in cells.iter_mut() {
        *c = (rng.next_u64() >> 62) as u8;
    }
    cells
}

/// Face intensity at normalized position `(u, v)` in `[0, 24)`, before gain.
///
/// A dark frame surrounds a plain margin. Inside it, an identity texture
/// covers a 4x4 grid of square cells; each cell is split into a bright and a
/// dark half, so its mean does not depend on the identity. The forehead and
/// cheek bands stay plain, and the eyes and mouth are drawn on top.
fn face_level(u: f64, v: f64, cells: &[u8; 16], texture: f64) -> f64 {
    let skin = 145.0;
    let frame = 45.0;
    let feature = 25.0;
    if !(3.0..21.0).contains(&u) || !(3.0..21.0).contains(&v) {
        return frame;
    }
    let eye = (8.0..11.0).contains(&v) && ((5.0..10.0).contains(&u) || (14.0..19.0).contains(&u));
    let mouth = (16.0..18.0).contains(&v) && (8.0..16.0).contains(&u);
    if eye || mouth {
        return feature;
    }
    let margin = !(5.0..19.0).contains(&u) || !(5.0..19.0).contains(&v);
    if margin || (5.0..8.0).contains(&v) || (12.0..15.0).contains(&v) {
        return skin;
    }
    let (fu, fv) = ((u - 5.0) / 3.5, (v - 5.0) / 3.5);
    let (cx, cy) = ((fu as usize).min(3), (fv as usize).min(3));
    let code = cells[cy * 4 + cx];
    let along = if code & 1 == 0 { fu.fract() } else { fv.fract() };
    let bright = (along < 0.5) == (code & 2 == 0);
    if bright {
        skin * (1.0 + texture)
    } else {
        skin * (1.0 - texture)
    }
}

/// Renders a frame with the given background and faces. Face pixels are
/// drawn as neutral gray-ish skin tones so color and gray crops differ.
pub fn render_scene(width: u32, height: u32, background: Background, faces: &[FaceSpec]) -> RgbImage {
    let mut bg_rng = match background {
        Background::Flat(_) => XorShift64Star::new(1),
        Background::Gradient { seed, .. } | Background::Noise { seed, .. } => XorShift64Star::new(seed),
    };
    let mut pixels: Vec<[u8; 3]> = Vec::with_capacity(width as usize * height as usize);
    for _ in 0..height {
        for x in 0..width {
            let v = match background {
                Background::Flat(v) => v as f64,
                Background::Gradient { from, to, .. } => {
                    let t = x as f64 / (width.max(2) - 1) as f64;
                    from as f64 + (to as f64 - from as f64) * t + 6.0 * bg_rng.next_signed()
                }
                Background::Noise { mean, amplitude, .. } => mean as f64 + amplitude as f64 * bg_rng.next_signed(),
            };
            let g = v.round().clamp(0.0, 255.0) as u8;
            pixels.push([g, g, g]);
        }
    }
    for face in faces {
        let cells = identity_cells(face.identity);
        let mut noise = XorShift64Star::new(face.identity ^ 0x5EED ^ ((face.rect.x as u64) << 32 | face.rect.y as u64));
        let size = face.rect.w as f64;
        for dy in 0..face.rect.h {
            for dx in 0..face.rect.w {
                let (x, y) = (face.rect.x + dx, face.rect.y + dy);
                if x >= width || y >= height {
                    continue;
                }
                let u = (dx as f64 + 0.5) * WINDOW as f64 / size;
                let v = (dy as f64 + 0.5) * WINDOW as f64 / face.rect.h as f64;
                let mut level = face_level(u, v, &cells, face.texture) * face.gain;
                if face.noise > 0 {
                    level += face.noise as f64 * noise.next_signed();
                }
                let l = level.clamp(0.0, 255.0);
                pixels[(y * width + x) as usize] =
                    [(l * 1.08).round().clamp(0.0, 255.0) as u8, l.round() as u8, (l * 0.86).round() as u8];
            }
        }
    }
    RgbImage::new(width, height, pixels.into_iter().flatten().collect()).expect("dimensions match")
}

/// An image of the bundled synthetic corpus.
#[derive(Debug, Clone)]
pub struct CorpusImage {
    /// File name, e.g. `alice1.ppm`.
    pub name: String,
    /// Identity label; empty for non-face images.
    pub label: String,
    pub has_face: bool,
    /// Where the face was planted, if any.
    pub planted: Option<Rect>,
    pub image: RgbImage,
}

/// Names and identity seeds of the corpus. The seeds were picked so that
/// every face is found at its planted position and different people
/// encode more than 0.5 apart.
pub const CORPUS_PEOPLE: [(&str, u64); 5] = [("alice", 92), ("bob", 203), ("carol", 287), ("dave", 331), ("erin", 42)];

/// An identity outside the corpus, for "unknown person" scenarios.
pub const STRANGER: u64 = 137;

pub const CORPUS_TEXTURE: f64 = 0.7;

pub const CORPUS_WIDTH: u32 = 128;
pub const CORPUS_HEIGHT: u32 = 96;

/// Five identities with two images each, plus two images without faces.
///
/// The second image of each identity moves the face, dims it and changes the
/// background, so the pair is similar but not identical.
pub fn corpus() -> Vec<CorpusImage> {
    let mut out = Vec::new();
    for (i, &(name, identity)) in CORPUS_PEOPLE.iter().enumerate() {
        let seed = 77 + i as u64;
        let first = FaceSpec { texture: CORPUS_TEXTURE, ..FaceSpec::new(40, 24, 48, identity) };
        let second = FaceSpec { gain: 0.92, texture: CORPUS_TEXTURE, ..FaceSpec::new(46, 22, 48, identity) };
        for (k, face) in [first, second].into_iter().enumerate() {
            let bg = Background::Gradient { from: 80 + 10 * i as u8, to: 120, seed: seed * 10 + k as u64 };
            out.push(CorpusImage {
                name: format!("{name}{}.ppm", k + 1),
                label: name.to_string(),
                has_face: true,
                planted: Some(face.rect),
                image: render_scene(CORPUS_WIDTH, CORPUS_HEIGHT, bg, &[face]),
            });
        }
    }
    out.push(CorpusImage {
        name: "scenery1.ppm".into(),
        label: String::new(),
        has_face: false,
        planted: None,
        image: render_scene(CORPUS_WIDTH, CORPUS_HEIGHT, Background::Gradient { from: 40, to: 200, seed: 5 }, &[]),
    });
    out.push(CorpusImage {
        name: "scenery2.ppm".into(),
        label: String::new(),
        has_face: false,
        planted: None,
        image: render_scene(CORPUS_WIDTH, CORPUS_HEIGHT, Background::Noise { mean: 120, amplitude: 30, seed: 9 }, &[]),
    });
    out
}

/// `path,label,has_face` manifest text for [`corpus`].
pub fn corpus_manifest() -> String {
    let mut s = String::from("path,label,has_face\n");
    for img in corpus() {
        s.push_str(&format!("{},{},{}\n", img.name, img.label, img.has_face));
    }
    s
}

/// Identity of the single-face fixtures below.
pub const FIXTURE_IDENTITY: u64 = 92;

/// A 128x96 frame with one lightly textured face of side 48 at its center,
/// on a flat background. Returns the frame and the planted rectangle.
pub fn planted_face() -> (RgbImage, Rect) {
    let face = FaceSpec::new(40, 24, 48, FIXTURE_IDENTITY);
    (render_scene(CORPUS_WIDTH, CORPUS_HEIGHT, Background::Flat(100), &[face]), face.rect)
}

/// Like [`planted_face`], but with per-pixel noise over the face so that
/// too few windows are accepted for the strictest sweep step.
pub fn relaxed_face() -> (RgbImage, Rect) {
    let face = FaceSpec { noise: RELAXED_NOISE, ..FaceSpec::new(40, 24, 48, FIXTURE_IDENTITY) };
    (render_scene(CORPUS_WIDTH, CORPUS_HEIGHT, Background::Flat(100), &[face]), face.rect)
}

const RELAXED_NOISE: u8 = 60;

/// A 128x96 frame with one strongly textured face of the [`STRANGER`]
/// identity, who is not part of the corpus.
pub fn stranger_face() -> (RgbImage, Rect) {
    let face = FaceSpec { texture: CORPUS_TEXTURE, ..FaceSpec::new(40, 24, 48, STRANGER) };
    let bg = Background::Gradient { from: 90, to: 120, seed: 31 };
    (render_scene(CORPUS_WIDTH, CORPUS_HEIGHT, bg, &[face]), face.rect)
}

/// A flat gray 128x96 frame.
pub fn blank_frame() -> RgbImage {
    render_scene(CORPUS_WIDTH, CORPUS_HEIGHT, Background::Flat(128), &[])
}

/// Precomputed-encodings lines for [`corpus`], produced by the default
/// pipeline with [`fixture_cascade`] and the reference embedder.
pub fn corpus_encodings() -> String {
    let pipeline =
        FacePipeline::new(Arc::new(fixture_cascade()), Arc::new(ReferenceEmbedder), PipelineConfig::default());
    let mut out = String::new();
    for img in corpus() {
        let run = pipeline.run(&img.image).expect("default parameters are valid");
        let rec = PrecomputedRecord {
            id: img.name,
            provider: ReferenceEmbedder::ID.to_string(),
            vector: run.encoding,
            faces: Some(run.detections.len()),
        };
        out.push_str(&serde_json::to_string(&rec).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Every generated file under the repository's `fixtures/` directory, as
/// `(relative path, contents)`. `cascades/tiny.xml` is hand-written and not
/// included.
pub fn fixture_files() -> Vec<(String, Vec<u8>)> {
    let mut files = vec![("cascades/fixture.xml".to_string(), fixture_cascade().to_xml().into_bytes())];
    for img in corpus() {
        files.push((format!("corpus/{}", img.name), encode_ppm(&img.image)));
    }
    files.push(("corpus/manifest.csv".into(), corpus_manifest().into_bytes()));
    files.push(("corpus/encodings.jsonl".into(), corpus_encodings().into_bytes()));
    files.push(("images/planted.ppm".into(), encode_ppm(&planted_face().0)));
    files.push(("images/relaxed.ppm".into(), encode_ppm(&relaxed_face().0)));
    files.push(("images/stranger.ppm".into(), encode_ppm(&stranger_face().0)));
    files.push(("images/blank.ppm".into(), encode_ppm(&blank_frame())));
    files
}
