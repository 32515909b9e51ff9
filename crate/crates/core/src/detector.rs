//! Multi-scale sliding-window cascade detection.
//!
//! Features are scaled rather than the image: at scale `s` every feature
//! rectangle coordinate is multiplied by `s` and rounded half-up, and the
//! window becomes `round(W s) x round(H s)`. Windows slide by
//! `max(1, round(s))` pixels. Raw hits are clustered by [`group_rects`].

use std::borrow::Cow;
use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::CascadeModel;
use crate::imageio::{GrayImage, Rect};
use crate::integral::{integral, IntegralImage};

/// Relative tolerance used when clustering raw candidates.
pub const DEFAULT_GROUP_EPS: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("scale factor must be finite and greater than 1, got {0}")]
    ScaleFactor(f64),
    #[error("grouping eps must be finite and non-negative, got {0}")]
    GroupEps(f64),
    #[error("scale must be finite and positive, got {0}")]
    Scale(f64),
    #[error("window {window} does not fit in a {width}x{height} image")]
    WindowOutOfBounds { window: Rect, width: u32, height: u32 },
}

/// Parameters of one detection pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub scale_factor: f64,
    pub min_neighbors: u32,
    /// Smallest window considered, `(w, h)`. Values below the model window are clamped up.
    pub min_size: (u32, u32),
    pub group_eps: f64,
}

impl DetectParams {
    pub fn new(scale_factor: f64, min_neighbors: u32, min_size: (u32, u32)) -> Result<Self, DetectError> {
        let p = DetectParams { scale_factor, min_neighbors, min_size, group_eps: DEFAULT_GROUP_EPS };
        p.validate()?;
        Ok(p)
    }

    pub fn with_group_eps(mut self, eps: f64) -> Result<Self, DetectError> {
        self.group_eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.scale_factor.is_finite() && self.scale_factor > 1.0) {
            return Err(DetectError::ScaleFactor(self.scale_factor));
        }
        if !(self.group_eps.is_finite() && self.group_eps >= 0.0) {
            return Err(DetectError::GroupEps(self.group_eps));
        }
        Ok(())
    }
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams { scale_factor: 1.1, min_neighbors: 3, min_size: (30, 30), group_eps: DEFAULT_GROUP_EPS }
    }
}

/// A grouped detection: the averaged rectangle and how many raw hits formed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Detection {
    pub rect: Rect,
    pub neighbors: u32,
}

pub(crate) fn round_half_up(v: f64) -> u32 {
    (v + 0.5).floor() as u32
}

/// Window extent at `scale`.
pub fn scaled_window(model: &CascadeModel, scale: f64) -> (u32, u32) {
    (round_half_up(model.window_w() as f64 * scale), round_half_up(model.window_h() as f64 * scale))
}

/// Feature rectangle scaled into a `win_w x win_h` window. The extent is
/// trimmed when independent rounding of origin and size would overshoot.
pub fn scale_rect(r: Rect, scale: f64, win_w: u32, win_h: u32) -> Rect {
    let x = round_half_up(r.x as f64 * scale).min(win_w);
    let y = round_half_up(r.y as f64 * scale).min(win_h);
    let w = round_half_up(r.w as f64 * scale).min(win_w - x);
    let h = round_half_up(r.h as f64 * scale).min(win_h - y);
    Rect::new(x, y, w, h)
}

#[derive(Clone, Copy, Default)]
struct ScaledRect {
    // Offsets of the four corners relative to the window origin in the table.
    a: usize,
    b: usize,
    c: usize,
    d: usize,
    weight: f64,
}

/// One table corner of a feature with the combined coefficient of every
/// rect touching it.
#[derive(Clone, Copy)]
struct Tap {
    offset: usize,
    coef: i32,
}

struct ScaledStump {
    rects: Range<usize>,
    taps: Range<usize>,
    threshold: f64,
    left: f64,
    right: f64,
}

/// Largest feature weight magnitude taken by the integer path.
const MAX_INTEGER_WEIGHT: f64 = 1024.0;

/// A cascade with all feature geometry resolved for one scale and one table
/// stride. Rects, stumps and stages live in flat arrays for locality.
struct ScaledCascade {
    win_w: u32,
    win_h: u32,
    area: f64,
    window: ScaledRect,
    rects: Vec<ScaledRect>,
    taps: Vec<Tap>,
    /// Every weight is a small integer and every feature value fits in
    /// `i32`, so features can be summed exactly over `taps`.
    integer_weights: bool,
    stumps: Vec<ScaledStump>,
    // (end of the stage's stump range, stage threshold)
    stages: Vec<(usize, f64)>,
}

/// Rectangle sums from a summed-area table.
trait SumTable {
    fn rect_sum(&self, base: usize, r: &ScaledRect) -> u64;
}

impl SumTable for [u64] {
    #[inline]
    fn rect_sum(&self, base: usize, r: &ScaledRect) -> u64 {
        (self[base + r.d] + self[base + r.a]) - (self[base + r.b] + self[base + r.c])
    }
}

/// Narrow table, used only when the image total fits in 32 bits so every
/// entry is exact.
impl SumTable for [u32] {
    #[inline]
    fn rect_sum(&self, base: usize, r: &ScaledRect) -> u64 {
        ((self[base + r.d] + self[base + r.a]) - (self[base + r.b] + self[base + r.c])) as u64
    }
}

impl ScaledCascade {
    fn new(model: &CascadeModel, scale: f64, stride: usize) -> Self {
        let (win_w, win_h) = scaled_window(model, scale);
        let offsets = |r: Rect, weight: f64| {
            let a = r.y as usize * stride + r.x as usize;
            let c = a + r.h as usize * stride;
            ScaledRect { a, b: a + r.w as usize, c, d: c + r.w as usize, weight }
        };
        let mut rects = Vec::new();
        let mut taps: Vec<Tap> = Vec::new();
        let mut stumps = Vec::new();
        let mut stages = Vec::new();
        let mut integer_weights = true;
        for stage in model.stages() {
            for s in &stage.stumps {
                let (first_rect, first_tap) = (rects.len(), taps.len());
                let mut bound = 0.0;
                for wr in model.features()[s.feature].rects() {
                    let r = offsets(scale_rect(wr.rect, scale, win_w, win_h), wr.weight);
                    rects.push(r);
                    integer_weights &= wr.weight.fract() == 0.0 && wr.weight.abs() <= MAX_INTEGER_WEIGHT;
                    bound += wr.weight.abs() * 255.0 * (r.d - r.c) as f64 * ((r.c - r.a) / stride) as f64;
                    let w = wr.weight as i32;
                    for (offset, sign) in [(r.a, 1), (r.b, -1), (r.c, -1), (r.d, 1)] {
                        taps.push(Tap { offset, coef: sign * w });
                    }
                }
                let mine = &mut taps[first_tap..];
                mine.sort_by_key(|t| t.offset);
                let mut merged: Vec<Tap> = Vec::with_capacity(mine.len());
                for &t in mine.iter() {
                    match merged.last_mut() {
                        Some(last) if last.offset == t.offset => last.coef += t.coef,
                        _ => merged.push(t),
                    }
                }
                merged.retain(|t| t.coef != 0);
                integer_weights &= bound < i32::MAX as f64;
                taps.truncate(first_tap);
                taps.extend(merged);
                stumps.push(ScaledStump {
                    rects: first_rect..rects.len(),
                    taps: first_tap..taps.len(),
                    threshold: s.threshold,
                    left: s.left,
                    right: s.right,
                });
            }
            stages.push((stumps.len(), stage.threshold));
        }
        ScaledCascade {
            win_w,
            win_h,
            area: win_w as f64 * win_h as f64,
            window: offsets(Rect::new(0, 0, win_w, win_h), 1.0),
            rects,
            taps,
            integer_weights,
            stumps,
            stages,
        }
    }

    /// Runs the cascade on one window with early exit; the window must fit.
    fn accepts(&self, ii: &IntegralImage, x: u32, y: u32) -> bool {
        let base = y as usize * ii.stride() + x as usize;
        let (sums, std) = (ii.sums(), self.window_std(ii.sums(), ii.sq_sums(), base));
        let mut first = 0;
        for &(end, threshold) in &self.stages {
            let mut stage_sum = 0.0;
            for stump in &self.stumps[first..end] {
                stage_sum += self.stump_vote(stump, self.float_feature(sums, stump, base), std);
            }
            if stage_sum < threshold {
                return false;
            }
            first = end;
        }
        true
    }

    #[inline]
    fn window_std<T: SumTable + ?Sized>(&self, sums: &T, sq_sums: &[u64], base: usize) -> f64 {
        let mean = sums.rect_sum(base, &self.window) as f64 / self.area;
        let var = sq_sums.rect_sum(base, &self.window) as f64 / self.area - mean * mean;
        if var > 1.0 {
            var.sqrt()
        } else {
            1.0
        }
    }

    #[inline]
    fn float_feature<T: SumTable + ?Sized>(&self, sums: &T, stump: &ScaledStump, base: usize) -> f64 {
        let mut acc = 0.0;
        for r in &self.rects[stump.rects.clone()] {
            acc += r.weight * sums.rect_sum(base, r) as f64;
        }
        acc
    }

    /// All raw hits at this scale. With integer weights and a narrow table,
    /// every product and partial sum of the float accumulation is an integer
    /// below 2^53, so summing the merged taps in integers gives the same
    /// value. The `i32` sum wraps but lands on the true value, which the
    /// constructor bounded below 2^31.
    fn scan(&self, ii: &IntegralImage, narrow: Option<&[u32]>, step: usize) -> Vec<Rect> {
        let mut out = Vec::new();
        match narrow {
            Some(t) if self.integer_weights => self.scan_dense_dispatch(t, ii, step, &mut out),
            Some(t) => self.scan_rows(t, ii, step, &mut out, |stump, row| self.float_votes(t, stump, row)),
            None => self.scan_rows(ii.sums(), ii, step, &mut out, |stump, row| self.float_votes(ii.sums(), stump, row)),
        }
        out
    }

    /// Rows on the integer path. Neighbouring windows read table entries
    /// `step` apart, so early stages run over the whole row with strided
    /// slices, ignoring windows already rejected. Once few windows survive,
    /// the row is compacted and finished like [`Self::scan_rows`].
    fn scan_dense_dispatch(&self, t: &[u32], ii: &IntegralImage, step: usize, out: &mut Vec<Rect>) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked just above.
            return unsafe { self.scan_dense_rows_avx2(t, ii, step, out) };
        }
        self.scan_dense_rows(t, ii, step, out)
    }

    /// The same code compiled with wider vectors. Integer and IEEE float
    /// results do not depend on the instruction set, so hits are identical.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn scan_dense_rows_avx2(&self, t: &[u32], ii: &IntegralImage, step: usize, out: &mut Vec<Rect>) {
        self.scan_dense_rows(t, ii, step, out)
    }

    #[inline(always)]
    fn scan_dense_rows(&self, t: &[u32], ii: &IntegralImage, step: usize, out: &mut Vec<Rect>) {
        let stride = ii.stride();
        let n = (ii.width() - self.win_w) as usize / step + 1;
        let decimated = Decimated::new(t, stride, ii.height() as usize + 1, step);
        let mut alive = vec![true; n];
        let mut stds = vec![0.0; n];
        let mut votes = vec![0.0; n];
        let mut acc = vec![0i32; n];
        let mut row = Row::default();
        for y in (0..=ii.height() - self.win_h).step_by(step) {
            let row_base = y as usize * stride;
            for (i, std) in stds.iter_mut().enumerate() {
                *std = self.window_std(t, ii.sq_sums(), row_base + i * step);
            }
            alive.fill(true);
            let mut live = n;
            let mut first = 0;
            let mut stages = self.stages.iter();
            // Dense phase.
            for &(end, threshold) in stages.by_ref() {
                votes.fill(0.0);
                for stump in &self.stumps[first..end] {
                    let taps = &self.taps[stump.taps.clone()];
                    let column = |tap: &Tap| decimated.column(y as usize + tap.offset / stride, tap.offset % stride, n);
                    // The first tap assigns, later taps accumulate.
                    let coef = taps[0].coef;
                    acc.iter_mut().zip(column(&taps[0])).for_each(|(a, &v)| *a = coef.wrapping_mul(v as i32));
                    for tap in &taps[1..] {
                        let coef = tap.coef;
                        acc.iter_mut()
                            .zip(column(tap))
                            .for_each(|(a, &v)| *a = a.wrapping_add(coef.wrapping_mul(v as i32)));
                    }
                    let (lo, hi) = (stump.left, stump.right);
                    for ((vote, &a), &std) in votes.iter_mut().zip(&acc).zip(&stds) {
                        let f = a as f64 / self.area;
                        *vote += if f < stump.threshold * std { lo } else { hi };
                    }
                }
                first = end;
                live = 0;
                for (keep, &vote) in alive.iter_mut().zip(&votes) {
                    *keep &= vote >= threshold;
                    live += *keep as usize;
                }
                if live * DENSE_MIN_LIVE_FRACTION < n {
                    break;
                }
            }
            if live == 0 {
                continue;
            }
            // Sparse phase over the survivors.
            row.clear();
            for i in (0..n).filter(|&i| alive[i]) {
                row.xs.push((i * step) as u32);
                row.bases.push(row_base + i * step);
                row.stds.push(stds[i]);
            }
            for &(end, threshold) in stages {
                row.votes.clear();
                row.votes.resize(row.xs.len(), 0.0);
                for stump in &self.stumps[first..end] {
                    row.acc.clear();
                    row.acc.resize(row.bases.len(), 0);
                    for tap in &self.taps[stump.taps.clone()] {
                        let column = &t[tap.offset..];
                        for (acc, &base) in row.acc.iter_mut().zip(&row.bases) {
                            *acc = acc.wrapping_add(tap.coef.wrapping_mul(column[base] as i32));
                        }
                    }
                    for ((vote, &acc), &std) in row.votes.iter_mut().zip(&row.acc).zip(&row.stds) {
                        *vote += self.stump_vote(stump, acc as f64, std);
                    }
                }
                if row.retain_passing(threshold) == 0 {
                    break;
                }
                first = end;
            }
            out.extend(row.xs.iter().map(|&x| Rect::new(x, y, self.win_w, self.win_h)));
        }
    }

    #[inline(always)]
    fn stump_vote(&self, stump: &ScaledStump, feature: f64, std: f64) -> f64 {
        let f = feature / self.area;
        if f < stump.threshold * std {
            stump.left
        } else {
            stump.right
        }
    }

    fn float_votes<T: SumTable + ?Sized>(&self, sums: &T, stump: &ScaledStump, row: &mut Row) {
        for ((vote, &base), &std) in row.votes.iter_mut().zip(&row.bases).zip(&row.stds) {
            *vote += self.stump_vote(stump, self.float_feature(sums, stump, base), std);
        }
    }

    /// Scans each row of windows stage by stage: a stump runs over every
    /// window still alive before the next stump, then survivors are
    /// compacted. Per window the arithmetic matches [`Self::accepts`].
    fn scan_rows<T: SumTable + ?Sized>(
        &self,
        sums: &T,
        ii: &IntegralImage,
        step: usize,
        out: &mut Vec<Rect>,
        mut run_stump: impl FnMut(&ScaledStump, &mut Row),
    ) {
        let stride = ii.stride();
        let mut row = Row::default();
        for y in (0..=ii.height() - self.win_h).step_by(step) {
            row.clear();
            for x in (0..=ii.width() - self.win_w).step_by(step) {
                let base = y as usize * stride + x as usize;
                row.xs.push(x);
                row.bases.push(base);
                row.stds.push(self.window_std(sums, ii.sq_sums(), base));
            }
            let mut first = 0;
            for &(end, threshold) in &self.stages {
                row.votes.clear();
                row.votes.resize(row.xs.len(), 0.0);
                for stump in &self.stumps[first..end] {
                    run_stump(stump, &mut row);
                }
                if row.retain_passing(threshold) == 0 {
                    break;
                }
                first = end;
            }
            out.extend(row.xs.iter().map(|&x| Rect::new(x, y, self.win_w, self.win_h)));
        }
    }
}

/// The dense phase of [`ScaledCascade::scan_dense_rows`] continues while at
/// least one window in this many survives.
const DENSE_MIN_LIVE_FRACTION: usize = 8;

/// A summed-area table split by column residue modulo `step`, so the
/// entries read by windows `step` apart sit next to each other. Plane `r`
/// row `y` entry `j` holds table entry `(j * step + r, y)`.
struct Decimated<'t> {
    data: Cow<'t, [u32]>,
    plane_w: usize,
    rows: usize,
    step: usize,
}

impl<'t> Decimated<'t> {
    fn new(t: &'t [u32], stride: usize, rows: usize, step: usize) -> Self {
        if step == 1 {
            return Decimated { data: Cow::Borrowed(t), plane_w: stride, rows, step };
        }
        let plane_w = stride.div_ceil(step);
        let mut data = vec![0; step * rows * plane_w];
        for (r, plane) in data.chunks_exact_mut(rows * plane_w).enumerate() {
            for (y, out) in plane.chunks_exact_mut(plane_w).enumerate() {
                let src = &t[y * stride..(y + 1) * stride];
                for (o, &v) in out.iter_mut().zip(src.iter().skip(r).step_by(step)) {
                    *o = v;
                }
            }
        }
        Decimated { data: Cow::Owned(data), plane_w, rows, step }
    }

    /// Entries `(x + dx, y)` for `x = 0, step, ..., (n - 1) * step`.
    #[inline]
    fn column(&self, y: usize, dx: usize, n: usize) -> &[u32] {
        let start = ((dx % self.step) * self.rows + y) * self.plane_w + dx / self.step;
        &self.data[start..start + n]
    }
}

/// Windows of one row still in the running, as parallel arrays.
#[derive(Default)]
struct Row {
    xs: Vec<u32>,
    bases: Vec<usize>,
    stds: Vec<f64>,
    votes: Vec<f64>,
    acc: Vec<i32>,
}

impl Row {
    fn clear(&mut self) {
        self.xs.clear();
        self.bases.clear();
        self.stds.clear();
    }

    /// Keeps windows whose stage vote reached `threshold`, in order.
    fn retain_passing(&mut self, threshold: f64) -> usize {
        let mut kept = 0;
        for i in 0..self.xs.len() {
            if self.votes[i] >= threshold {
                self.xs[kept] = self.xs[i];
                self.bases[kept] = self.bases[i];
                self.stds[kept] = self.stds[i];
                kept += 1;
            }
        }
        self.xs.truncate(kept);
        self.bases.truncate(kept);
        self.stds.truncate(kept);
        kept
    }
}

/// Evaluates the cascade on the window at `(x, y)` scaled by `scale`.
///
/// Each window is variance-normalized: with `area = w h`, `mean = sum / area`
/// and `var = sqsum / area - mean^2`, the standard deviation is `sqrt(var)`
/// when `var > 1` and 1 otherwise. A stump votes `left` when
/// `sum_i(weight_i * rect_sum_i) / area < threshold * std`. A stage rejects
/// the window as soon as its vote total falls below the stage threshold.
pub fn eval_window(model: &CascadeModel, ii: &IntegralImage, x: u32, y: u32, scale: f64) -> Result<bool, DetectError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(DetectError::Scale(scale));
    }
    let (w, h) = scaled_window(model, scale);
    let window = Rect::new(x, y, w, h);
    if !window.fits_within(ii.width(), ii.height()) {
        return Err(DetectError::WindowOutOfBounds { window, width: ii.width(), height: ii.height() });
    }
    Ok(ScaledCascade::new(model, scale, ii.stride()).accepts(ii, x, y))
}

/// The scale pyramid visited by [`scan`]: starts at
/// `max(1, minSize / window)` and multiplies by the scale factor while the
/// scaled window still fits in a `width x height` image.
pub fn scale_ladder(model: &CascadeModel, width: u32, height: u32, params: &DetectParams) -> Vec<f64> {
    let s0 = (params.min_size.0 as f64 / model.window_w() as f64)
        .max(params.min_size.1 as f64 / model.window_h() as f64)
        .max(1.0);
    let mut scales = Vec::new();
    let mut scale = s0;
    loop {
        let (w, h) = scaled_window(model, scale);
        if w > width || h > height {
            break;
        }
        scales.push(scale);
        scale *= params.scale_factor;
    }
    scales
}

/// Slide step at `scale`.
pub fn step_for(scale: f64) -> u32 {
    round_half_up(scale).max(1)
}

/// Raw accepted windows, ordered by ascending scale and then row-major position.
pub fn scan(model: &CascadeModel, img: &GrayImage, params: &DetectParams) -> Result<Vec<Rect>, DetectError> {
    params.validate()?;
    let ii = integral(img);
    Ok(scan_integral(model, &ii, params))
}

pub(crate) fn scan_integral(model: &CascadeModel, ii: &IntegralImage, params: &DetectParams) -> Vec<Rect> {
    Scanner::new(model, ii).scan(params)
}

/// Repeated scans of one image. Raw hits depend only on the resolved
/// geometry at a scale (window, slide step and every rounded feature rect),
/// so scales that resolve identically, within a pass or across passes, are
/// evaluated once.
pub(crate) struct Scanner<'a> {
    model: &'a CascadeModel,
    ii: &'a IntegralImage,
    narrow: Option<Vec<u32>>,
    cache: HashMap<Vec<usize>, Vec<Rect>>,
}

impl<'a> Scanner<'a> {
    pub(crate) fn new(model: &'a CascadeModel, ii: &'a IntegralImage) -> Self {
        let sums = ii.sums();
        let narrow =
            (sums.last().copied().unwrap_or(0) <= u32::MAX as u64).then(|| sums.iter().map(|&v| v as u32).collect());
        Scanner { model, ii, narrow, cache: HashMap::new() }
    }

    pub(crate) fn scan(&mut self, params: &DetectParams) -> Vec<Rect> {
        let mut out = Vec::new();
        for scale in scale_ladder(self.model, self.ii.width(), self.ii.height(), params) {
            let sc = ScaledCascade::new(self.model, scale, self.ii.stride());
            let step = step_for(scale) as usize;
            let mut key = vec![sc.win_w as usize, sc.win_h as usize, step];
            key.extend(sc.rects.iter().flat_map(|r| [r.a, r.d]));
            let narrow = self.narrow.as_deref();
            let hits = self.cache.entry(key).or_insert_with(|| sc.scan(self.ii, narrow, step));
            out.extend_from_slice(hits);
        }
        out
    }

    /// [`scan`] followed by grouping and [`sort_detections`].
    pub(crate) fn detect(&mut self, params: &DetectParams) -> Vec<Detection> {
        let cands = self.scan(params);
        let mut dets = group_rects_eps(&cands, params.min_neighbors, params.group_eps);
        sort_detections(&mut dets);
        dets
    }
}

/// Whether two rectangles fall in the same cluster (before transitive closure).
pub fn similar(a: &Rect, b: &Rect, eps: f64) -> bool {
    let delta = eps * 0.5 * (a.w.min(b.w) as f64 + a.h.min(b.h) as f64);
    let close = |p: i64, q: i64| ((p - q).abs() as f64) <= delta;
    close(a.x as i64, b.x as i64)
        && close(a.y as i64, b.y as i64)
        && close(a.right() as i64, b.right() as i64)
        && close(a.bottom() as i64, b.bottom() as i64)
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the smaller index as root so class order follows first appearance.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Clusters candidates with [`DEFAULT_GROUP_EPS`]. See [`group_rects_eps`].
pub fn group_rects(cands: &[Rect], min_neighbors: u32) -> Vec<Detection> {
    group_rects_eps(cands, min_neighbors, DEFAULT_GROUP_EPS)
}

/// Partitions candidates into classes under the transitive closure of
/// [`similar`], keeping classes with at least `max(1, min_neighbors)` members.
/// Each survivor becomes the member-wise mean rectangle (rounded half-up).
/// Classes are emitted in order of their first member. `min_neighbors == 0`
/// returns every candidate unchanged with `neighbors == 1`.
pub fn group_rects_eps(cands: &[Rect], min_neighbors: u32, eps: f64) -> Vec<Detection> {
    if min_neighbors == 0 {
        return cands.iter().map(|&rect| Detection { rect, neighbors: 1 }).collect();
    }
    let n = cands.len();
    let mut set = DisjointSet::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if similar(&cands[i], &cands[j], eps) {
                set.union(i, j);
            }
        }
    }
    // Accumulators keyed by root; roots are class minima, so ascending root order is first-appearance order.
    let mut acc: Vec<Option<[u64; 5]>> = vec![None; n];
    for (i, r) in cands.iter().enumerate() {
        let root = set.find(i);
        let a = acc[root].get_or_insert([0; 5]);
        a[0] += r.x as u64;
        a[1] += r.y as u64;
        a[2] += r.w as u64;
        a[3] += r.h as u64;
        a[4] += 1;
    }
    acc.into_iter()
        .flatten()
        .filter(|a| a[4] >= min_neighbors as u64)
        .map(|a| {
            let n = a[4];
            let mean = |s: u64| ((2 * s + n) / (2 * n)) as u32;
            Detection { rect: Rect::new(mean(a[0]), mean(a[1]), mean(a[2]), mean(a[3])), neighbors: n as u32 }
        })
        .collect()
}

/// Orders detections by descending area, then row-major position.
pub fn sort_detections(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        b.rect
            .area()
            .cmp(&a.rect.area())
            .then(a.rect.y.cmp(&b.rect.y))
            .then(a.rect.x.cmp(&b.rect.x))
            .then(a.rect.w.cmp(&b.rect.w))
            .then(b.neighbors.cmp(&a.neighbors))
    });
}

/// [`scan`] followed by [`group_rects_eps`], sorted with [`sort_detections`].
pub fn detect_multiscale(
    model: &CascadeModel,
    img: &GrayImage,
    params: &DetectParams,
) -> Result<Vec<Detection>, DetectError> {
    params.validate()?;
    let ii = integral(img);
    Ok(Scanner::new(model, &ii).detect(params))
}
