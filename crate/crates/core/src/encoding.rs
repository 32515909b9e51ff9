//! Face encodings, distance, the similarity percentage and the match rule.
//!
//! Similarity maps a Euclidean distance `d` to
//! `clamp((1 - d / d_max) * 100 + 25, 0, 100)`. With the defaults
//! (`d_max = 1`, threshold 75 %) a pair matches exactly when `d <= 0.5`.
//! The `+ 25` offset means a distance of `d_max` scores 25 %, not 0 %; the
//! clamp only affects distances below 0.25 (which saturate at 100 %) and above
//! 1.25 (which floor at 0 %).

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imageio::{resize_nearest, RgbImage};

pub const ENCODING_DIM: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("an encoding needs exactly {ENCODING_DIM} values, got {0}")]
    Length(usize),
    #[error("encoding value {index} is not finite")]
    NonFinite { index: usize },
}

/// A 128-dimensional face descriptor with finite components.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FaceEncoding(Box<[f64; ENCODING_DIM]>);

impl FaceEncoding {
    pub fn from_slice(values: &[f64]) -> Result<Self, EncodingError> {
        let arr: [f64; ENCODING_DIM] = values.try_into().map_err(|_| EncodingError::Length(values.len()))?;
        if let Some(index) = arr.iter().position(|v| !v.is_finite()) {
            return Err(EncodingError::NonFinite { index });
        }
        Ok(FaceEncoding(Box::new(arr)))
    }

    pub fn values(&self) -> &[f64; ENCODING_DIM] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for FaceEncoding {
    type Error = EncodingError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        FaceEncoding::from_slice(&v)
    }
}

impl From<FaceEncoding> for Vec<f64> {
    fn from(e: FaceEncoding) -> Self {
        e.0.to_vec()
    }
}

impl fmt::Debug for FaceEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FaceEncoding([{:.4}, {:.4}, .. ; {}])", self.0[0], self.0[1], ENCODING_DIM)
    }
}

/// Euclidean distance, accumulated in index order in double precision.
pub fn euclidean_distance(a: &FaceEncoding, b: &FaceEncoding) -> f64 {
    a.0.iter()
        .zip(b.0.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Settings for turning a distance into a match decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatcherConfig {
    pub d_max: f64,
    pub threshold_pct: f64,
}

pub const CLAMP_LOW: f64 = 0.0;
pub const CLAMP_HIGH: f64 = 100.0;

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig { d_max: 1.0, threshold_pct: 75.0 }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatcherConfigError {
    #[error("d_max must be finite and positive, got {0}")]
    DMax(f64),
    #[error("threshold must lie in [0, 100], got {0}")]
    Threshold(f64),
}

impl MatcherConfig {
    pub fn new(d_max: f64, threshold_pct: f64) -> Result<Self, MatcherConfigError> {
        if !(d_max.is_finite() && d_max > 0.0) {
            return Err(MatcherConfigError::DMax(d_max));
        }
        if !(0.0..=100.0).contains(&threshold_pct) {
            return Err(MatcherConfigError::Threshold(threshold_pct));
        }
        Ok(MatcherConfig { d_max, threshold_pct })
    }
}

pub fn similarity_pct(d_face: f64, cfg: &MatcherConfig) -> f64 {
    let raw = (1.0 - d_face / cfg.d_max) * 100.0 + 25.0;
    raw.clamp(CLAMP_LOW, CLAMP_HIGH)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub d_face: f64,
    pub similarity_pct: f64,
    pub is_match: bool,
}

impl MatchResult {
    pub fn from_distance(d_face: f64, cfg: &MatcherConfig) -> Self {
        let similarity_pct = similarity_pct(d_face, cfg);
        MatchResult { d_face, similarity_pct, is_match: similarity_pct >= cfg.threshold_pct }
    }
}

/// Distance, similarity and the inclusive threshold decision for two encodings.
pub fn match_encodings(a: &FaceEncoding, b: &FaceEncoding, cfg: &MatcherConfig) -> MatchResult {
    MatchResult::from_distance(euclidean_distance(a, b), cfg)
}

/// Something that turns an RGB face crop into an encoding.
///
/// Implementations must be deterministic and safe to call from several
/// threads at once. The identity string is recorded in every output that
/// carries encodings.
pub trait EmbeddingProvider: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, crop: &RgbImage) -> FaceEncoding;
}

/// 64-bit xorshift* generator (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D).
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    /// A zero seed would be a fixed point, so it is replaced by 1.
    pub fn new(seed: u64) -> Self {
        XorShift64Star { state: if seed == 0 { 1 } else { seed } }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }
}

pub const REFERENCE_SEED: u64 = 0x9E37_79B9_7F4A_7C15;
pub const REFERENCE_SIDE: u32 = 32;
const REFERENCE_INPUTS: usize = (REFERENCE_SIDE * REFERENCE_SIDE * 3) as usize;

fn projection() -> &'static [f64] {
    static MATRIX: OnceLock<Vec<f64>> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let mut rng = XorShift64Star::new(REFERENCE_SEED);
        (0..ENCODING_DIM * REFERENCE_INPUTS).map(|_| rng.next_signed()).collect()
    })
}

/// Deterministic stand-in for a learned face embedding.
///
/// The crop is resized (nearest neighbour) to 32x32, its 3072 channel values
/// are scaled to `[0, 1]` and multiplied by a fixed 128x3072 matrix drawn
/// row-major from [`XorShift64Star`] seeded with [`REFERENCE_SEED`], and the
/// result is L2-normalized. A crop that projects to the zero vector (only an
/// all-black crop in practice) maps to the first basis vector.
///
/// It is a random projection of pixels: it separates crops by appearance but
/// has no notion of identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceEmbedder;

impl ReferenceEmbedder {
    pub const ID: &'static str = "reference-v1";
}

impl EmbeddingProvider for ReferenceEmbedder {
    fn id(&self) -> &str {
        Self::ID
    }

    fn embed(&self, crop: &RgbImage) -> FaceEncoding {
        reference_embed(crop)
    }
}

pub fn reference_embed(crop: &RgbImage) -> FaceEncoding {
    let small = resize_nearest(crop, REFERENCE_SIDE, REFERENCE_SIDE).expect("non-zero target size");
    let inputs: Vec<f64> = small.data().iter().map(|&v| v as f64 / 255.0).collect();
    let matrix = projection();
    let mut out = [0.0f64; ENCODING_DIM];
    for (row, slot) in matrix.chunks_exact(REFERENCE_INPUTS).zip(out.iter_mut()) {
        let mut acc = 0.0;
        for (m, x) in row.iter().zip(&inputs) {
            acc += m * x;
        }
        *slot = acc;
    }
    let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in out.iter_mut() {
            *v /= norm;
        }
    } else {
        out = [0.0; ENCODING_DIM];
        out[0] = 1.0;
    }
    FaceEncoding(Box::new(out))
}
