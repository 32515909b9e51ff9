mod common;

use common::{random_pair, random_unit};
use facegate::encoding::{
    euclidean_distance, match_encodings, reference_embed, similarity_pct, EmbeddingProvider, FaceEncoding,
    MatcherConfig, ReferenceEmbedder, XorShift64Star, ENCODING_DIM, REFERENCE_SEED,
};
use facegate::imageio::{crop, gray_to_rgb, to_grayscale, RgbImage};
use facegate::pipeline::{FacePipeline, PipelineConfig};
use facegate::synth::{fixture_cascade, planted_face};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[test]
fn default_threshold_is_half_distance() {
    let cfg = MatcherConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10_000 {
        let (a, b) = random_pair(&mut rng);
        let m = match_encodings(&a, &b, &cfg);
        assert_eq!(m.is_match, m.d_face <= 0.5, "d = {}", m.d_face);
    }
    for d in [0.0, 0.25, 0.4999999, 0.5, 0.5000001, 1.0, 1.5, 2.0] {
        assert_eq!(similarity_pct(d, &cfg) >= 75.0, d <= 0.5);
    }
}

#[test]
fn reference_embedder_matches_hand_composition() {
    let (frame, _) = planted_face();
    let pipeline =
        FacePipeline::new(Arc::new(fixture_cascade()), Arc::new(ReferenceEmbedder), PipelineConfig::default());
    let (face, enc) = pipeline.encode(&frame).unwrap().unwrap();

    // Composed by hand: grayscale, back to three channels, crop, then the
    // documented projection.
    let face_crop = crop(&gray_to_rgb(&to_grayscale(&frame)), face.rect).unwrap();
    let mut pixels = vec![];
    for j in 0..32u32 {
        for i in 0..32u32 {
            let p = face_crop.get(i * face_crop.width() / 32, j * face_crop.height() / 32);
            pixels.extend(p.iter().map(|&c| c as f64 / 255.0));
        }
    }
    let mut rng = XorShift64Star::new(REFERENCE_SEED);
    let raw: Vec<f64> = (0..ENCODING_DIM).map(|_| pixels.iter().map(|p| rng.next_signed() * p).sum()).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    let expected: Vec<f64> = raw.iter().map(|x| x / norm).collect();
    for (got, want) in enc.values().iter().zip(&expected) {
        assert!((got - want).abs() < 1e-12);
    }
    assert_eq!(ReferenceEmbedder.id(), "reference-v1");
}

#[test]
fn reference_embedding_is_unit_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(1..80), rng.gen_range(1..80));
        let crop = RgbImage::from_fn(w, h, |_, _| [rng.gen(), rng.gen(), rng.gen()]).unwrap();
        assert!((reference_embed(&crop).norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn serde_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let e = random_unit(&mut rng);
        let back: FaceEncoding = serde_json::from_str(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back, e);
    }
    assert!(serde_json::from_str::<FaceEncoding>("[1.0, 2.0]").is_err());
}

fn encoding_strategy() -> impl Strategy<Value = FaceEncoding> {
    prop::collection::vec(-1.0..1.0f64, ENCODING_DIM).prop_map(|v| FaceEncoding::from_slice(&v).unwrap())
}

proptest! {
    #[test]
    fn distance_is_a_metric(a in encoding_strategy(), b in encoding_strategy(), c in encoding_strategy()) {
        prop_assert_eq!(euclidean_distance(&a, &b), euclidean_distance(&b, &a));
        prop_assert_eq!(euclidean_distance(&a, &a), 0.0);
        prop_assert!(euclidean_distance(&a, &c) <= euclidean_distance(&a, &b) + euclidean_distance(&b, &c) + 1e-12);
    }

    #[test]
    fn similarity_is_clamped_and_monotone(d1 in 0.0..10.0f64, d2 in 0.0..10.0f64) {
        let cfg = MatcherConfig::default();
        let (s1, s2) = (similarity_pct(d1, &cfg), similarity_pct(d2, &cfg));
        prop_assert!((0.0..=100.0).contains(&s1));
        if d1 <= d2 {
            prop_assert!(s1 >= s2);
        }
    }
}
