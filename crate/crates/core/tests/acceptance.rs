//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use common::*;
use facegate::cascade::{parse_cascade_xml, BundledCascade};
use facegate::detector::{detect_multiscale, eval_window, group_rects, scan, DetectParams, Detection};
use facegate::encoding::{match_encodings, MatcherConfig, ReferenceEmbedder};
use facegate::enhanced::{
    default_schedule, detect_enhanced, detect_enhanced_observed, select_face, SelectionPolicy, SweepStep,
};
use facegate::eval::{
    load_manifest, metrics, run_eval, total_score, ConfusionCounts, EncodingSource, EvalConfig, PrecomputedEncodings,
};
use facegate::imageio::{to_grayscale, GrayImage, Rect};
use facegate::integral::integral;
use facegate::pipeline::{FacePipeline, PipelineConfig};
use facegate::registry::{AlertSink, EnrollRequest, IdentificationStatus, Registry};
use facegate::synth::{fixture_cascade, planted_face, relaxed_face, render_scene, stranger_face, Background, FaceSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)*) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)*));
        }
    };
}

fn corpus_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/corpus"))
}

fn fixture_pipeline() -> FacePipeline {
    FacePipeline::new(Arc::new(fixture_cascade()), Arc::new(ReferenceEmbedder), PipelineConfig::default())
}

/// Published counts and metric cells: matching then detection, existing then enhanced.
const TABLE: [([u64; 4], [f64; 4]); 4] = [
    ([504, 265_234, 12_504, 14], [4.674832, 0.18966, 97.2973, 0.378583]),
    ([250_500, 33_810, 17_424, 216], [88.73125, 88.10805, 99.91385, 93.64031]),
    ([512, 1_186, 282_906, 18], [99.57698, 30.15312, 96.60377, 45.9605]),
    ([276_150, 8_472, 17_328, 0], [97.19424, 97.02342, 100.0, 98.48923]),
];
const TOTALS: [[f64; 4]; 2] = [[46.70, 44.15, 98.61, 47.01], [98.39, 63.59, 98.30, 72.23]];

fn criterion_1() -> Outcome {
    let mut rows = vec![];
    let mut worst: f64 = 0.0;
    for (counts, cells) in TABLE {
        let [tp, fp, tn, fn_] = counts;
        let m = metrics(&ConfusionCounts::new(tp, fp, tn, fn_)).map_err(|e| e.to_string())?;
        for (got, want) in m.values().iter().zip(cells) {
            let diff = (got - want).abs();
            worst = worst.max(diff);
            check!(diff <= 0.001, "metric {got} differs from {want} by {diff}");
        }
        rows.push(m);
    }
    for (algo, want) in TOTALS.iter().enumerate() {
        let t = total_score(&rows[2 * algo], &rows[2 * algo + 1]);
        for (got, want) in t.reported.iter().zip(want) {
            check!(format!("{got:.2}") == format!("{want:.2}"), "total {got:.2} != {want:.2}");
        }
    }
    Ok(format!("16 cells within {worst:.1e} pp, 8 totals exact at 2 decimals"))
}

fn criterion_2() -> Outcome {
    let cfg = MatcherConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC2);
    let (mut matches, mut disagreements) = (0, 0);
    for _ in 0..10_000 {
        let (a, b) = random_pair(&mut rng);
        let m = match_encodings(&a, &b, &cfg);
        matches += usize::from(m.is_match);
        disagreements += usize::from(m.is_match != (m.d_face <= 0.5));
    }
    check!(disagreements == 0, "{disagreements} disagreements");
    Ok(format!("10000 pairs ({matches} matches), 0 disagreements"))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let mut rects = 0;
    for i in 0..200 {
        let (w, h) = if i == 0 { (64, 64) } else { (rng.gen_range(1..=64), rng.gen_range(1..=64)) };
        let img = if i % 2 == 0 { random_gray(&mut rng, w, h) } else { GrayImage::filled(w, h, 255).unwrap() };
        rects += check_all_rects(&img);
    }
    Ok(format!("200 images, {rects} rectangles, all exact"))
}

fn criterion_4() -> Outcome {
    let model = BundledCascade::FrontalFaceDefault.load().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let (mut accepted, mut deepest) = (0, 0);
    for (img, x, y, scale) in random_windows(&model, &mut rng, 1000) {
        let stages = full_stage_eval(&model, &img, x, y, scale);
        let full = stages.iter().all(|&p| p);
        let fast = eval_window(&model, &integral(&img), x, y, scale).map_err(|e| e.to_string())?;
        check!(fast == full, "window at ({x},{y}) scale {scale}: early exit {fast}, full {full}");
        accepted += usize::from(full);
        deepest = deepest.max(stages.iter().take_while(|&&p| p).count());
    }
    Ok(format!("1000 windows agree ({accepted} accepted, deepest rejection after {deepest} stages)"))
}

fn criterion_5() -> Outcome {
    let tiny = parse_cascade_xml(include_bytes!("../../../fixtures/cascades/tiny.xml")).map_err(|e| e.to_string())?;
    let fixture = fixture_cascade();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let mut images = 0;
    let mut windows = 0;
    for _ in 0..10 {
        let (w, h) = (rng.gen_range(8..=48), rng.gen_range(8..=48));
        let img =
            GrayImage::from_fn(w, h, |x, y| if (x / 3 + y / 5) % 4 == 0 { 220 } else { rng.gen_range(0..40) }).unwrap();
        let params = DetectParams::new(rng.gen_range(1.05..1.5), 1, (4, 4)).map_err(|e| e.to_string())?;
        let got = scan(&tiny, &img, &params).map_err(|e| e.to_string())?;
        check!(got == oracle_scan(&tiny, &img, &params), "tiny cascade scan differs on a {w}x{h} image");
        images += 1;
        windows += got.len();
    }
    let mut scenes = vec![to_grayscale(&planted_face().0)];
    for _ in 0..3 {
        let size = rng.gen_range(30..=64);
        let face = FaceSpec::new(rng.gen_range(0..=128 - size), rng.gen_range(0..=128 - size), size, rng.gen());
        let bg = Background::Gradient { from: rng.gen(), to: rng.gen(), seed: rng.gen() };
        scenes.push(to_grayscale(&render_scene(128, 128, bg, &[face])));
    }
    for img in &scenes {
        let params = DetectParams::new(1.1, 3, (24, 24)).map_err(|e| e.to_string())?;
        let got = scan(&fixture, img, &params).map_err(|e| e.to_string())?;
        check!(got == oracle_scan(&fixture, img, &params), "fixture cascade scan differs");
        images += 1;
        windows += got.len();
    }
    for i in 0..200 {
        let cands = random_candidates(&mut rng);
        let k = (i % 5) as u32;
        check!(group_rects(&cands, k) == oracle_group(&cands, k, 0.2), "grouping differs on set {i}");
    }
    Ok(format!(
        "{images} images / {windows} accepted windows match the exhaustive scan; 200 candidate sets group identically"
    ))
}

fn criterion_6() -> Outcome {
    let s = default_schedule();
    let steps = s.steps();
    check!(steps.len() == 10, "schedule has {} steps", steps.len());
    check!(steps[0] == SweepStep { scale_factor: 1.10, min_neighbors: 10 }, "first step {}", steps[0]);
    check!(steps[9] == SweepStep { scale_factor: 1.01, min_neighbors: 1 }, "last step {}", steps[9]);

    let model = fixture_cascade();
    let policy = SelectionPolicy::default();
    let mut stops = vec![];
    for (name, frame) in [("planted", planted_face().0), ("relaxed", relaxed_face().0)] {
        let mut executed = vec![];
        let out = detect_enhanced_observed(&model, &to_grayscale(&frame), &s, &policy, (30, 30), |i, _, d| {
            executed.push((i, d.len()))
        })
        .map_err(|e| e.to_string())?;
        let k = out.passes_run;
        check!(executed.len() == k, "{name}: {} passes executed, stop reported at {k}", executed.len());
        check!(executed[..k - 1].iter().all(|&(_, n)| n == 0), "{name}: a pass before the stop found faces");
        check!(executed[k - 1].1 > 0, "{name}: stopping pass found nothing");
        let face = out.selected.ok_or(format!("{name}: no face"))?;
        stops.push(format!("{name} at {}", face.used_params));
    }
    check!(stops[0] == "planted at 1.10/10", "planted face stopped at {}", stops[0]);

    let det = |x, y, w| Detection { rect: Rect::new(x, y, w, w), neighbors: 1 };
    let (a, b) = (det(10, 10, 50), det(100, 100, 20));
    let chosen = select_face(&[a, b], 200, 200, &policy).map(|(d, _)| d);
    check!(chosen == Some(b), "B-over-A case chose {chosen:?}");
    let (small, large) = (det(90, 90, 20), det(70, 70, 60));
    check!(select_face(&[small, large], 200, 200, &policy).map(|(d, _)| d) == Some(large), "larger central face lost");

    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let mut dets: Vec<Detection> =
        (0..12).map(|_| det(rng.gen_range(0..250), rng.gen_range(0..250), rng.gen_range(10..50))).collect();
    let expected = select_face(&dets, 300, 300, &policy);
    for _ in 0..500 {
        dets.shuffle(&mut rng);
        check!(select_face(&dets, 300, 300, &policy) == expected, "selection depends on input order");
    }
    Ok(format!("10 steps 1.10/10..1.01/1; earliest stop ({}); center cases and 500 shuffles hold", stops.join(", ")))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let bytes = std::fs::read(corpus_dir().join("manifest.csv")).map_err(|e| e.to_string())?;
    let entries = load_manifest(&bytes).map_err(|e| e.to_string())?;
    let pipeline = fixture_pipeline();
    let source = EncodingSource::Pipeline { pipeline: &pipeline, root: corpus_dir() };
    let mut outputs = vec![];
    for jobs in [1, 4, 1] {
        let cfg = EvalConfig { jobs, ..EvalConfig::default() };
        let r = run_eval(&entries, source, &cfg).map_err(|e| e.to_string())?;
        check!(r.records.len() == 132, "{} records", r.records.len());
        check!(r.detection.counts.total() == 132, "detection counts sum to {}", r.detection.counts.total());
        outputs.push((r.to_json(false), r.to_csv()));
    }
    check!(outputs.iter().all(|o| *o == outputs[0]), "reports differ across runs or thread counts");

    let file = std::fs::File::open(corpus_dir().join("encodings.jsonl")).map_err(|e| e.to_string())?;
    let set = PrecomputedEncodings::from_reader(std::io::BufReader::new(file)).map_err(|e| e.to_string())?;
    let pre =
        run_eval(&entries, EncodingSource::Precomputed(&set), &EvalConfig::default()).map_err(|e| e.to_string())?;
    check!(pre.records.len() == 132, "precomputed mode gave {} records", pre.records.len());
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(60), "took {elapsed:.1?}");
    Ok(format!("132 records, detection sum 132, byte-identical for jobs 1/4/1, {elapsed:.2?}"))
}

fn criterion_8() -> Outcome {
    let model = BundledCascade::FrontalFaceDefault.load().map_err(|e| e.to_string())?;
    let gray = to_grayscale(&vga_frame());
    let params = DetectParams::new(1.1, 3, (30, 30)).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let dets = detect_multiscale(&model, &gray, &params).map_err(|e| e.to_string())?;
    let baseline = start.elapsed();

    let (schedule, policy) = (default_schedule(), SelectionPolicy::default());
    let start = Instant::now();
    let found = detect_enhanced(&model, &gray, &schedule, &policy, (30, 30)).map_err(|e| e.to_string())?;
    let sweep = start.elapsed();

    // Worst case: the same background without faces runs every pass.
    let empty = to_grayscale(&render_scene(640, 480, VGA_BACKGROUND, &[]));
    let start = Instant::now();
    let full = detect_enhanced(&model, &empty, &schedule, &policy, (30, 30)).map_err(|e| e.to_string())?;
    let worst = start.elapsed();
    check!(full.passes_run == 10, "face-free frame stopped after {} passes", full.passes_run);
    check!(baseline < Duration::from_secs(1), "baseline detect took {baseline:.2?}");
    check!(sweep < Duration::from_secs(10), "sweep took {sweep:.2?}");
    check!(worst < Duration::from_secs(10), "10-pass sweep took {worst:.2?}");
    Ok(format!(
        "640x480 baseline {baseline:.2?} ({} detections); sweep {sweep:.2?} ({} pass); all 10 passes {worst:.2?}",
        dets.len(),
        found.passes_run
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = dir.path().join("people.jsonl");
    let pipeline = fixture_pipeline();
    let cfg = MatcherConfig::default();
    let now = Utc.timestamp_opt(1_700_000_000, 0).unwrap();
    let mut reg = Registry::open(&store).map_err(|e| e.to_string())?;
    let (planted, _) = planted_face();
    let req = EnrollRequest { person_id: None, display_name: "Planted".into(), info: BTreeMap::new() };
    let id = reg.enroll(&pipeline, req, &planted, now).map_err(|e| e.to_string())?.person_id.clone();

    let sink = AlertSink::new(dir.path().join("alerts.jsonl"), None);
    let mut alerts = 0;
    let hit = reg.identify(&pipeline, &planted, &cfg, "planted", now).map_err(|e| e.to_string())?;
    check!(hit.result.status == IdentificationStatus::Recognized, "enrolled face not recognized");
    check!(hit.result.person_id.as_deref() == Some(id.as_str()), "wrong person");
    check!(hit.result.similarity_pct == Some(100.0), "similarity {:?}", hit.result.similarity_pct);
    for id in [&hit, &reg.identify(&pipeline, &stranger_face().0, &cfg, "stranger", now).map_err(|e| e.to_string())?] {
        if let Some(alert) = &id.alert {
            check!(sink.emit(alert).is_empty(), "alert delivery failed");
            alerts += 1;
        }
    }
    let logged = std::fs::read_to_string(&sink.log_path).map_err(|e| e.to_string())?.lines().count();
    check!(alerts == 1 && logged == 1, "{alerts} alerts raised, {logged} logged");

    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    for i in 0..100 {
        let path = dir.path().join(format!("random-{i}.jsonl"));
        let mut reg = Registry::open(&path).map_err(|e| e.to_string())?;
        for _ in 0..rng.gen_range(0..6) {
            let person_id = rng.gen_bool(0.3).then(|| format!("id{}", rng.gen_range(0..4)));
            let info = (0..rng.gen_range(0..3)).map(|k| (format!("k{k}"), format!("{}", rng.gen::<u32>()))).collect();
            let req = EnrollRequest { person_id, display_name: format!("n{}", rng.gen::<u16>()), info };
            let enc = random_unit(&mut rng);
            let at = Utc.timestamp_opt(rng.gen_range(0..2_000_000_000), rng.gen_range(0..1_000_000_000)).unwrap();
            reg.enroll_encoding(req, enc, "reference-v1", at).map_err(|e| e.to_string())?;
        }
        let back = Registry::open(&path).map_err(|e| e.to_string())?;
        check!(back == reg, "random store {i} changed on reload");
    }
    Ok("recognized at 100%, stranger raised exactly 1 alert, 100 random stores reload losslessly".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric reproduction", criterion_1),
        ("threshold equivalence", criterion_2),
        ("integral-image exactness", criterion_3),
        ("early-exit equivalence", criterion_4),
        ("scan and grouping oracles", criterion_5),
        ("enhanced sweep behavior", criterion_6),
        ("end-to-end harness smoke", criterion_7),
        ("performance", criterion_8),
        ("registry", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
