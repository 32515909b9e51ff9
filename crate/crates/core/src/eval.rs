//! Pairwise evaluation: manifests, the comparison plan, confusion-matrix
//! classification, metric arithmetic and report emission.
//!
//! Every ordered pair of distinct manifest entries is one comparison. Each
//! comparison contributes one detection outcome, attributed to the probe
//! image, so the detection table always sums to `N * (N - 1)` (minus pairs
//! that errored). The matching table additionally skips pairs of two
//! non-face images that were both correctly left undetected, unless
//! [`SkipRule::Never`] is chosen.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{euclidean_distance, FaceEncoding, MatchResult, MatcherConfig};
use crate::imageio::decode_netpbm;
use crate::pipeline::FacePipeline;

/// One image of an evaluation corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    /// Identity label; empty exactly when `has_face` is false.
    pub label: String,
    pub has_face: bool,
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest header must be `path,label,has_face`, found `{0}`")]
    Header(String),
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("line {line}: duplicate path {path:?} (first listed on line {first_line})")]
    Duplicate { line: u64, path: String, first_line: u64 },
    #[error("line {line}: {path:?} has has_face={has_face} but label {label:?}; non-face images must have an empty label and face images a non-empty one")]
    Inconsistent { line: u64, path: String, label: String, has_face: bool },
}

/// Parses a `path,label,has_face` CSV manifest.
pub fn load_manifest(bytes: &[u8]) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = reader.headers().map_err(|e| ManifestError::Row { line: 1, message: e.to_string() })?.clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["path", "label", "has_face"] {
        return Err(ManifestError::Header(headers.iter().collect::<Vec<_>>().join(",")));
    }
    let mut entries = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            ManifestError::Row { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let path = record[0].trim().to_string();
        let label = record[1].trim().to_string();
        let has_face = match record[2].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(ManifestError::Row {
                    line,
                    message: format!("has_face must be true or false, got {other:?}"),
                })
            }
        };
        if path.is_empty() {
            return Err(ManifestError::Row { line, message: "empty path".into() });
        }
        if has_face == label.is_empty() {
            return Err(ManifestError::Inconsistent { line, path, label, has_face });
        }
        if let Some(&first_line) = seen.get(&path) {
            return Err(ManifestError::Duplicate { line, path, first_line });
        }
        seen.insert(path.clone(), line);
        entries.push(ManifestEntry { path, label, has_face });
    }
    Ok(entries)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("a comparison plan needs at least 2 entries, got {0}")]
pub struct PlanError(pub usize);

/// All ordered pairs `(probe, gallery)` of distinct entries, as indices into
/// `entries`, sorted by probe path and then gallery path.
pub fn pair_plan(entries: &[ManifestEntry]) -> Result<Vec<(usize, usize)>, PlanError> {
    if entries.len() < 2 {
        return Err(PlanError(entries.len()));
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| entries[a].path.cmp(&entries[b].path));
    let mut plan = Vec::with_capacity(entries.len() * (entries.len() - 1));
    for &p in &order {
        for &g in &order {
            if p != g {
                plan.push((p, g));
            }
        }
    }
    Ok(plan)
}

/// A confusion-matrix cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Tp,
    Fp,
    Tn,
    Fn,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cell::Tp => "TP",
            Cell::Fp => "FP",
            Cell::Tn => "TN",
            Cell::Fn => "FN",
        })
    }
}

/// What the detector reported for the probe image of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionOutcome {
    ExactlyOne,
    Multiple,
    NoneOnFace,
    NoneOnNonface,
    FoundOnNonface,
}

impl DetectionOutcome {
    pub fn new(has_face: bool, count: usize) -> Self {
        match (has_face, count) {
            (true, 0) => DetectionOutcome::NoneOnFace,
            (true, 1) => DetectionOutcome::ExactlyOne,
            (true, _) => DetectionOutcome::Multiple,
            (false, 0) => DetectionOutcome::NoneOnNonface,
            (false, _) => DetectionOutcome::FoundOnNonface,
        }
    }

    pub fn cell(self) -> Cell {
        match self {
            DetectionOutcome::ExactlyOne => Cell::Tp,
            DetectionOutcome::Multiple | DetectionOutcome::FoundOnNonface => Cell::Fp,
            DetectionOutcome::NoneOnFace => Cell::Fn,
            DetectionOutcome::NoneOnNonface => Cell::Tn,
        }
    }
}

/// Detection cell for an image with `count` detections in the deciding pass.
///
/// A single detection on a face image is a TP and several are an FP; none is
/// an FN. On a non-face image, no detection is a TN and any detection an FP.
pub fn classify_detection(has_face: bool, count: usize) -> Cell {
    DetectionOutcome::new(has_face, count).cell()
}

/// Which pairs the matching table leaves out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipRule {
    /// Skip pairs of two non-face images where neither produced a detection.
    #[default]
    NonFacePairs,
    /// Count every pair.
    Never,
}

impl std::str::FromStr for SkipRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "non-face-pairs" => Ok(SkipRule::NonFacePairs),
            "never" => Ok(SkipRule::Never),
            other => Err(format!("unknown skip rule {other:?} (expected non-face-pairs or never)")),
        }
    }
}

/// Face/detection facts about one side of a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Side {
    pub has_face: bool,
    pub detected: bool,
}

/// Matching cell for a pair, or `None` when the pair is skipped.
///
/// An undetected face on either side is an FP. A missing prediction (one
/// side has no encoding) counts as "not a match".
pub fn classify_matching(
    truth_match: bool,
    predicted: Option<bool>,
    probe: Side,
    gallery: Side,
    rule: SkipRule,
) -> Option<Cell> {
    let face_missed = (probe.has_face && !probe.detected) || (gallery.has_face && !gallery.detected);
    if face_missed {
        return Some(Cell::Fp);
    }
    let quiet_non_faces = !probe.has_face && !gallery.has_face && !probe.detected && !gallery.detected;
    if quiet_non_faces && rule == SkipRule::NonFacePairs {
        return None;
    }
    Some(match (truth_match, predicted.unwrap_or(false)) {
        (true, true) => Cell::Tp,
        (true, false) => Cell::Fn,
        (false, true) => Cell::Fp,
        (false, false) => Cell::Tn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn add(&mut self, cell: Cell) {
        match cell {
            Cell::Tp => self.tp += 1,
            Cell::Fp => self.fp += 1,
            Cell::Tn => self.tn += 1,
            Cell::Fn => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// A metric whose denominator was zero; it is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Precision,
    Recall,
    F1,
}

/// Accuracy, precision, recall and F1 in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<Metric>,
}

impl MetricRow {
    pub fn values(&self) -> [f64; 4] {
        [self.accuracy, self.precision, self.recall, self.f1]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("metrics are undefined when every count is zero")]
pub struct AllZeroCounts;

pub fn metrics(c: &ConfusionCounts) -> Result<MetricRow, AllZeroCounts> {
    let total = c.total();
    if total == 0 {
        return Err(AllZeroCounts);
    }
    let mut undefined = Vec::new();
    let mut ratio = |num: u64, den: u64, which: Metric| {
        if den == 0 {
            undefined.push(which);
            0.0
        } else {
            100.0 * num as f64 / den as f64
        }
    };
    let accuracy = 100.0 * (c.tp + c.tn) as f64 / total as f64;
    let precision = ratio(c.tp, c.tp + c.fp, Metric::Precision);
    let recall = ratio(c.tp, c.tp + c.fn_, Metric::Recall);
    let f1 = if precision + recall == 0.0 {
        undefined.push(Metric::F1);
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricRow { accuracy, precision, recall, f1, undefined })
}

/// Rounds a percentage to integer hundredths, halves away from zero.
pub fn hundredths(pct: f64) -> i64 {
    (pct * 100.0).round() as i64
}

/// Per-metric mean of the matching and detection rows.
///
/// `mean` holds the exact averages. `reported` follows the published
/// convention: each row value is first rounded to 2 decimals, and the two
/// rounded values are averaged with the half-hundredth rounded up. The two
/// can differ in the last digit (an exact mean of 72.2249 is reported as
/// 72.23).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalScore {
    pub mean: [f64; 4],
    pub reported: [f64; 4],
}

pub fn total_score(matching: &MetricRow, detection: &MetricRow) -> TotalScore {
    let (m, d) = (matching.values(), detection.values());
    let mean = std::array::from_fn(|i| (m[i] + d[i]) / 2.0);
    let reported = std::array::from_fn(|i| {
        let sum = hundredths(m[i]) + hundredths(d[i]);
        (sum + 1).div_euclid(2) as f64 / 100.0
    });
    TotalScore { mean, reported }
}

/// One comparison of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComparisonRecord {
    pub probe: String,
    pub gallery: String,
    /// `None` when the probe image failed to process.
    pub detection: Option<DetectionOutcome>,
    pub probe_faces: Option<usize>,
    pub d_face: Option<f64>,
    pub similarity_pct: Option<f64>,
    pub predicted_match: Option<bool>,
    pub truth_match: bool,
    pub detection_cell: Option<Cell>,
    /// `None` when the pair is skipped or errored.
    pub matching_cell: Option<Cell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub counts: ConfusionCounts,
    /// `None` when every count is zero.
    pub metrics: Option<MetricRow>,
}

impl TableReport {
    fn new(counts: ConfusionCounts) -> Self {
        TableReport { counts, metrics: metrics(&counts).ok() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema: u32,
    pub mode: EvalMode,
    pub provider: String,
    pub threshold_pct: f64,
    pub d_max: f64,
    pub skip_rule: SkipRule,
    pub images: usize,
    pub comparisons: usize,
    pub errored: usize,
    pub skipped: usize,
    pub matching: TableReport,
    pub detection: TableReport,
    pub total_score: Option<TotalScore>,
    pub records: Vec<ComparisonRecord>,
}

pub const REPORT_SCHEMA: u32 = 1;

impl Report {
    pub fn to_json(&self, pretty: bool) -> String {
        let s = if pretty { serde_json::to_string_pretty(self) } else { serde_json::to_string(self) };
        s.expect("reports serialize")
    }

    /// Counts and metrics as CSV, percentages at 2 decimals.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let head = ["schema", "table", "tp", "fp", "tn", "fn", "accuracy", "precision", "recall", "f1"];
        w.write_record(head).expect("in-memory write");
        let pct = |v: f64| format!("{:.2}", v);
        for (name, table) in [("matching", &self.matching), ("detection", &self.detection)] {
            let c = table.counts;
            let mut row = vec![
                REPORT_SCHEMA.to_string(),
                name.to_string(),
                c.tp.to_string(),
                c.fp.to_string(),
                c.tn.to_string(),
                c.fn_.to_string(),
            ];
            match &table.metrics {
                Some(m) => row.extend(m.values().map(pct)),
                None => row.extend(std::iter::repeat_n(String::new(), 4)),
            }
            w.write_record(&row).expect("in-memory write");
        }
        if let Some(t) = &self.total_score {
            let mut row = vec![
                REPORT_SCHEMA.to_string(),
                "total".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ];
            row.extend(t.reported.map(pct));
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    Pipeline,
    Precomputed,
}

/// One line of a precomputed encodings file.
///
/// `vector` is `null` when no face was found. `faces` is the number of
/// detections in the deciding pass; it defaults to 1 when a vector is given
/// and 0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecomputedRecord {
    pub id: String,
    pub provider: String,
    pub vector: Option<FaceEncoding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<usize>,
}

impl PrecomputedRecord {
    pub fn face_count(&self) -> usize {
        self.faces.unwrap_or(usize::from(self.vector.is_some()))
    }
}

/// Encodings keyed by manifest path, all from one provider.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEncodings {
    pub provider: String,
    pub records: HashMap<String, PrecomputedRecord>,
}

#[derive(Debug, Error)]
pub enum PrecomputedError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: duplicate id {id:?}")]
    Duplicate { line: usize, id: String },
    #[error("line {line}: provider {found:?} differs from {expected:?} used earlier in the file")]
    MixedProviders { line: usize, expected: String, found: String },
    #[error("line {line}: {id:?} has a vector but faces = 0")]
    FacesWithoutCount { line: usize, id: String },
    #[error("line {line}: {id:?} has faces = {faces} but no vector")]
    CountWithoutVector { line: usize, id: String, faces: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PrecomputedEncodings {
    /// Reads JSON lines; blank lines are ignored.
    pub fn from_reader(reader: impl BufRead) -> Result<Self, PrecomputedError> {
        let mut out = PrecomputedEncodings::default();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PrecomputedRecord =
                serde_json::from_str(&line).map_err(|source| PrecomputedError::Json { line: line_no, source })?;
            match (&rec.vector, rec.faces) {
                (Some(_), Some(0)) => return Err(PrecomputedError::FacesWithoutCount { line: line_no, id: rec.id }),
                (None, Some(n)) if n > 0 => {
                    return Err(PrecomputedError::CountWithoutVector { line: line_no, id: rec.id, faces: n })
                }
                _ => {}
            }
            if out.records.is_empty() {
                out.provider = rec.provider.clone();
            } else if rec.provider != out.provider {
                return Err(PrecomputedError::MixedProviders {
                    line: line_no,
                    expected: out.provider.clone(),
                    found: rec.provider,
                });
            }
            if out.records.contains_key(&rec.id) {
                return Err(PrecomputedError::Duplicate { line: line_no, id: rec.id });
            }
            out.records.insert(rec.id.clone(), rec);
        }
        Ok(out)
    }
}

/// Where encodings come from.
#[derive(Debug, Clone, Copy)]
pub enum EncodingSource<'a> {
    /// Decode each image below `root` and run the pipeline on it.
    Pipeline {
        pipeline: &'a FacePipeline,
        root: &'a Path,
    },
    Precomputed(&'a PrecomputedEncodings),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalConfig {
    pub matcher: MatcherConfig,
    pub skip_rule: SkipRule,
    /// Worker threads; 0 lets the thread pool decide.
    pub jobs: usize,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("cannot read image {path}: {source}")]
    ReadImage { path: PathBuf, source: std::io::Error },
    #[error("cannot decode image {path}: {source}")]
    DecodeImage { path: PathBuf, source: crate::imageio::NetpbmError },
    #[error("no precomputed encoding for {0:?}")]
    MissingEncoding(String),
    #[error("{path}: {message}")]
    Engine { path: String, message: String },
    #[error("cannot start worker threads: {0}")]
    ThreadPool(String),
}

/// Per-image result shared by every comparison the image takes part in.
#[derive(Debug, Clone)]
struct ImageOutcome {
    faces: usize,
    encoding: Option<FaceEncoding>,
    error: Option<String>,
}

fn process_images(entries: &[ManifestEntry], source: EncodingSource<'_>) -> Result<Vec<ImageOutcome>, EvalError> {
    match source {
        EncodingSource::Precomputed(set) => entries
            .iter()
            .map(|e| {
                let rec = set.records.get(&e.path).ok_or_else(|| EvalError::MissingEncoding(e.path.clone()))?;
                Ok(ImageOutcome { faces: rec.face_count(), encoding: rec.vector.clone(), error: None })
            })
            .collect(),
        EncodingSource::Pipeline { pipeline, root } => entries
            .par_iter()
            .map(|e| {
                let path = root.join(&e.path);
                let bytes =
                    std::fs::read(&path).map_err(|source| EvalError::ReadImage { path: path.clone(), source })?;
                let image = decode_netpbm(&bytes).map_err(|source| EvalError::DecodeImage { path, source })?.into_rgb();
                Ok(match pipeline.run(&image) {
                    Ok(out) => ImageOutcome { faces: out.detections.len(), encoding: out.encoding, error: None },
                    Err(err) => {
                        log::warn!("{}: {err}", e.path);
                        ImageOutcome { faces: 0, encoding: None, error: Some(err.to_string()) }
                    }
                })
            })
            .collect(),
    }
}

fn compare(
    probe: &ManifestEntry,
    gallery: &ManifestEntry,
    p: &ImageOutcome,
    g: &ImageOutcome,
    config: &EvalConfig,
) -> ComparisonRecord {
    let truth_match = probe.has_face && gallery.has_face && probe.label == gallery.label;
    if let Some(err) = p.error.as_ref().or(g.error.as_ref()) {
        return ComparisonRecord {
            probe: probe.path.clone(),
            gallery: gallery.path.clone(),
            detection: None,
            probe_faces: None,
            d_face: None,
            similarity_pct: None,
            predicted_match: None,
            truth_match,
            detection_cell: None,
            matching_cell: None,
            error: Some(err.clone()),
        };
    }
    let detection = DetectionOutcome::new(probe.has_face, p.faces);
    let result = match (&p.encoding, &g.encoding) {
        (Some(a), Some(b)) => Some(MatchResult::from_distance(euclidean_distance(a, b), &config.matcher)),
        _ => None,
    };
    let predicted = result.map(|r| r.is_match);
    let matching_cell = classify_matching(
        truth_match,
        predicted,
        Side { has_face: probe.has_face, detected: p.faces > 0 },
        Side { has_face: gallery.has_face, detected: g.faces > 0 },
        config.skip_rule,
    );
    if matching_cell.is_none() {
        log::debug!("skipping matching for {} vs {}: two undetected non-face images", probe.path, gallery.path);
    }
    ComparisonRecord {
        probe: probe.path.clone(),
        gallery: gallery.path.clone(),
        detection: Some(detection),
        probe_faces: Some(p.faces),
        d_face: result.map(|r| r.d_face),
        similarity_pct: result.map(|r| r.similarity_pct),
        predicted_match: predicted,
        truth_match,
        detection_cell: Some(detection.cell()),
        matching_cell,
        error: None,
    }
}

/// Runs the pipeline over every manifest image and returns one
/// precomputed-encodings record per entry, in manifest order.
pub fn encode_manifest(
    entries: &[ManifestEntry],
    pipeline: &FacePipeline,
    root: &Path,
    jobs: usize,
) -> Result<Vec<PrecomputedRecord>, EvalError> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| EvalError::ThreadPool(e.to_string()))?;
    let outcomes = pool.install(|| process_images(entries, EncodingSource::Pipeline { pipeline, root }))?;
    entries
        .iter()
        .zip(outcomes)
        .map(|(e, o)| match o.error {
            Some(message) => Err(EvalError::Engine { path: e.path.clone(), message }),
            None => Ok(PrecomputedRecord {
                id: e.path.clone(),
                provider: pipeline.provider().id().to_string(),
                vector: o.encoding,
                faces: Some(o.faces),
            }),
        })
        .collect()
}

/// Runs every comparison of [`pair_plan`] and aggregates the report.
///
/// Each image is processed once. Records come out in plan order whatever
/// the number of worker threads, so the report is deterministic.
pub fn run_eval(
    entries: &[ManifestEntry],
    source: EncodingSource<'_>,
    config: &EvalConfig,
) -> Result<Report, EvalError> {
    let plan = pair_plan(entries)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| EvalError::ThreadPool(e.to_string()))?;
    let (outcomes, records) = pool.install(|| -> Result<_, EvalError> {
        let outcomes = process_images(entries, source)?;
        let records: Vec<ComparisonRecord> = plan
            .par_iter()
            .map(|&(p, g)| compare(&entries[p], &entries[g], &outcomes[p], &outcomes[g], config))
            .collect();
        Ok((outcomes, records))
    })?;
    drop(outcomes);

    let mut matching = ConfusionCounts::default();
    let mut detection = ConfusionCounts::default();
    let (mut errored, mut skipped) = (0, 0);
    for r in &records {
        if r.error.is_some() {
            errored += 1;
            continue;
        }
        if let Some(c) = r.detection_cell {
            detection.add(c);
        }
        match r.matching_cell {
            Some(c) => matching.add(c),
            None => skipped += 1,
        }
    }
    let matching = TableReport::new(matching);
    let detection = TableReport::new(detection);
    let total_score = match (&matching.metrics, &detection.metrics) {
        (Some(m), Some(d)) => Some(total_score(m, d)),
        _ => None,
    };
    let (mode, provider) = match source {
        EncodingSource::Pipeline { pipeline, .. } => (EvalMode::Pipeline, pipeline.provider().id().to_string()),
        EncodingSource::Precomputed(set) => (EvalMode::Precomputed, set.provider.clone()),
    };
    Ok(Report {
        schema: REPORT_SCHEMA,
        mode,
        provider,
        threshold_pct: config.matcher.threshold_pct,
        d_max: config.matcher.d_max,
        skip_rule: config.skip_rule,
        images: entries.len(),
        comparisons: records.len(),
        errored,
        skipped,
        matching,
        detection,
        total_score,
        records,
    })
}
