use std::collections::BTreeMap;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::Utc;
use facegate::detector::{detect_multiscale, DetectParams, Detection};
use facegate::encoding::match_encodings;
use facegate::enhanced::detect_enhanced;
use facegate::eval::{
    encode_manifest, load_manifest, run_eval, EncodingSource, EvalConfig, ManifestEntry, PrecomputedEncodings,
};
use facegate::imageio::{decode_netpbm, to_grayscale, RgbImage};
use facegate::registry::{AlertReason, AlertSink, EnrollRequest, IdentificationResult, Registry};
use serde::Serialize;

use crate::cli::{DetectArgs, DetectEnhancedArgs, EncodeArgs, EnrollArgs, EvalArgs, IdentifyArgs, MatchArgs};
use crate::config::{self, FileConfig};

/// Shared state of one invocation.
pub struct Ctx {
    pub file: FileConfig,
    pub pretty: bool,
}

impl Ctx {
    fn print<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = if self.pretty { serde_json::to_string_pretty(value) } else { serde_json::to_string(value) }?;
        let mut out = std::io::stdout().lock();
        writeln!(out, "{text}")?;
        out.flush()?;
        Ok(())
    }
}

fn read_image(path: &Path) -> Result<RgbImage> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read image {}", path.display()))?;
    let img = decode_netpbm(&bytes).with_context(|| format!("cannot decode image {}", path.display()))?;
    Ok(img.into_rgb())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RectOut {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    neighbors: u32,
}

impl From<&Detection> for RectOut {
    fn from(d: &Detection) -> Self {
        RectOut { x: d.rect.x, y: d.rect.y, w: d.rect.w, h: d.rect.h, neighbors: d.neighbors }
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DetectOut {
    image: String,
    cascade: String,
    scale_factor: f64,
    min_neighbors: u32,
    min_size: [u32; 2],
    detections: Vec<RectOut>,
}

pub fn detect(ctx: &Ctx, args: &DetectArgs) -> Result<()> {
    let model = config::model_settings(&args.model, &ctx.file)?;
    let (scale_factor, min_neighbors) = config::baseline_params(args.scale_factor, args.min_neighbors, &ctx.file);
    let params =
        DetectParams::new(scale_factor, min_neighbors, model.min_size).map_err(|e| config::usage(e.to_string()))?;
    let cascade = model.source.load()?;
    let gray = to_grayscale(&read_image(&args.image)?);
    let dets = detect_multiscale(&cascade, &gray, &params)?;
    log::info!("{}: {} detection(s)", args.image.display(), dets.len());
    ctx.print(&DetectOut {
        image: args.image.display().to_string(),
        cascade: model.source.describe(),
        scale_factor,
        min_neighbors,
        min_size: [model.min_size.0, model.min_size.1],
        detections: dets.iter().map(RectOut::from).collect(),
    })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FaceOut {
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    dist_to_center: f64,
    used_params: String,
    candidates_at_stop: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DetectEnhancedOut {
    image: String,
    cascade: String,
    face: Option<FaceOut>,
    passes_run: usize,
    detections: Vec<RectOut>,
}

pub fn detect_enhanced_cmd(ctx: &Ctx, args: &DetectEnhancedArgs) -> Result<()> {
    let model = config::model_settings(&args.model, &ctx.file)?;
    let (schedule, policy) = config::sweep_settings(&args.sweep, &ctx.file)?;
    let cascade = model.source.load()?;
    let gray = to_grayscale(&read_image(&args.image)?);
    let out = detect_enhanced(&cascade, &gray, &schedule, &policy, model.min_size)?;
    match &out.selected {
        Some(f) => log::info!("{}: face at pass {} ({})", args.image.display(), out.passes_run, f.used_params),
        None => log::info!("{}: no face after {} passes", args.image.display(), out.passes_run),
    }
    ctx.print(&DetectEnhancedOut {
        image: args.image.display().to_string(),
        cascade: model.source.describe(),
        face: out.selected.map(|f| FaceOut {
            x: f.rect.x,
            y: f.rect.y,
            w: f.rect.w,
            h: f.rect.h,
            dist_to_center: f.dist_to_center,
            used_params: f.used_params.to_string(),
            candidates_at_stop: f.candidates_at_stop,
        }),
        passes_run: out.passes_run,
        detections: out.stopping_detections.iter().map(RectOut::from).collect(),
    })
}

pub fn encode(ctx: &Ctx, args: &EncodeArgs) -> Result<()> {
    let settings = config::pipeline_settings(&args.pipeline, &ctx.file)?;
    let pipeline = settings.build()?;
    let (entries, root) = match &args.manifest {
        Some(m) => (read_manifest(m)?, manifest_root(m)),
        None => {
            let entries = args
                .images
                .iter()
                .map(|p| ManifestEntry { path: p.display().to_string(), label: String::new(), has_face: false })
                .collect();
            (entries, PathBuf::new())
        }
    };
    let records = encode_manifest(&entries, &pipeline, &root, config::jobs(args.jobs, &ctx.file))?;
    for rec in &records {
        // One record per line, even with --pretty.
        println!("{}", serde_json::to_string(rec)?);
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct MatchOut {
    d_face: f64,
    similarity_pct: f64,
    #[serde(rename = "match")]
    is_match: bool,
    provider: String,
}

pub fn match_cmd(ctx: &Ctx, args: &MatchArgs) -> Result<()> {
    let settings = config::pipeline_settings(&args.pipeline, &ctx.file)?;
    let matcher = config::matcher_settings(&args.matcher, &ctx.file)?;
    let pipeline = settings.build()?;
    let encode = |path: &Path| -> Result<_> {
        let (face, enc) =
            pipeline.encode(&read_image(path)?)?.ok_or_else(|| anyhow!("no face found in {}", path.display()))?;
        log::info!("{}: face {:?} at {}", path.display(), face.rect, face.used_params);
        Ok(enc)
    };
    let a = encode(&args.first)?;
    let b = encode(&args.second)?;
    let m = match_encodings(&a, &b, &matcher);
    ctx.print(&MatchOut {
        d_face: m.d_face,
        similarity_pct: m.similarity_pct,
        is_match: m.is_match,
        provider: pipeline.provider().id().to_string(),
    })
}

fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
    load_manifest(&bytes).with_context(|| format!("manifest {}", path.display()))
}

fn manifest_root(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn eval(ctx: &Ctx, args: &EvalArgs) -> Result<()> {
    let config = EvalConfig {
        matcher: config::matcher_settings(&args.matcher, &ctx.file)?,
        skip_rule: config::skip_rule(args.skip_rule, &ctx.file)?,
        jobs: config::jobs(args.jobs, &ctx.file),
    };
    let entries = read_manifest(&args.manifest)?;
    let report = match &args.encodings {
        Some(path) => {
            let file =
                std::fs::File::open(path).with_context(|| format!("cannot open encodings {}", path.display()))?;
            let set = PrecomputedEncodings::from_reader(BufReader::new(file))
                .with_context(|| format!("encodings {}", path.display()))?;
            run_eval(&entries, EncodingSource::Precomputed(&set), &config)?
        }
        None => {
            let pipeline = config::pipeline_settings(&args.pipeline, &ctx.file)?.build()?;
            let root = manifest_root(&args.manifest);
            run_eval(&entries, EncodingSource::Pipeline { pipeline: &pipeline, root: &root }, &config)?
        }
    };
    log::info!(
        "{} images, {} comparisons, {} skipped, {} errored",
        report.images,
        report.comparisons,
        report.skipped,
        report.errored
    );
    if let Some(csv) = &args.csv {
        std::fs::write(csv, report.to_csv()).with_context(|| format!("cannot write {}", csv.display()))?;
    }
    match &args.out {
        Some(out) => {
            let mut text = report.to_json(ctx.pretty);
            text.push('\n');
            std::fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
        }
        None => println!("{}", report.to_json(ctx.pretty)),
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct EnrollOut<'a> {
    person_id: &'a str,
    display_name: &'a str,
    info: &'a BTreeMap<String, String>,
    encodings: usize,
    provider: &'a str,
}

pub fn enroll(ctx: &Ctx, args: &EnrollArgs) -> Result<()> {
    let pipeline = config::pipeline_settings(&args.pipeline, &ctx.file)?.build()?;
    let store = config::store_path(args.store.store.as_deref(), &ctx.file);
    let mut registry = Registry::open(&store)?;
    let image = read_image(&args.image)?;
    let request = EnrollRequest {
        person_id: args.id.clone(),
        display_name: args.name.clone(),
        info: args.info.iter().cloned().collect(),
    };
    let person = registry.enroll(&pipeline, request, &image, Utc::now())?;
    log::info!("enrolled {} into {}", person.person_id, store.display());
    ctx.print(&EnrollOut {
        person_id: &person.person_id,
        display_name: &person.display_name,
        info: &person.info,
        encodings: person.encodings.len(),
        provider: &person.provider,
    })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct IdentifyOut {
    #[serde(flatten)]
    result: IdentificationResult,
    display_name: Option<String>,
    alert: Option<AlertReason>,
}

pub fn identify(ctx: &Ctx, args: &IdentifyArgs) -> Result<()> {
    let pipeline = config::pipeline_settings(&args.pipeline, &ctx.file)?.build()?;
    let matcher = config::matcher_settings(&args.matcher, &ctx.file)?;
    let store = config::store_path(args.store.store.as_deref(), &ctx.file);
    if !store.exists() {
        bail!("store {} does not exist; enroll someone first", store.display());
    }
    let registry = Registry::open(&store)?;
    let frame = read_image(&args.image)?;
    let frame_ref = args.frame_ref.clone().unwrap_or_else(|| args.image.display().to_string());
    let id = registry.identify(&pipeline, &frame, &matcher, &frame_ref, Utc::now())?;
    if let Some(alert) = &id.alert {
        let log_path = args
            .alert_log
            .clone()
            .or_else(|| ctx.file.alert_log.clone())
            .unwrap_or_else(|| store.with_extension("alerts.jsonl"));
        let url = args.alert_url.clone().or_else(|| ctx.file.alert_url.clone());
        let sink = AlertSink::new(log_path, url);
        let failures = sink.emit(alert);
        log::warn!("alert for {frame_ref}: {:?} ({} delivery failure(s))", alert.reason, failures.len());
    }
    let display_name = match id.result.status {
        facegate::registry::IdentificationStatus::Recognized => {
            id.result.person_id.as_deref().and_then(|p| registry.get(p)).map(|p| p.display_name.clone())
        }
        _ => None,
    };
    ctx.print(&IdentifyOut { result: id.result, display_name, alert: id.alert.map(|a| a.reason) })
}
