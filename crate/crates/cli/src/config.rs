use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use facegate::cascade::{parse_cascade_xml, BundledCascade, CascadeModel};
use facegate::encoding::{MatcherConfig, ReferenceEmbedder};
use facegate::enhanced::{SelectionPolicy, SweepSchedule};
use facegate::eval::SkipRule;
use facegate::pipeline::{CropSource, DetectorMode, FacePipeline, PipelineConfig};
use serde::Deserialize;

use crate::cli::{self, DetectorKind, MatcherArgs, ModelArgs, PipelineArgs, SweepArgs};

/// A bad setting, from a flag or the config file. Exits with status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Contents of the optional TOML config file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub cascade: Option<String>,
    pub model: Option<PathBuf>,
    pub min_size: Option<String>,
    pub schedule: Option<String>,
    pub center_radius: Option<f64>,
    pub detector: Option<DetectorKind>,
    pub scale_factor: Option<f64>,
    pub min_neighbors: Option<u32>,
    pub crop: Option<String>,
    pub threshold: Option<f64>,
    pub d_max: Option<f64>,
    pub skip_rule: Option<String>,
    pub jobs: Option<usize>,
    pub store: Option<PathBuf>,
    pub alert_log: Option<PathBuf>,
    pub alert_url: Option<String>,
    pub pretty: Option<bool>,
}

impl FileConfig {
    /// Reads the file; relative paths inside it are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config file {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| usage(format!("config file {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.model, &mut cfg.store, &mut cfg.alert_log].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

fn from_file<T>(value: &Option<String>, parse: fn(&str) -> Result<T, String>, key: &str) -> Result<Option<T>> {
    value.as_deref().map(parse).transpose().map_err(|e| usage(format!("config key {key}: {e}")))
}

/// Where the cascade comes from.
#[derive(Debug, Clone)]
pub enum ModelSource {
    Bundled(BundledCascade),
    File(PathBuf),
}

impl ModelSource {
    pub fn describe(&self) -> String {
        match self {
            ModelSource::Bundled(b) => b.name().to_string(),
            ModelSource::File(p) => p.display().to_string(),
        }
    }

    /// Loads the cascade; a missing or malformed model is a data error.
    pub fn load(&self) -> Result<CascadeModel> {
        match self {
            ModelSource::Bundled(b) => b.load().with_context(|| format!("bundled cascade {}", b.name())),
            ModelSource::File(p) => {
                let bytes = std::fs::read(p).with_context(|| format!("cannot read cascade {}", p.display()))?;
                parse_cascade_xml(&bytes).with_context(|| format!("cascade {}", p.display()))
            }
        }
    }
}

pub struct ModelSettings {
    pub source: ModelSource,
    pub min_size: (u32, u32),
}

pub fn model_settings(args: &ModelArgs, file: &FileConfig) -> Result<ModelSettings> {
    let source = match (&args.model, args.cascade, &file.model) {
        (Some(p), _, _) => ModelSource::File(p.clone()),
        (None, Some(b), _) => ModelSource::Bundled(b),
        (None, None, Some(p)) => ModelSource::File(p.clone()),
        (None, None, None) => {
            ModelSource::Bundled(from_file(&file.cascade, cli::parse_bundled, "cascade")?.unwrap_or_default())
        }
    };
    let min_size = pick(args.min_size, from_file(&file.min_size, cli::parse_size, "min-size")?, (30, 30));
    if min_size.0 == 0 || min_size.1 == 0 {
        return Err(usage("--min-size must be positive"));
    }
    Ok(ModelSettings { source, min_size })
}

pub fn sweep_settings(args: &SweepArgs, file: &FileConfig) -> Result<(SweepSchedule, SelectionPolicy)> {
    let schedule = match &args.schedule {
        Some(s) => s.clone(),
        None => from_file(&file.schedule, cli::parse_schedule, "schedule")?.unwrap_or_default(),
    };
    let fraction = pick(args.center_radius, file.center_radius, SelectionPolicy::DEFAULT_FRACTION);
    let policy = SelectionPolicy::new(fraction).map_err(|e| usage(format!("--center-radius: {e}")))?;
    Ok((schedule, policy))
}

pub fn baseline_params(scale_factor: Option<f64>, min_neighbors: Option<u32>, file: &FileConfig) -> (f64, u32) {
    (pick(scale_factor, file.scale_factor, 1.1), pick(min_neighbors, file.min_neighbors, 3))
}

pub struct PipelineSettings {
    pub model: ModelSettings,
    pub config: PipelineConfig,
}

impl PipelineSettings {
    pub fn build(&self) -> Result<FacePipeline> {
        let model = self.model.source.load()?;
        Ok(FacePipeline::new(Arc::new(model), Arc::new(ReferenceEmbedder), self.config.clone()))
    }
}

pub fn pipeline_settings(args: &PipelineArgs, file: &FileConfig) -> Result<PipelineSettings> {
    let model = model_settings(&args.model, file)?;
    let detector = match pick(args.detector, file.detector, DetectorKind::Enhanced) {
        DetectorKind::Enhanced => {
            let (schedule, policy) = sweep_settings(&args.sweep, file)?;
            DetectorMode::Enhanced { schedule, policy }
        }
        DetectorKind::Baseline => {
            let (scale_factor, min_neighbors) = baseline_params(args.scale_factor, args.min_neighbors, file);
            facegate::detector::DetectParams::new(scale_factor, min_neighbors, model.min_size)
                .map_err(|e| usage(e.to_string()))?;
            DetectorMode::Baseline { scale_factor, min_neighbors }
        }
    };
    let crop_source = match args.crop {
        Some(c) => c,
        None => from_file(&file.crop, cli::parse_crop, "crop")?.unwrap_or(CropSource::GrayToRgb),
    };
    let config = PipelineConfig { detector, min_size: model.min_size, crop_source };
    Ok(PipelineSettings { model, config })
}

pub fn matcher_settings(args: &MatcherArgs, file: &FileConfig) -> Result<MatcherConfig> {
    let d = MatcherConfig::default();
    MatcherConfig::new(pick(args.d_max, file.d_max, d.d_max), pick(args.threshold, file.threshold, d.threshold_pct))
        .map_err(|e| usage(e.to_string()))
}

pub fn skip_rule(flag: Option<SkipRule>, file: &FileConfig) -> Result<SkipRule> {
    Ok(match flag {
        Some(r) => r,
        None => from_file(&file.skip_rule, cli::parse_skip_rule, "skip-rule")?.unwrap_or_default(),
    })
}

pub fn jobs(flag: Option<usize>, file: &FileConfig) -> usize {
    pick(flag, file.jobs, 0)
}

pub fn store_path(flag: Option<&Path>, file: &FileConfig) -> PathBuf {
    flag.map(Path::to_path_buf).or_else(|| file.store.clone()).unwrap_or_else(|| PathBuf::from("gatepass.jsonl"))
}
