use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use facegate::cascade::BundledCascade;
use facegate::enhanced::SweepSchedule;
use facegate::eval::SkipRule;
use facegate::pipeline::CropSource;

#[derive(Debug, Parser)]
#[command(name = "facegate", version, about = "Haar cascade face detection, matching and gate-pass identification")]
pub struct Cli {
    /// TOML file with default settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Pretty-print JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,

    /// More log output on standard error (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-pass multi-scale detection; prints all grouped detections.
    Detect(DetectArgs),
    /// Parameter sweep with center-proximity selection; prints the selected face.
    DetectEnhanced(DetectEnhancedArgs),
    /// Detect and encode faces; prints one JSON line per image.
    Encode(EncodeArgs),
    /// Compare the faces of two images.
    Match(MatchArgs),
    /// Run the pairwise evaluation over a manifest.
    Eval(EvalArgs),
    /// Add a face image to the gate-pass store.
    Enroll(EnrollArgs),
    /// Identify the face in a frame against the store.
    Identify(IdentifyArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Bundled cascade to use.
    #[arg(long, value_name = "NAME", value_parser = parse_bundled)]
    pub cascade: Option<BundledCascade>,

    /// Cascade XML file; overrides --cascade.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,

    /// Smallest face to look for, `WxH` or a single number for squares.
    #[arg(long, value_name = "SIZE", value_parser = parse_size)]
    pub min_size: Option<(u32, u32)>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `default` or a list like `1.10:10,1.05:5,1.01:1`.
    #[arg(long, value_name = "SPEC", value_parser = parse_schedule)]
    pub schedule: Option<SweepSchedule>,

    /// Radius of the central region, as a fraction of the image diagonal.
    #[arg(long, value_name = "FRACTION")]
    pub center_radius: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Enhanced,
    Baseline,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub sweep: SweepArgs,

    /// Which detector picks the face to encode.
    #[arg(long, value_enum)]
    pub detector: Option<DetectorKind>,

    /// Scale factor of the baseline detector.
    #[arg(long)]
    pub scale_factor: Option<f64>,

    /// Minimum neighbors of the baseline detector.
    #[arg(long)]
    pub min_neighbors: Option<u32>,

    /// Image the face crop is taken from: `gray-to-rgb` or `color`.
    #[arg(long, value_name = "SOURCE", value_parser = parse_crop)]
    pub crop: Option<CropSource>,
}

#[derive(Debug, Args)]
pub struct MatcherArgs {
    /// Similarity percentage needed for a match.
    #[arg(long, value_name = "PCT")]
    pub threshold: Option<f64>,

    /// Distance mapped to 25 % similarity.
    #[arg(long, value_name = "D")]
    pub d_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub image: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[arg(long)]
    pub scale_factor: Option<f64>,

    #[arg(long)]
    pub min_neighbors: Option<u32>,
}

#[derive(Debug, Args)]
pub struct DetectEnhancedArgs {
    pub image: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Images to encode.
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub images: Vec<PathBuf>,

    /// Encode every image of a manifest; ids are the manifest paths.
    #[arg(long, value_name = "CSV")]
    pub manifest: Option<PathBuf>,

    /// Worker threads (0 = one per core).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    pub first: PathBuf,
    pub second: PathBuf,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[command(flatten)]
    pub matcher: MatcherArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// CSV manifest with `path,label,has_face`; image paths are relative to it.
    #[arg(long, value_name = "CSV")]
    pub manifest: PathBuf,

    /// Precomputed encodings (JSON lines) instead of running the pipeline.
    #[arg(long, value_name = "JSONL")]
    pub encodings: Option<PathBuf>,

    /// Write the JSON report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,

    /// Also write counts and metrics as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,

    /// Which pairs the matching table leaves out.
    #[arg(long, value_name = "RULE", value_parser = parse_skip_rule)]
    pub skip_rule: Option<SkipRule>,

    /// Worker threads (0 = one per core).
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[command(flatten)]
    pub matcher: MatcherArgs,
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Store file (JSON lines).
    #[arg(long, value_name = "FILE")]
    pub store: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    pub image: PathBuf,

    /// Display name of the person.
    #[arg(long)]
    pub name: String,

    /// Existing or new person id; a fresh one is assigned when omitted.
    #[arg(long)]
    pub id: Option<String>,

    /// Extra information as `key=value`; may be repeated.
    #[arg(long, value_name = "KEY=VALUE", value_parser = parse_key_value)]
    pub info: Vec<(String, String)>,

    #[command(flatten)]
    pub store: StoreArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    pub image: PathBuf,

    /// Label recorded in alerts; defaults to the image path.
    #[arg(long)]
    pub frame_ref: Option<String>,

    /// Alert log; defaults to `<store>.alerts.jsonl`.
    #[arg(long, value_name = "FILE")]
    pub alert_log: Option<PathBuf>,

    /// URL that receives each alert as a JSON POST.
    #[arg(long, value_name = "URL", env = "GATEPASS_ALERT_URL")]
    pub alert_url: Option<String>,

    #[command(flatten)]
    pub store: StoreArgs,

    #[command(flatten)]
    pub pipeline: PipelineArgs,

    #[command(flatten)]
    pub matcher: MatcherArgs,
}

pub fn parse_bundled(s: &str) -> Result<BundledCascade, String> {
    s.parse()
}

pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let num = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("invalid size {s:?} (expected WxH or N)"));
    match s.split_once(['x', 'X']) {
        Some((w, h)) => Ok((num(w)?, num(h)?)),
        None => num(s).map(|n| (n, n)),
    }
}

pub fn parse_schedule(s: &str) -> Result<SweepSchedule, String> {
    s.parse().map_err(|e: facegate::enhanced::ScheduleError| e.to_string())
}

pub fn parse_crop(s: &str) -> Result<CropSource, String> {
    s.parse()
}

pub fn parse_skip_rule(s: &str) -> Result<SkipRule, String> {
    s.parse()
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(format!("expected KEY=VALUE, got {s:?}")),
    }
}
