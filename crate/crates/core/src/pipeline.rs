//! Detect-then-encode: grayscale conversion, face detection, cropping and
//! embedding.
//!
//! By default the crop is taken from the grayscale frame replicated back to
//! three channels ([`CropSource::GrayToRgb`]); [`CropSource::Color`] crops the
//! original color frame instead. Both use the same rectangle.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cascade::CascadeModel;
use crate::detector::{detect_multiscale, DetectError, DetectParams, Detection};
use crate::encoding::{EmbeddingProvider, FaceEncoding};
use crate::enhanced::{detect_enhanced, SelectedFace, SelectionPolicy, SweepSchedule, SweepStep};
use crate::imageio::{crop, gray_to_rgb, to_grayscale, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CropSource {
    #[default]
    GrayToRgb,
    Color,
}

impl FromStr for CropSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gray-to-rgb" | "gray" => Ok(CropSource::GrayToRgb),
            "color" => Ok(CropSource::Color),
            other => Err(format!("unknown crop source {other:?} (expected gray-to-rgb or color)")),
        }
    }
}

impl fmt::Display for CropSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CropSource::GrayToRgb => "gray-to-rgb",
            CropSource::Color => "color",
        })
    }
}

/// Which detector produces the face rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DetectorMode {
    /// Parameter sweep plus center-proximity selection.
    Enhanced { schedule: SweepSchedule, policy: SelectionPolicy },
    /// One fixed pass; the first (largest) detection is used.
    Baseline { scale_factor: f64, min_neighbors: u32 },
}

impl Default for DetectorMode {
    fn default() -> Self {
        DetectorMode::Enhanced { schedule: SweepSchedule::default(), policy: SelectionPolicy::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub detector: DetectorMode,
    pub min_size: (u32, u32),
    pub crop_source: CropSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { detector: DetectorMode::default(), min_size: (30, 30), crop_source: CropSource::default() }
    }
}

/// Detection and encoding for one frame.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub selected: Option<SelectedFace>,
    /// Grouped detections of the pass that decided the outcome.
    pub detections: Vec<Detection>,
    pub passes_run: usize,
    pub encoding: Option<FaceEncoding>,
}

/// A cascade, an embedding provider and the settings that connect them.
#[derive(Clone)]
pub struct FacePipeline {
    model: Arc<CascadeModel>,
    provider: Arc<dyn EmbeddingProvider>,
    config: PipelineConfig,
}

impl fmt::Debug for FacePipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FacePipeline")
            .field("provider", &self.provider.id())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl FacePipeline {
    pub fn new(model: Arc<CascadeModel>, provider: Arc<dyn EmbeddingProvider>, config: PipelineConfig) -> Self {
        FacePipeline { model, provider, config }
    }

    pub fn model(&self) -> &CascadeModel {
        &self.model
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        &*self.provider
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn run(&self, frame: &RgbImage) -> Result<PipelineOutput, DetectError> {
        let gray = to_grayscale(frame);
        let (selected, detections, passes_run) = match &self.config.detector {
            DetectorMode::Enhanced { schedule, policy } => {
                let out = detect_enhanced(&self.model, &gray, schedule, policy, self.config.min_size)?;
                (out.selected, out.stopping_detections, out.passes_run)
            }
            DetectorMode::Baseline { scale_factor, min_neighbors } => {
                let params = DetectParams::new(*scale_factor, *min_neighbors, self.config.min_size)?;
                let dets = detect_multiscale(&self.model, &gray, &params)?;
                let selected = dets.first().map(|d| {
                    let (cx, cy) = d.rect.center();
                    SelectedFace {
                        rect: d.rect,
                        dist_to_center: (cx - gray.width() as f64 / 2.0).hypot(cy - gray.height() as f64 / 2.0),
                        used_params: SweepStep { scale_factor: *scale_factor, min_neighbors: *min_neighbors },
                        candidates_at_stop: dets.len(),
                    }
                });
                (selected, dets, 1)
            }
        };
        let encoding = match &selected {
            Some(face) => {
                let source = match self.config.crop_source {
                    CropSource::GrayToRgb => gray_to_rgb(&gray),
                    CropSource::Color => frame.clone(),
                };
                let face_crop = crop(&source, face.rect).expect("detections lie inside the frame");
                Some(self.provider.embed(&face_crop))
            }
            None => None,
        };
        Ok(PipelineOutput { selected, detections, passes_run, encoding })
    }

    /// The selected face and its encoding, or `None` when no face was found.
    pub fn encode(&self, frame: &RgbImage) -> Result<Option<(SelectedFace, FaceEncoding)>, DetectError> {
        let out = self.run(frame)?;
        Ok(out.selected.zip(out.encoding))
    }
}

/// Function form of [`FacePipeline::encode`] for the enhanced detector.
pub fn encode_pipeline(
    model: &CascadeModel,
    frame: &RgbImage,
    provider: &dyn EmbeddingProvider,
    schedule: &SweepSchedule,
    policy: &SelectionPolicy,
    min_size: (u32, u32),
    crop_source: CropSource,
) -> Result<Option<(SelectedFace, FaceEncoding)>, DetectError> {
    let gray = to_grayscale(frame);
    let out = detect_enhanced(model, &gray, schedule, policy, min_size)?;
    let Some(face) = out.selected else { return Ok(None) };
    let source = match crop_source {
        CropSource::GrayToRgb => gray_to_rgb(&gray),
        CropSource::Color => frame.clone(),
    };
    let face_crop = crop(&source, face.rect).expect("detections lie inside the frame");
    Ok(Some((face, provider.embed(&face_crop))))
}
