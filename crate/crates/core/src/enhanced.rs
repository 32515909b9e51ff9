//! The adaptive detector: run detection passes from strict to relaxed
//! parameters, stop at the first pass that finds anything, and keep the
//! largest face near the image center.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::CascadeModel;
use crate::detector::{DetectError, DetectParams, Detection, Scanner, DEFAULT_GROUP_EPS};
use crate::imageio::{GrayImage, Rect};
use crate::integral::integral;

/// One pass of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStep {
    pub scale_factor: f64,
    pub min_neighbors: u32,
}

impl fmt::Display for SweepStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}/{}", self.scale_factor, self.min_neighbors)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("a sweep schedule needs at least one step")]
    Empty,
    #[error("step {0}: scale factor must be finite and greater than 1")]
    ScaleFactor(usize),
    #[error("step {0}: scale factors must strictly decrease")]
    NotDecreasing(usize),
    #[error("step {0}: min neighbors must not increase")]
    NeighborsIncrease(usize),
    #[error("cannot parse schedule step {0:?}, expected SCALE:NEIGHBORS")]
    Syntax(String),
}

/// Ordered detection passes, strictest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SweepStep>", into = "Vec<SweepStep>")]
pub struct SweepSchedule(Vec<SweepStep>);

impl SweepSchedule {
    pub fn new(steps: Vec<SweepStep>) -> Result<Self, ScheduleError> {
        if steps.is_empty() {
            return Err(ScheduleError::Empty);
        }
        for (i, s) in steps.iter().enumerate() {
            if !(s.scale_factor.is_finite() && s.scale_factor > 1.0) {
                return Err(ScheduleError::ScaleFactor(i));
            }
            if i > 0 {
                if s.scale_factor >= steps[i - 1].scale_factor {
                    return Err(ScheduleError::NotDecreasing(i));
                }
                if s.min_neighbors > steps[i - 1].min_neighbors {
                    return Err(ScheduleError::NeighborsIncrease(i));
                }
            }
        }
        Ok(SweepSchedule(steps))
    }

    pub fn steps(&self) -> &[SweepStep] {
        &self.0
    }
}

/// Ten lockstep passes: `(1.10, 10), (1.09, 9), ..., (1.01, 1)`.
pub fn default_schedule() -> SweepSchedule {
    SweepSchedule(
        (0..10u32).map(|i| SweepStep { scale_factor: (110 - i) as f64 / 100.0, min_neighbors: 10 - i }).collect(),
    )
}

impl Default for SweepSchedule {
    fn default() -> Self {
        default_schedule()
    }
}

impl TryFrom<Vec<SweepStep>> for SweepSchedule {
    type Error = ScheduleError;

    fn try_from(v: Vec<SweepStep>) -> Result<Self, Self::Error> {
        SweepSchedule::new(v)
    }
}

impl From<SweepSchedule> for Vec<SweepStep> {
    fn from(s: SweepSchedule) -> Self {
        s.0
    }
}

/// Parses `default` or a comma-separated list like `1.10:10,1.05:5,1.01:1`.
impl FromStr for SweepSchedule {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "default" {
            return Ok(default_schedule());
        }
        let steps = s
            .split(',')
            .map(|part| {
                let part = part.trim();
                let (sf, mn) = part.split_once(':').ok_or_else(|| ScheduleError::Syntax(part.into()))?;
                Ok(SweepStep {
                    scale_factor: sf.trim().parse().map_err(|_| ScheduleError::Syntax(part.into()))?,
                    min_neighbors: mn.trim().parse().map_err(|_| ScheduleError::Syntax(part.into()))?,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        SweepSchedule::new(steps)
    }
}

impl fmt::Display for SweepSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}", s.scale_factor, s.min_neighbors)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("center radius fraction must lie in (0, 1], got {0}")]
pub struct PolicyError(pub f64);

/// How "near the center" is measured: a radius expressed as a fraction of the image diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionPolicy {
    center_radius_fraction: f64,
}

impl SelectionPolicy {
    pub const DEFAULT_FRACTION: f64 = 0.25;

    pub fn new(center_radius_fraction: f64) -> Result<Self, PolicyError> {
        if center_radius_fraction > 0.0 && center_radius_fraction <= 1.0 {
            Ok(SelectionPolicy { center_radius_fraction })
        } else {
            Err(PolicyError(center_radius_fraction))
        }
    }

    pub fn center_radius_fraction(&self) -> f64 {
        self.center_radius_fraction
    }
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy { center_radius_fraction: Self::DEFAULT_FRACTION }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedFace {
    pub rect: Rect,
    pub dist_to_center: f64,
    pub used_params: SweepStep,
    /// Grouped detections in the pass that produced this face.
    pub candidates_at_stop: usize,
}

fn dist_to_center(r: &Rect, img_w: u32, img_h: u32) -> f64 {
    let (cx, cy) = r.center();
    (cx - img_w as f64 / 2.0).hypot(cy - img_h as f64 / 2.0)
}

/// Picks one detection.
///
/// Detections whose center lies within `fraction * diagonal` of the image
/// center compete on area (ties: closer to center, then row-major). If none
/// is that close, the detection closest to the center wins (ties: larger
/// area, then row-major). The result does not depend on input order.
pub fn select_face(dets: &[Detection], img_w: u32, img_h: u32, policy: &SelectionPolicy) -> Option<(Detection, f64)> {
    let radius = policy.center_radius_fraction * (img_w as f64).hypot(img_h as f64);
    let scored = dets.iter().map(|d| (*d, dist_to_center(&d.rect, img_w, img_h)));
    let row_major = |a: &Detection, b: &Detection| {
        (a.rect.y, a.rect.x, a.rect.w, a.rect.h, a.neighbors).cmp(&(
            b.rect.y,
            b.rect.x,
            b.rect.w,
            b.rect.h,
            b.neighbors,
        ))
    };
    let near: Vec<_> = scored.clone().filter(|(_, d)| *d <= radius).collect();
    if !near.is_empty() {
        near.into_iter()
            .min_by(|(a, da), (b, db)| b.rect.area().cmp(&a.rect.area()).then(da.total_cmp(db)).then(row_major(a, b)))
    } else {
        scored.min_by(|(a, da), (b, db)| da.total_cmp(db).then(b.rect.area().cmp(&a.rect.area())).then(row_major(a, b)))
    }
}

/// Everything the sweep observed.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancedOutcome {
    pub selected: Option<SelectedFace>,
    /// All grouped detections of the stopping pass (empty if no pass found anything).
    pub stopping_detections: Vec<Detection>,
    pub passes_run: usize,
}

/// Runs the sweep. See [`detect_enhanced_observed`].
pub fn detect_enhanced(
    model: &CascadeModel,
    img: &GrayImage,
    schedule: &SweepSchedule,
    policy: &SelectionPolicy,
    min_size: (u32, u32),
) -> Result<EnhancedOutcome, DetectError> {
    detect_enhanced_observed(model, img, schedule, policy, min_size, |_, _, _| {})
}

/// Runs each schedule step in order as a full [`crate::detector::detect_multiscale`] pass
/// and stops at the first pass with at least one detection, applying
/// [`select_face`] to it. `observe` sees every executed pass.
pub fn detect_enhanced_observed(
    model: &CascadeModel,
    img: &GrayImage,
    schedule: &SweepSchedule,
    policy: &SelectionPolicy,
    min_size: (u32, u32),
    mut observe: impl FnMut(usize, &SweepStep, &[Detection]),
) -> Result<EnhancedOutcome, DetectError> {
    let ii = integral(img);
    let mut scanner = Scanner::new(model, &ii);
    for (i, step) in schedule.steps().iter().enumerate() {
        let params = DetectParams {
            scale_factor: step.scale_factor,
            min_neighbors: step.min_neighbors,
            min_size,
            group_eps: DEFAULT_GROUP_EPS,
        };
        params.validate()?;
        let dets = scanner.detect(&params);
        observe(i, step, &dets);
        if let Some((det, dist)) = select_face(&dets, img.width(), img.height(), policy) {
            return Ok(EnhancedOutcome {
                selected: Some(SelectedFace {
                    rect: det.rect,
                    dist_to_center: dist,
                    used_params: *step,
                    candidates_at_stop: dets.len(),
                }),
                stopping_detections: dets,
                passes_run: i + 1,
            });
        }
    }
    Ok(EnhancedOutcome { selected: None, stopping_detections: Vec::new(), passes_run: schedule.steps().len() })
}
