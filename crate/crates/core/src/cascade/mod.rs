//! Haar cascade models: the in-memory representation and a parser for the
//! stump-based cascade XML schema shipped with mainstream CV tooling.
//!
//! Only depth-1 trees (stumps) over upright features are supported. Old-style
//! `opencv-haar-classifier` files, multi-node trees, tilted features and LBP
//! cascades are rejected with a located [`CascadeError`].

mod xml;

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::imageio::Rect;

/// One rectangle of a Haar feature, relative to the model window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedRect {
    pub rect: Rect,
    pub weight: f64,
}

/// A Haar-like feature made of two or three weighted rectangles.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarFeature {
    rects: Vec<WeightedRect>,
}

impl HaarFeature {
    pub fn new(rects: Vec<WeightedRect>) -> Result<Self, ModelError> {
        if !(2..=3).contains(&rects.len()) {
            return Err(ModelError::RectCount(rects.len()));
        }
        Ok(HaarFeature { rects })
    }

    pub fn rects(&self) -> &[WeightedRect] {
        &self.rects
    }
}

/// Depth-1 decision tree over one feature: `left` when the normalized feature
/// value is below `threshold * std`, `right` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakStump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub threshold: f64,
    pub stumps: Vec<WeakStump>,
}

/// Violations of the structural invariants of a cascade.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model window must be at least 4x4, got {0}x{1}")]
    WindowTooSmall(u32, u32),
    #[error("cascade has no stages")]
    NoStages,
    #[error("stage {0} has no weak classifiers")]
    EmptyStage(usize),
    #[error("a feature must have 2 or 3 rectangles, got {0}")]
    RectCount(usize),
    #[error("feature {feature} rectangle {rect} lies outside the {window_w}x{window_h} window")]
    RectOutsideWindow { feature: usize, rect: Rect, window_w: u32, window_h: u32 },
    #[error("stage {stage} classifier {stump} refers to feature {index}, but only {count} exist")]
    FeatureIndex { stage: usize, stump: usize, index: usize, count: usize },
    #[error("non-finite threshold or leaf value in stage {0}")]
    NonFinite(usize),
}

/// A parsed, validated cascade. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    window_w: u32,
    window_h: u32,
    features: Vec<HaarFeature>,
    stages: Vec<Stage>,
}

impl CascadeModel {
    pub fn new(
        window_w: u32,
        window_h: u32,
        features: Vec<HaarFeature>,
        stages: Vec<Stage>,
    ) -> Result<Self, ModelError> {
        if window_w < 4 || window_h < 4 {
            return Err(ModelError::WindowTooSmall(window_w, window_h));
        }
        if stages.is_empty() {
            return Err(ModelError::NoStages);
        }
        for (fi, f) in features.iter().enumerate() {
            for r in f.rects() {
                if !r.rect.fits_within(window_w, window_h) || !r.weight.is_finite() {
                    return Err(ModelError::RectOutsideWindow { feature: fi, rect: r.rect, window_w, window_h });
                }
            }
        }
        for (si, stage) in stages.iter().enumerate() {
            if stage.stumps.is_empty() {
                return Err(ModelError::EmptyStage(si));
            }
            if !stage.threshold.is_finite() {
                return Err(ModelError::NonFinite(si));
            }
            for (ti, s) in stage.stumps.iter().enumerate() {
                if s.feature >= features.len() {
                    return Err(ModelError::FeatureIndex {
                        stage: si,
                        stump: ti,
                        index: s.feature,
                        count: features.len(),
                    });
                }
                if !(s.threshold.is_finite() && s.left.is_finite() && s.right.is_finite()) {
                    return Err(ModelError::NonFinite(si));
                }
            }
        }
        Ok(CascadeModel { window_w, window_h, features, stages })
    }

    pub fn window_w(&self) -> u32 {
        self.window_w
    }

    pub fn window_h(&self) -> u32 {
        self.window_h
    }

    pub fn features(&self) -> &[HaarFeature] {
        &self.features
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stump_count(&self) -> usize {
        self.stages.iter().map(|s| s.stumps.len()).sum()
    }

    /// Serializes to the canonical cascade XML layout accepted by
    /// [`parse_cascade_xml`]. Reals use the shortest representation that
    /// round-trips, so parsing the output reproduces `self` exactly.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\"?>\n<opencv_storage>\n");
        out.push_str("<cascade type_id=\"opencv-cascade-classifier\">\n");
        out.push_str("  <stageType>BOOST</stageType>\n  <featureType>HAAR</featureType>\n");
        let _ = writeln!(out, "  <height>{}</height>\n  <width>{}</width>", self.window_h, self.window_w);
        let _ = writeln!(out, "  <stageNum>{}</stageNum>\n  <stages>", self.stages.len());
        for stage in &self.stages {
            out.push_str("    <_>\n");
            let _ = writeln!(out, "      <maxWeakCount>{}</maxWeakCount>", stage.stumps.len());
            let _ = writeln!(out, "      <stageThreshold>{:e}</stageThreshold>", stage.threshold);
            out.push_str("      <weakClassifiers>\n");
            for s in &stage.stumps {
                let _ = writeln!(
                    out,
                    "        <_>\n          <internalNodes>0 -1 {} {:e}</internalNodes>\n          <leafValues>{:e} {:e}</leafValues></_>",
                    s.feature, s.threshold, s.left, s.right
                );
            }
            out.push_str("      </weakClassifiers></_>\n");
        }
        out.push_str("  </stages>\n  <features>\n");
        for f in &self.features {
            out.push_str("    <_>\n      <rects>\n");
            for r in f.rects() {
                let _ =
                    writeln!(out, "        <_>{} {} {} {} {:e}</_>", r.rect.x, r.rect.y, r.rect.w, r.rect.h, r.weight);
            }
            out.push_str("      </rects></_>\n");
        }
        out.push_str("  </features>\n</cascade>\n</opencv_storage>\n");
        out
    }
}

/// What went wrong while reading a cascade file.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CascadeErrorKind {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("missing required element <{element}> inside <{parent}>")]
    MissingElement { element: String, parent: String },
    #[error("invalid content in <{element}>: {reason}")]
    InvalidValue { element: String, reason: String },
    #[error("old-style haar classifier files are not supported; convert the cascade to the stump-tree format")]
    OldFormat,
    #[error("unsupported {what} {value:?}, only {expected} cascades are supported")]
    Unsupported { what: &'static str, value: String, expected: &'static str },
    #[error("stage {stage} classifier {classifier} is a tree with {nodes} internal nodes; only stumps are supported")]
    NonStumpTree { stage: usize, classifier: usize, nodes: usize },
    #[error("feature {0} is tilted; tilted features are not supported")]
    TiltedFeature(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A cascade parse failure with its position in the source file.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("cascade parse error at line {line}, column {column} (byte {offset}): {kind}")]
pub struct CascadeError {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
    pub kind: CascadeErrorKind,
}

impl CascadeError {
    fn at(src: &[u8], offset: usize, kind: CascadeErrorKind) -> Self {
        let offset = offset.min(src.len());
        let before = &src[..offset];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = offset - before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1) + 1;
        CascadeError { offset, line, column, kind }
    }
}

struct Ctx<'a> {
    src: &'a [u8],
}

impl<'a> Ctx<'a> {
    fn fail(&self, el: &xml::Element, kind: CascadeErrorKind) -> CascadeError {
        CascadeError::at(self.src, el.offset, kind)
    }

    fn child<'e>(&self, el: &'e xml::Element, name: &str) -> Result<&'e xml::Element, CascadeError> {
        el.child(name).ok_or_else(|| {
            self.fail(el, CascadeErrorKind::MissingElement { element: name.to_owned(), parent: el.name.clone() })
        })
    }

    fn invalid(&self, el: &xml::Element, reason: impl Into<String>) -> CascadeError {
        self.fail(el, CascadeErrorKind::InvalidValue { element: el.name.clone(), reason: reason.into() })
    }

    fn tokens<'e>(&self, el: &'e xml::Element) -> Vec<&'e str> {
        el.text.split_ascii_whitespace().collect()
    }

    fn real(&self, el: &xml::Element, tok: &str) -> Result<f64, CascadeError> {
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.invalid(el, format!("expected a finite real number, found {tok:?}"))),
        }
    }

    fn int(&self, el: &xml::Element, tok: &str) -> Result<i64, CascadeError> {
        tok.parse::<i64>().map_err(|_| self.invalid(el, format!("expected an integer, found {tok:?}")))
    }

    fn single_real(&self, el: &xml::Element) -> Result<f64, CascadeError> {
        match self.tokens(el).as_slice() {
            [t] => self.real(el, t),
            other => Err(self.invalid(el, format!("expected one number, found {} tokens", other.len()))),
        }
    }

    fn dimension(&self, el: &xml::Element, tok: &str) -> Result<u32, CascadeError> {
        let v = self.int(el, tok)?;
        u32::try_from(v).map_err(|_| self.invalid(el, format!("dimension {v} out of range")))
    }
}

/// Parses a stump-based Haar cascade XML document.
pub fn parse_cascade_xml(bytes: &[u8]) -> Result<CascadeModel, CascadeError> {
    let ctx = Ctx { src: bytes };
    let root = xml::parse(bytes).map_err(|e| CascadeError::at(bytes, e.offset, CascadeErrorKind::Xml(e.message)))?;
    let cascade = if root.child("stages").is_some() {
        &root
    } else {
        root.children.first().ok_or_else(|| {
            ctx.fail(&root, CascadeErrorKind::MissingElement { element: "cascade".into(), parent: root.name.clone() })
        })?
    };
    if cascade.attr("type_id") == Some("opencv-haar-classifier") {
        return Err(ctx.fail(cascade, CascadeErrorKind::OldFormat));
    }
    if let Some(st) = cascade.child("stageType") {
        if st.text.trim() != "BOOST" {
            return Err(ctx.fail(
                st,
                CascadeErrorKind::Unsupported { what: "stage type", value: st.text.trim().into(), expected: "BOOST" },
            ));
        }
    }
    if let Some(ft) = cascade.child("featureType") {
        if ft.text.trim() != "HAAR" {
            return Err(ctx.fail(
                ft,
                CascadeErrorKind::Unsupported { what: "feature type", value: ft.text.trim().into(), expected: "HAAR" },
            ));
        }
    }

    let (window_w, window_h) = match (cascade.child("width"), cascade.child("height"), cascade.child("size")) {
        (Some(w), Some(h), _) => {
            let ws = ctx.tokens(w);
            let hs = ctx.tokens(h);
            if ws.len() != 1 || hs.len() != 1 {
                return Err(ctx.invalid(w, "expected single integers for width and height"));
            }
            (ctx.dimension(w, ws[0])?, ctx.dimension(h, hs[0])?)
        }
        (_, _, Some(size)) => match ctx.tokens(size).as_slice() {
            [w, h] => (ctx.dimension(size, w)?, ctx.dimension(size, h)?),
            _ => return Err(ctx.invalid(size, "expected \"W H\"")),
        },
        (None, _, None) => return Err(ctx.child(cascade, "width").unwrap_err()),
        (Some(_), None, None) => return Err(ctx.child(cascade, "height").unwrap_err()),
    };

    let features_el = ctx.child(cascade, "features")?;
    let mut features = Vec::with_capacity(features_el.children.len());
    for (fi, f_el) in features_el.children.iter().enumerate() {
        if let Some(t) = f_el.child("tilted") {
            if t.text.trim() != "0" {
                return Err(ctx.fail(t, CascadeErrorKind::TiltedFeature(fi)));
            }
        }
        let rects_el = ctx.child(f_el, "rects")?;
        let mut rects = Vec::with_capacity(3);
        for r_el in &rects_el.children {
            let toks = ctx.tokens(r_el);
            if toks.len() != 5 {
                return Err(ctx.invalid(r_el, format!("expected \"x y w h weight\", found {} tokens", toks.len())));
            }
            let rect = Rect::new(
                ctx.dimension(r_el, toks[0])?,
                ctx.dimension(r_el, toks[1])?,
                ctx.dimension(r_el, toks[2])?,
                ctx.dimension(r_el, toks[3])?,
            );
            let weight = ctx.real(r_el, toks[4])?;
            if !rect.fits_within(window_w, window_h) {
                return Err(
                    ctx.fail(r_el, ModelError::RectOutsideWindow { feature: fi, rect, window_w, window_h }.into())
                );
            }
            rects.push(WeightedRect { rect, weight });
        }
        features.push(HaarFeature::new(rects).map_err(|e| ctx.fail(rects_el, e.into()))?);
    }

    let stages_el = ctx.child(cascade, "stages")?;
    let mut stages = Vec::with_capacity(stages_el.children.len());
    for (si, s_el) in stages_el.children.iter().enumerate() {
        if s_el.child("trees").is_some() {
            return Err(ctx.fail(s_el, CascadeErrorKind::OldFormat));
        }
        let threshold = ctx.single_real(ctx.child(s_el, "stageThreshold")?)?;
        let weak_el = ctx.child(s_el, "weakClassifiers")?;
        let mut stumps = Vec::with_capacity(weak_el.children.len());
        for (wi, w_el) in weak_el.children.iter().enumerate() {
            let nodes_el = ctx.child(w_el, "internalNodes")?;
            let leaves_el = ctx.child(w_el, "leafValues")?;
            let toks = ctx.tokens(nodes_el);
            if toks.is_empty() || !toks.len().is_multiple_of(4) {
                return Err(ctx.invalid(nodes_el, "expected groups of \"left right feature threshold\""));
            }
            if toks.len() > 4 {
                return Err(ctx.fail(
                    nodes_el,
                    CascadeErrorKind::NonStumpTree { stage: si, classifier: wi, nodes: toks.len() / 4 },
                ));
            }
            let leaves = ctx.tokens(leaves_el).iter().map(|t| ctx.real(leaves_el, t)).collect::<Result<Vec<_>, _>>()?;
            if leaves.len() != 2 {
                return Err(ctx.invalid(leaves_el, format!("a stump needs 2 leaf values, found {}", leaves.len())));
            }
            let left_idx = ctx.int(nodes_el, toks[0])?;
            let right_idx = ctx.int(nodes_el, toks[1])?;
            let leaf = |idx: i64| -> Result<f64, CascadeError> {
                // Leaves are encoded as non-positive indices: 0 -> leafValues[0], -1 -> leafValues[1].
                match idx {
                    0 | -1 => Ok(leaves[(-idx) as usize]),
                    _ => {
                        Err(ctx.fail(nodes_el, CascadeErrorKind::NonStumpTree { stage: si, classifier: wi, nodes: 2 }))
                    }
                }
            };
            let left = leaf(left_idx)?;
            let right = leaf(right_idx)?;
            let feature = ctx.int(nodes_el, toks[2])?;
            let feature = usize::try_from(feature)
                .map_err(|_| ctx.invalid(nodes_el, format!("negative feature index {feature}")))?;
            if feature >= features.len() {
                return Err(ctx.fail(
                    nodes_el,
                    ModelError::FeatureIndex { stage: si, stump: wi, index: feature, count: features.len() }.into(),
                ));
            }
            let threshold = ctx.real(nodes_el, toks[3])?;
            stumps.push(WeakStump { feature, threshold, left, right });
        }
        if stumps.is_empty() {
            return Err(ctx.fail(weak_el, ModelError::EmptyStage(si).into()));
        }
        stages.push(Stage { threshold, stumps });
    }

    CascadeModel::new(window_w, window_h, features, stages)
        .map_err(|e| CascadeError::at(bytes, cascade.offset, e.into()))
}

/// The frontal-face cascades vendored under `models/`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BundledCascade {
    #[default]
    FrontalFaceDefault,
    FrontalFaceAlt,
    /// Ships with depth-2 trees; parsing it fails with a non-stump error.
    FrontalFaceAlt2,
}

impl BundledCascade {
    pub fn xml(self) -> &'static [u8] {
        match self {
            BundledCascade::FrontalFaceDefault => {
                include_bytes!("../../../../models/haarcascade_frontalface_default.xml")
            }
            BundledCascade::FrontalFaceAlt => {
                include_bytes!("../../../../models/haarcascade_frontalface_alt.xml")
            }
            BundledCascade::FrontalFaceAlt2 => {
                include_bytes!("../../../../models/haarcascade_frontalface_alt2.xml")
            }
        }
    }

    pub fn load(self) -> Result<CascadeModel, CascadeError> {
        parse_cascade_xml(self.xml())
    }

    pub fn name(self) -> &'static str {
        match self {
            BundledCascade::FrontalFaceDefault => "default",
            BundledCascade::FrontalFaceAlt => "alt",
            BundledCascade::FrontalFaceAlt2 => "alt2",
        }
    }
}

impl std::str::FromStr for BundledCascade {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(BundledCascade::FrontalFaceDefault),
            "alt" => Ok(BundledCascade::FrontalFaceAlt),
            "alt2" => Ok(BundledCascade::FrontalFaceAlt2),
            other => Err(format!("unknown bundled cascade {other:?} (expected default, alt or alt2)")),
        }
    }
}

impl fmt::Display for BundledCascade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
