//! Pairwise affinity measures between a predicted box and a ground-truth box.
//!
//! All functions take the prediction first and the ground truth second. IoU,
//! NWD and the Wasserstein term are symmetric; the SAFit family is not, since
//! its blend weight is a function of the ground-truth area alone.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::ConfigError;

/// Default size-aware balance constant, the side length of a "small" object.
pub const DEFAULT_C: f64 = 32.0;

/// Size-aware balance constant of the SAFit blend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafitParams {
    c: f64,
}

impl SafitParams {
    pub fn new(c: f64) -> Result<Self, ConfigError> {
        positive("C", c).map(|c| Self { c })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// NWD normalization used inside the blend: bound to `C`.
    pub fn nwd(&self) -> NwdParams {
        NwdParams { k: self.c }
    }
}

impl Default for SafitParams {
    fn default() -> Self {
        Self { c: DEFAULT_C }
    }
}

/// Normalization constant `K` of the normalized Wasserstein distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NwdParams {
    k: f64,
}

impl NwdParams {
    pub fn new(k: f64) -> Result<Self, ConfigError> {
        positive("K", k).map(|k| Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

impl Default for NwdParams {
    fn default() -> Self {
        Self { k: DEFAULT_C }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ConfigError::NonPositive { name, value })
    }
}

/// Parameters shared by every measure. Standalone NWD uses `K` when given,
/// otherwise `C`; the SAFit family always uses `K = C`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub safit: SafitParams,
    pub nwd: NwdParams,
}

impl MeasureParams {
    pub fn new(c: f64, k: Option<f64>) -> Result<Self, ConfigError> {
        let safit = SafitParams::new(c)?;
        let nwd = match k {
            Some(k) => NwdParams::new(k)?,
            None => safit.nwd(),
        };
        Ok(Self { safit, nwd })
    }
}

/// Selectable affinity measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Iou,
    Giou,
    Diou,
    Ciou,
    Nwd,
    Safit,
    SafitS,
    SafitG,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::Iou,
        Measure::Giou,
        Measure::Diou,
        Measure::Ciou,
        Measure::Nwd,
        Measure::Safit,
        Measure::SafitS,
        Measure::SafitG,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Iou => "iou",
            Measure::Giou => "giou",
            Measure::Diou => "diou",
            Measure::Ciou => "ciou",
            Measure::Nwd => "nwd",
            Measure::Safit => "safit",
            Measure::SafitS => "safit_s",
            Measure::SafitG => "safit_g",
        }
    }

    /// Value of the measure for prediction `p` against ground truth `gt`.
    pub fn eval(self, p: &BBox, gt: &BBox, params: &MeasureParams) -> f64 {
        match self {
            Measure::Iou => iou(p, gt),
            Measure::Giou => giou(p, gt),
            Measure::Diou => diou(p, gt),
            Measure::Ciou => ciou(p, gt),
            Measure::Nwd => nwd(p, gt, &params.nwd),
            Measure::Safit => safit(p, gt, &params.safit),
            Measure::SafitS => safit_s(p, gt, &params.safit),
            Measure::SafitG => safit_g(p, gt, &params.safit),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| ConfigError::UnknownMeasure(s.to_string()))
    }
}

/// Intersection area, union area and the enclosing hull extent of two boxes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Overlap {
    pub inter: f64,
    pub union: f64,
    pub hull_w: f64,
    pub hull_h: f64,
}

pub(crate) fn overlap(p: &BBox, gt: &BBox) -> Overlap {
    let a = p.corners();
    let b = gt.corners();
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    // Areas from the same corner differences as the intersection, so a box
    // compared with itself yields inter == union exactly.
    let area_p = (a.x2 - a.x1) * (a.y2 - a.y1);
    let area_gt = (b.x2 - b.x1) * (b.y2 - b.y1);
    Overlap {
        inter,
        union: area_p + area_gt - inter,
        hull_w: a.x2.max(b.x2) - a.x1.min(b.x1),
        hull_h: a.y2.max(b.y2) - a.y1.min(b.y1),
    }
}

pub fn iou(p: &BBox, gt: &BBox) -> f64 {
    let o = overlap(p, gt);
    o.inter / o.union
}

/// Squared 2-Wasserstein distance between the Gaussian embeddings
/// `N(c, diag(w^2/4, h^2/4))` of the two boxes.
pub fn wasserstein_sq(p: &BBox, gt: &BBox) -> f64 {
    let dx = p.cx() - gt.cx();
    let dy = p.cy() - gt.cy();
    let dw = (p.w() - gt.w()) * 0.5;
    let dh = (p.h() - gt.h()) * 0.5;
    dx * dx + dy * dy + dw * dw + dh * dh
}

pub fn nwd(p: &BBox, gt: &BBox, params: &NwdParams) -> f64 {
    (-wasserstein_sq(p, gt).sqrt() / params.k).exp()
}

/// Blend weight on the IoU-like component. Depends only on the ground truth;
/// exactly 0.5 when `gt.area() == C^2`.
///
/// The weight at or above one half comes straight from the logistic; the
/// other is obtained by subtraction, so `1.0 - s` is exact and the two
/// weights sum to exactly one.
pub fn safit_weight(gt: &BBox, params: &SafitParams) -> f64 {
    let x = gt.area().sqrt() / params.c - 1.0;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        1.0 - 1.0 / (1.0 + x.exp())
    }
}

pub fn safit(p: &BBox, gt: &BBox, params: &SafitParams) -> f64 {
    let s = safit_weight(gt, params);
    s * iou(p, gt) + (1.0 - s) * nwd(p, gt, &params.nwd())
}

/// Hard switch: NWD below the `C` side length, IoU at or above it.
pub fn safit_s(p: &BBox, gt: &BBox, params: &SafitParams) -> f64 {
    if uses_nwd_branch(gt, params) {
        nwd(p, gt, &params.nwd())
    } else {
        iou(p, gt)
    }
}

pub(crate) fn uses_nwd_branch(gt: &BBox, params: &SafitParams) -> bool {
    gt.area().sqrt() < params.c
}

/// SAFit blend with GIoU in place of IoU.
pub fn safit_g(p: &BBox, gt: &BBox, params: &SafitParams) -> f64 {
    let s = safit_weight(gt, params);
    s * giou(p, gt) + (1.0 - s) * nwd(p, gt, &params.nwd())
}

pub fn giou(p: &BBox, gt: &BBox) -> f64 {
    let o = overlap(p, gt);
    let hull = o.hull_w * o.hull_h;
    o.inter / o.union - (hull - o.union) / hull
}

pub fn diou(p: &BBox, gt: &BBox) -> f64 {
    let o = overlap(p, gt);
    let dx = p.cx() - gt.cx();
    let dy = p.cy() - gt.cy();
    let diag_sq = o.hull_w * o.hull_w + o.hull_h * o.hull_h;
    o.inter / o.union - (dx * dx + dy * dy) / diag_sq
}

/// Aspect-ratio consistency term of CIoU.
pub(crate) fn aspect_term(p: &BBox, gt: &BBox) -> f64 {
    let d = (gt.w() / gt.h()).atan() - (p.w() / p.h()).atan();
    4.0 / (PI * PI) * d * d
}

pub fn ciou(p: &BBox, gt: &BBox) -> f64 {
    let v = aspect_term(p, gt);
    let iou = iou(p, gt);
    let denom = (1.0 - iou) + v;
    let alpha = if denom > 0.0 { v / denom } else { 0.0 };
    diou(p, gt) - alpha * v
}
