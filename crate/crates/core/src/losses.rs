//! Loss forms `1 - measure` with analytic gradients w.r.t. the predicted box.
//!
//! Gradients are taken with respect to `(cx, cy, w, h)` of the prediction; the
//! ground truth is a constant, so the SAFit blend weight contributes nothing.
//! Where the loss has a kink (coincident or touching edges, `p == gt` for the
//! Wasserstein term, the hard switch of SAFit-s) a one-sided subgradient is
//! returned and [`LossGrad::subgradient`] is set.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bbox::BBox;
use crate::error::ConfigError;
use crate::metrics::{
    safit_weight, uses_nwd_branch, wasserstein_sq, Measure, MeasureParams, NwdParams,
};

type Grad = [f64; 4];

const CX: usize = 0;
const CY: usize = 1;
const W: usize = 2;
const H: usize = 3;

/// Loss value and its partial derivatives w.r.t. the predicted box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossGrad {
    pub value: f64,
    pub d_cx: f64,
    pub d_cy: f64,
    pub d_w: f64,
    pub d_h: f64,
    /// True when the loss is not differentiable at this configuration.
    pub subgradient: bool,
}

impl LossGrad {
    pub fn grad(&self) -> Grad {
        [self.d_cx, self.d_cy, self.d_w, self.d_h]
    }
}

/// A measure value together with its gradient.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    g: Grad,
    kink: bool,
}

fn add(a: Grad, b: Grad) -> Grad {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn scale(a: Grad, k: f64) -> Grad {
    [a[0] * k, a[1] * k, a[2] * k, a[3] * k]
}

fn sub(a: Grad, b: Grad) -> Grad {
    add(a, scale(b, -1.0))
}

/// Overlap and hull extent along one axis, with derivatives w.r.t. the
/// prediction's center and size on that axis.
#[derive(Debug, Clone, Copy)]
struct Axis {
    inter: f64,
    d_inter: [f64; 2],
    hull: f64,
    d_hull: [f64; 2],
    /// Distance to the nearest edge coincidence, where the axis terms kink.
    gap: f64,
}

fn axis(pc: f64, pw: f64, g1: f64, g2: f64) -> Axis {
    let p1 = pc - pw * 0.5;
    let p2 = pc + pw * 0.5;
    // d(p1)/d(c, w) = (1, -1/2), d(p2)/d(c, w) = (1, 1/2)
    const LO: [f64; 2] = [1.0, -0.5];
    const HI: [f64; 2] = [1.0, 0.5];
    const ZERO: [f64; 2] = [0.0, 0.0];

    // Ties give the edge to the prediction: the interior-overlap branch.
    let d_hi = if p2 <= g2 { HI } else { ZERO };
    let d_lo = if p1 >= g1 { LO } else { ZERO };
    let raw = p2.min(g2) - p1.max(g1);
    let (inter, d_inter) = if raw > 0.0 {
        (raw, [d_hi[0] - d_lo[0], d_hi[1] - d_lo[1]])
    } else {
        (0.0, ZERO)
    };

    let dh_hi = if p2 >= g2 { HI } else { ZERO };
    let dh_lo = if p1 <= g1 { LO } else { ZERO };
    let hull = p2.max(g2) - p1.min(g1);
    let d_hull = [dh_hi[0] - dh_lo[0], dh_hi[1] - dh_lo[1]];

    let gap = (p1 - g1)
        .abs()
        .min((p2 - g2).abs())
        .min((p2 - g1).abs())
        .min((p1 - g2).abs());
    Axis {
        inter,
        d_inter,
        hull,
        d_hull,
        gap,
    }
}

fn lift_x(d: [f64; 2]) -> Grad {
    [d[0], 0.0, d[1], 0.0]
}

fn lift_y(d: [f64; 2]) -> Grad {
    [0.0, d[0], 0.0, d[1]]
}

/// Intersection/union/hull terms shared by the IoU family.
struct Boxes {
    inter: f64,
    d_inter: Grad,
    union: f64,
    d_union: Grad,
    hull_w: f64,
    hull_h: f64,
    d_hull_w: Grad,
    d_hull_h: Grad,
    gap: f64,
}

fn boxes(p: &BBox, gt: &BBox) -> Boxes {
    let g = gt.corners();
    let x = axis(p.cx(), p.w(), g.x1, g.x2);
    let y = axis(p.cy(), p.h(), g.y1, g.y2);
    let inter = x.inter * y.inter;
    let d_inter = add(scale(lift_x(x.d_inter), y.inter), scale(lift_y(y.d_inter), x.inter));
    let d_area = [0.0, 0.0, p.h(), p.w()];
    Boxes {
        inter,
        d_inter,
        union: p.area() + gt.area() - inter,
        d_union: sub(d_area, d_inter),
        hull_w: x.hull,
        hull_h: y.hull,
        d_hull_w: lift_x(x.d_hull),
        d_hull_h: lift_y(y.d_hull),
        gap: x.gap.min(y.gap),
    }
}

fn iou_dual(b: &Boxes) -> Dual {
    let u = b.union;
    Dual {
        v: b.inter / u,
        g: scale(sub(scale(b.d_inter, u), scale(b.d_union, b.inter)), 1.0 / (u * u)),
        kink: b.gap == 0.0,
    }
}

fn giou_dual(b: &Boxes) -> Dual {
    let iou = iou_dual(b);
    let hull = b.hull_w * b.hull_h;
    let d_hull = add(scale(b.d_hull_w, b.hull_h), scale(b.d_hull_h, b.hull_w));
    // giou = iou - 1 + union / hull
    let d_ratio = scale(sub(scale(b.d_union, hull), scale(d_hull, b.union)), 1.0 / (hull * hull));
    Dual {
        v: iou.v - (hull - b.union) / hull,
        g: add(iou.g, d_ratio),
        kink: iou.kink,
    }
}

fn diou_dual(p: &BBox, gt: &BBox, b: &Boxes) -> Dual {
    let iou = iou_dual(b);
    let dx = p.cx() - gt.cx();
    let dy = p.cy() - gt.cy();
    let rho = dx * dx + dy * dy;
    let d_rho = [2.0 * dx, 2.0 * dy, 0.0, 0.0];
    let diag = b.hull_w * b.hull_w + b.hull_h * b.hull_h;
    let d_diag = add(scale(b.d_hull_w, 2.0 * b.hull_w), scale(b.d_hull_h, 2.0 * b.hull_h));
    let d_pen = scale(sub(scale(d_rho, diag), scale(d_diag, rho)), 1.0 / (diag * diag));
    Dual {
        v: iou.v - rho / diag,
        g: sub(iou.g, d_pen),
        kink: iou.kink,
    }
}

fn ciou_dual(p: &BBox, gt: &BBox, b: &Boxes) -> Dual {
    let iou = iou_dual(b);
    let diou = diou_dual(p, gt, b);
    let k = 4.0 / (PI * PI);
    let theta = (p.w() / p.h()).atan();
    let delta = (gt.w() / gt.h()).atan() - theta;
    let v = k * delta * delta;
    let r2 = p.w() * p.w() + p.h() * p.h();
    let d_theta = [0.0, 0.0, p.h() / r2, -p.w() / r2];
    let d_v = scale(d_theta, -2.0 * k * delta);
    // penalty alpha * v = v^2 / (1 - iou + v); alpha is differentiated, not frozen
    let denom = (1.0 - iou.v) + v;
    let (pen, d_pen) = if denom > 0.0 {
        let num = add(scale(d_v, 2.0 * v * denom), scale(sub(d_v, iou.g), -v * v));
        (v * v / denom, scale(num, 1.0 / (denom * denom)))
    } else {
        (0.0, [0.0; 4])
    };
    Dual {
        v: diou.v - pen,
        g: sub(diou.g, d_pen),
        kink: diou.kink,
    }
}

fn nwd_dual(p: &BBox, gt: &BBox, params: &NwdParams) -> Dual {
    let dx = p.cx() - gt.cx();
    let dy = p.cy() - gt.cy();
    let dw = p.w() - gt.w();
    let dh = p.h() - gt.h();
    let w2 = dx * dx + dy * dy + 0.25 * dw * dw + 0.25 * dh * dh;
    let r = w2.sqrt();
    let k = params.k();
    let v = (-r / k).exp();
    if r == 0.0 {
        // Cone tip of sqrt(W2): zero is the minimal-norm subgradient.
        return Dual {
            v,
            g: [0.0; 4],
            kink: true,
        };
    }
    let d_w2 = [2.0 * dx, 2.0 * dy, 0.5 * dw, 0.5 * dh];
    Dual {
        v,
        g: scale(d_w2, -v / (k * 2.0 * r)),
        kink: false,
    }
}

fn blend(s: f64, a: Dual, b: Dual) -> Dual {
    Dual {
        v: s * a.v + (1.0 - s) * b.v,
        g: add(scale(a.g, s), scale(b.g, 1.0 - s)),
        kink: a.kink || b.kink,
    }
}

fn on_switch_boundary(gt: &BBox, c: f64) -> bool {
    (gt.area().sqrt() - c).abs() <= 1e-12 * c
}

fn measure_dual(measure: Measure, p: &BBox, gt: &BBox, params: &MeasureParams) -> Dual {
    let b = boxes(p, gt);
    match measure {
        Measure::Iou => iou_dual(&b),
        Measure::Giou => giou_dual(&b),
        Measure::Diou => diou_dual(p, gt, &b),
        Measure::Ciou => ciou_dual(p, gt, &b),
        Measure::Nwd => nwd_dual(p, gt, &params.nwd),
        Measure::Safit => blend(
            safit_weight(gt, &params.safit),
            iou_dual(&b),
            nwd_dual(p, gt, &params.safit.nwd()),
        ),
        Measure::SafitG => blend(
            safit_weight(gt, &params.safit),
            giou_dual(&b),
            nwd_dual(p, gt, &params.safit.nwd()),
        ),
        Measure::SafitS => {
            let mut d = if uses_nwd_branch(gt, &params.safit) {
                nwd_dual(p, gt, &params.safit.nwd())
            } else {
                iou_dual(&b)
            };
            d.kink |= on_switch_boundary(gt, params.safit.c());
            d
        }
    }
}

/// `1 - measure(p, gt)` and its gradient w.r.t. `p`.
pub fn loss(measure: Measure, p: &BBox, gt: &BBox, params: &MeasureParams) -> LossGrad {
    let d = measure_dual(measure, p, gt, params);
    debug_assert!((d.v - measure.eval(p, gt, params)).abs() < 1e-12);
    LossGrad {
        value: 1.0 - measure.eval(p, gt, params),
        d_cx: -d.g[CX],
        d_cy: -d.g[CY],
        d_w: -d.g[W],
        d_h: -d.g[H],
        subgradient: d.kink,
    }
}

/// [`loss`] with the measure given by name.
pub fn loss_by_name(
    measure: &str,
    p: &BBox,
    gt: &BBox,
    params: &MeasureParams,
) -> Result<LossGrad, ConfigError> {
    Ok(loss(measure.parse()?, p, gt, params))
}

/// Denominator floor of the relative error, above the roundoff of a central
/// difference at the usual steps.
pub const REL_ERR_FLOOR: f64 = 1e-6;

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FdCheck {
    /// Max over the four partials of
    /// `|analytic - central| / max(|analytic|, |central|, REL_ERR_FLOOR)`.
    Checked { max_rel_err: f64 },
    /// The configuration is within two steps of a kink; no meaningful check.
    Skipped,
}

impl FdCheck {
    pub fn max_rel_err(&self) -> Option<f64> {
        match self {
            FdCheck::Checked { max_rel_err } => Some(*max_rel_err),
            FdCheck::Skipped => None,
        }
    }
}

/// Distance (in pixels along any one box parameter) to the nearest
/// configuration where `measure` is not differentiable.
fn kink_margin(measure: Measure, p: &BBox, gt: &BBox, params: &MeasureParams) -> f64 {
    // A unit step in cx or cy moves an edge by one pixel, in w or h by half a pixel.
    let edge_gap = || boxes(p, gt).gap;
    let cone = || wasserstein_sq(p, gt).sqrt();
    match measure {
        Measure::Iou | Measure::Giou | Measure::Diou | Measure::Ciou => edge_gap(),
        Measure::Nwd => cone(),
        Measure::Safit | Measure::SafitG => edge_gap().min(cone()),
        Measure::SafitS => {
            if on_switch_boundary(gt, params.safit.c()) {
                0.0
            } else if uses_nwd_branch(gt, &params.safit) {
                cone()
            } else {
                edge_gap()
            }
        }
    }
}

/// Compares analytic gradients of [`loss`] against central differences.
pub fn fd_check(
    measure: Measure,
    p: &BBox,
    gt: &BBox,
    params: &MeasureParams,
    step: f64,
) -> Result<FdCheck, ConfigError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(ConfigError::Step(step));
    }
    let analytic = loss(measure, p, gt, params);
    if analytic.subgradient || kink_margin(measure, p, gt, params) <= 2.0 * step {
        return Ok(FdCheck::Skipped);
    }
    let base: Grad = (*p).into();
    let eval = |x: Grad| BBox::try_from(x).map(|b| loss(measure, &b, gt, params).value);
    let mut worst = 0.0f64;
    for (i, a) in analytic.grad().into_iter().enumerate() {
        let mut hi = base;
        let mut lo = base;
        hi[i] += step;
        lo[i] -= step;
        let (Ok(fh), Ok(fl)) = (eval(hi), eval(lo)) else {
            return Ok(FdCheck::Skipped);
        };
        let numeric = (fh - fl) / (2.0 * step);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR));
    }
    Ok(FdCheck::Checked { max_rel_err: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn b(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    #[test]
    fn nwd_minimum_has_zero_gradient() {
        let gt = b(4.0, 4.0, 8.0, 8.0);
        let l = loss(Measure::Nwd, &gt, &gt, &MeasureParams::default());
        assert_eq!(l.value, 0.0);
        assert_eq!(l.grad(), [0.0; 4]);
        assert!(l.subgradient);
    }

    #[test]
    fn iou_loss_value_and_fd() {
        let p = b(6.0, 6.0, 8.0, 8.0);
        let gt = b(4.0, 4.0, 8.0, 8.0);
        let params = MeasureParams::default();
        let l = loss(Measure::Iou, &p, &gt, &params);
        assert_abs_diff_eq!(l.value, 1.0 - 36.0 / 92.0, epsilon = 1e-15);
        assert!(!l.subgradient);
        let err = fd_check(Measure::Iou, &p, &gt, &params, 1e-4).unwrap();
        assert!(err.max_rel_err().unwrap() <= 1e-5, "{err:?}");
    }

    #[test]
    fn safit_gradient_is_weighted_sum() {
        let p = b(6.0, 6.0, 8.0, 8.0);
        let gt = b(4.0, 4.0, 8.0, 8.0);
        let params = MeasureParams::default();
        let s = 0.320821300824607;
        let l = loss(Measure::Safit, &p, &gt, &params);
        assert_abs_diff_eq!(l.value, 0.25273744096322703, epsilon = 1e-12);
        let li = loss(Measure::Iou, &p, &gt, &params);
        let ln = loss(Measure::Nwd, &p, &gt, &params);
        for i in 0..4 {
            let expect = s * li.grad()[i] + (1.0 - s) * ln.grad()[i];
            assert_abs_diff_eq!(l.grad()[i], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn step_must_be_positive() {
        let p = b(6.0, 6.0, 8.0, 8.0);
        let params = MeasureParams::default();
        assert_eq!(fd_check(Measure::Iou, &p, &p, &params, 0.0), Err(ConfigError::Step(0.0)));
        assert!(fd_check(Measure::Iou, &p, &p, &params, -1e-3).is_err());
    }

    #[test]
    fn safit_s_boundary_is_skipped() {
        let gt = b(16.0, 16.0, 32.0, 32.0);
        let p = b(18.0, 15.0, 30.0, 31.0);
        let params = MeasureParams::default();
        assert!(loss(Measure::SafitS, &p, &gt, &params).subgradient);
        assert_eq!(fd_check(Measure::SafitS, &p, &gt, &params, 1e-4).unwrap(), FdCheck::Skipped);
    }

    #[test]
    fn aligned_edges_are_flagged() {
        let gt = b(4.0, 4.0, 8.0, 8.0);
        let p = b(6.0, 4.0, 12.0, 8.0); // left and top/bottom edges coincide
        let params = MeasureParams::default();
        let l = loss(Measure::Iou, &p, &gt, &params);
        assert!(l.subgradient);
        assert_eq!(fd_check(Measure::Giou, &p, &gt, &params, 1e-4).unwrap(), FdCheck::Skipped);
    }

    #[test]
    fn unknown_measure_name() {
        let p = b(6.0, 6.0, 8.0, 8.0);
        let err = loss_by_name("dice", &p, &p, &MeasureParams::default()).unwrap_err();
        assert_eq!(err, ConfigError::UnknownMeasure("dice".into()));
        assert!(loss_by_name("safit_g", &p, &p, &MeasureParams::default()).is_ok());
    }

    #[test]
    fn disjoint_iou_loss_is_flat() {
        let p = b(100.0, 100.0, 8.0, 8.0);
        let gt = b(4.0, 4.0, 8.0, 8.0);
        let l = loss(Measure::Iou, &p, &gt, &MeasureParams::default());
        assert_eq!(l.value, 1.0);
        assert_eq!(l.grad(), [0.0; 4]);
        // GIoU still pulls the box back toward the target.
        let g = loss(Measure::Giou, &p, &gt, &MeasureParams::default());
        assert!(g.d_cx > 0.0 && g.d_cy > 0.0);
    }
}
