//! Projective warping of boxes between image planes.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::bbox::{BBox, Corners};
use crate::error::WarpError;

/// Invertible 3x3 homography acting on homogeneous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 3]", into = "[[f64; 3]; 3]")]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(rows: [[f64; 3]; 3]) -> Result<Self, WarpError> {
        let m = Matrix3::from_fn(|r, c| rows[r][c]);
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, WarpError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(WarpError::NonFinite);
        }
        let det = m.determinant();
        let norm = m.norm();
        if det.abs() <= 1e-12 * norm * norm * norm {
            return Err(WarpError::Singular(det));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    pub fn scaling(sx: f64, sy: f64) -> Result<Self, WarpError> {
        Self::from_matrix(Matrix3::new(sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        // Non-singularity is checked at construction.
        Self(self.0.try_inverse().expect("homography checked invertible"))
    }

    pub fn compose(&self, then: &Homography) -> Result<Self, WarpError> {
        Self::from_matrix(then.0 * self.0)
    }

    /// Maps a point, dividing out the projective coordinate.
    pub fn apply(&self, x: f64, y: f64) -> Result<(f64, f64), WarpError> {
        let v = self.0 * Vector3::new(x, y, 1.0);
        let r = self.0.row(2);
        let scale = r[0].abs() * x.abs() + r[1].abs() * y.abs() + r[2].abs();
        if v.z.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(WarpError::AtInfinity { x, y });
        }
        Ok((v.x / v.z, v.y / v.z))
    }

    /// Maps the four corners of `bbox`, takes their axis-aligned enclosing box
    /// and clips it to `[0, w) x [0, h)` when `clip_to` is given. Returns
    /// `None` when nothing of the box survives clipping.
    pub fn warp_bbox(&self, bbox: &BBox, clip_to: Option<(f64, f64)>) -> Result<Option<BBox>, WarpError> {
        let c = bbox.corners();
        let mut out = Corners {
            x1: f64::INFINITY,
            y1: f64::INFINITY,
            x2: f64::NEG_INFINITY,
            y2: f64::NEG_INFINITY,
        };
        for (x, y) in [(c.x1, c.y1), (c.x2, c.y1), (c.x2, c.y2), (c.x1, c.y2)] {
            let (u, v) = self.apply(x, y)?;
            out.x1 = out.x1.min(u);
            out.y1 = out.y1.min(v);
            out.x2 = out.x2.max(u);
            out.y2 = out.y2.max(v);
        }
        let Ok(warped) = BBox::from_corners(out) else {
            return Ok(None);
        };
        Ok(match clip_to {
            Some((w, h)) => warped.clip(w, h),
            None => Some(warped),
        })
    }
}

impl TryFrom<[[f64; 3]; 3]> for Homography {
    type Error = WarpError;

    fn try_from(rows: [[f64; 3]; 3]) -> Result<Self, Self::Error> {
        Homography::new(rows)
    }
}

impl From<Homography> for [[f64; 3]; 3] {
    fn from(h: Homography) -> Self {
        let m = h.0;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }
}

/// Free-function form of [`Homography::warp_bbox`].
pub fn warp_bbox(h: &Homography, bbox: &BBox, clip_to: Option<(f64, f64)>) -> Result<Option<BBox>, WarpError> {
    h.warp_bbox(bbox, clip_to)
}
