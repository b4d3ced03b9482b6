//! Axis-aligned boxes in center-size form.

use serde::{Deserialize, Serialize};

use crate::error::BoxError;

/// Axis-aligned bounding box stored as center and extent, in pixels.
///
/// Width and height are strictly positive; construction rejects anything
/// else, so every affinity measure can assume a non-degenerate area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
}

/// Corner view `(x1, y1, x2, y2)` of a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corners {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if !(w.is_finite() && h.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(BoxError::Degenerate { w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    /// Builds a box from COCO-style top-left corner plus extent.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self, BoxError> {
        Self::new(x + w * 0.5, y + h * 0.5, w, h)
    }

    pub fn from_corners(c: Corners) -> Result<Self, BoxError> {
        Self::new(
            (c.x1 + c.x2) * 0.5,
            (c.y1 + c.y2) * 0.5,
            c.x2 - c.x1,
            c.y2 - c.y1,
        )
    }

    #[inline]
    pub fn cx(&self) -> f64 {
        self.cx
    }

    #[inline]
    pub fn cy(&self) -> f64 {
        self.cy
    }

    #[inline]
    pub fn w(&self) -> f64 {
        self.w
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    #[inline]
    pub fn corners(&self) -> Corners {
        let hw = self.w * 0.5;
        let hh = self.h * 0.5;
        Corners {
            x1: self.cx - hw,
            y1: self.cy - hh,
            x2: self.cx + hw,
            y2: self.cy + hh,
        }
    }

    /// COCO-style `[x, y, w, h]` with `(x, y)` the top-left corner.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.cx - self.w * 0.5, self.cy - self.h * 0.5, self.w, self.h]
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Result<Self, BoxError> {
        Self::new(self.cx + dx, self.cy + dy, self.w, self.h)
    }

    /// Scales position and extent about the origin.
    pub fn scaled(&self, k: f64) -> Result<Self, BoxError> {
        Self::new(self.cx * k, self.cy * k, self.w * k, self.h * k)
    }

    /// Intersects the box with `[0, width) x [0, height)`; `None` when nothing is left.
    pub fn clip(&self, width: f64, height: f64) -> Option<Self> {
        let c = self.corners();
        let clipped = Corners {
            x1: c.x1.max(0.0),
            y1: c.y1.max(0.0),
            x2: c.x2.min(width),
            y2: c.y2.min(height),
        };
        if clipped.x2 <= clipped.x1 || clipped.y2 <= clipped.y1 {
            return None;
        }
        if clipped == c {
            return Some(*self);
        }
        Self::from_corners(clipped).ok()
    }

    /// True when `other` lies inside `self` (boundaries may touch), up to `tol` pixels.
    pub fn contains(&self, other: &BBox, tol: f64) -> bool {
        let a = self.corners();
        let b = other.corners();
        a.x1 <= b.x1 + tol && a.y1 <= b.y1 + tol && a.x2 >= b.x2 - tol && a.y2 >= b.y2 - tol
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = BoxError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.cx, b.cy, b.w, b.h]
    }
}
