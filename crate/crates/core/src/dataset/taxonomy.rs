//! Scale and density taxonomies. All bins are left-closed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;

/// Object scale by box area in square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleLevel {
    /// `(0, 8^2)`; the nominal lower edge `1^2` is extended down to zero so every box classifies.
    ExtremelyTiny,
    /// `[8^2, 16^2)`
    Tiny,
    /// `[16^2, 32^2)`
    Small,
    /// `[32^2, 96^2)`
    Medium,
    /// `[96^2, inf)`
    Large,
}

impl ScaleLevel {
    pub const ALL: [ScaleLevel; 5] = [
        ScaleLevel::ExtremelyTiny,
        ScaleLevel::Tiny,
        ScaleLevel::Small,
        ScaleLevel::Medium,
        ScaleLevel::Large,
    ];

    /// Left-closed area range `[lo, hi)`.
    pub fn area_range(self) -> (f64, f64) {
        match self {
            ScaleLevel::ExtremelyTiny => (0.0, 64.0),
            ScaleLevel::Tiny => (64.0, 256.0),
            ScaleLevel::Small => (256.0, 1024.0),
            ScaleLevel::Medium => (1024.0, 9216.0),
            ScaleLevel::Large => (9216.0, f64::INFINITY),
        }
    }

    pub fn of_area(area: f64) -> Self {
        if area < 64.0 {
            ScaleLevel::ExtremelyTiny
        } else if area < 256.0 {
            ScaleLevel::Tiny
        } else if area < 1024.0 {
            ScaleLevel::Small
        } else if area < 9216.0 {
            ScaleLevel::Medium
        } else {
            ScaleLevel::Large
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScaleLevel::ExtremelyTiny => "extremely_tiny",
            ScaleLevel::Tiny => "tiny",
            ScaleLevel::Small => "small",
            ScaleLevel::Medium => "medium",
            ScaleLevel::Large => "large",
        }
    }
}

impl fmt::Display for ScaleLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn scale_level(bbox: &BBox) -> ScaleLevel {
    ScaleLevel::of_area(bbox.area())
}

/// Annotation density of a sequence: mean annotations per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityLevel {
    /// `[0, 10)`; means below one still count as sparse.
    Sparse,
    /// `[10, 50)`
    Medium,
    /// `[50, inf)`
    Dense,
}

impl DensityLevel {
    pub const ALL: [DensityLevel; 3] = [DensityLevel::Sparse, DensityLevel::Medium, DensityLevel::Dense];

    pub fn name(self) -> &'static str {
        match self {
            DensityLevel::Sparse => "sparse",
            DensityLevel::Medium => "medium",
            DensityLevel::Dense => "dense",
        }
    }
}

impl fmt::Display for DensityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifies a non-negative mean; NaN and negative inputs fall into `Sparse`.
pub fn density_level(mean_annotations_per_frame: f64) -> DensityLevel {
    if mean_annotations_per_frame >= 50.0 {
        DensityLevel::Dense
    } else if mean_annotations_per_frame >= 10.0 {
        DensityLevel::Medium
    } else {
        DensityLevel::Sparse
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(side: f64) -> BBox {
        BBox::new(0.0, 0.0, side, side).unwrap()
    }

    #[test]
    fn scale_examples() {
        assert_eq!(scale_level(&square(8.0)), ScaleLevel::Tiny);
        assert_eq!(scale_level(&square(31.9)), ScaleLevel::Small);
        assert_eq!(scale_level(&square(96.0)), ScaleLevel::Large);
        assert_eq!(scale_level(&square(0.5)), ScaleLevel::ExtremelyTiny);
    }

    #[test]
    fn scale_edges_are_left_closed() {
        let edges = [
            (64.0, ScaleLevel::Tiny),
            (256.0, ScaleLevel::Small),
            (1024.0, ScaleLevel::Medium),
            (9216.0, ScaleLevel::Large),
        ];
        for (edge, level) in edges {
            assert_eq!(ScaleLevel::of_area(edge), level);
            let below = ScaleLevel::of_area(f64::from_bits(edge.to_bits() - 1));
            assert_eq!(below as usize + 1, level as usize);
        }
    }

    #[test]
    fn density_examples() {
        assert_eq!(density_level(9.99), DensityLevel::Sparse);
        assert_eq!(density_level(10.0), DensityLevel::Medium);
        assert_eq!(density_level(50.0), DensityLevel::Dense);
        assert_eq!(density_level(161.0), DensityLevel::Dense);
        assert_eq!(density_level(1.0), DensityLevel::Sparse);
        assert_eq!(density_level(0.0), DensityLevel::Sparse);
    }

    proptest! {
        #[test]
        fn scale_bins_partition(area in 1e-6..1e7f64) {
            let level = ScaleLevel::of_area(area);
            let hits: Vec<_> = ScaleLevel::ALL
                .into_iter()
                .filter(|l| {
                    let (lo, hi) = l.area_range();
                    lo <= area && area < hi
                })
                .collect();
            prop_assert_eq!(hits, vec![level]);
        }
    }
}
