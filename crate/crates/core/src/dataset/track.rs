//! Linear gap filling for short occlusions within a track.

use serde::Serialize;

use crate::bbox::BBox;
use crate::error::TrackError;

/// Longest run of missing frames that is filled by interpolation.
pub const MAX_FILL_GAP: i64 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub frame: i64,
    pub bbox: BBox,
    pub interpolated: bool,
}

impl TrackPoint {
    pub fn observed(frame: i64, bbox: BBox) -> Self {
        Self {
            frame,
            bbox,
            interpolated: false,
        }
    }
}

/// A run of missing frames strictly between two observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Gap {
    pub after_frame: i64,
    pub before_frame: i64,
}

impl Gap {
    pub fn missing(&self) -> i64 {
        self.before_frame - self.after_frame - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilledTrack {
    pub points: Vec<TrackPoint>,
    /// Gaps longer than [`MAX_FILL_GAP`], left open.
    pub open_gaps: Vec<Gap>,
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Fills gaps of at most [`MAX_FILL_GAP`] missing frames by linear
/// interpolation of `(cx, cy, w, h)`. Input frames must be strictly increasing.
pub fn interpolate_track(track: &[TrackPoint]) -> Result<FilledTrack, TrackError> {
    for pair in track.windows(2) {
        if pair[1].frame <= pair[0].frame {
            return Err(TrackError::NonMonotone {
                prev: pair[0].frame,
                next: pair[1].frame,
            });
        }
    }
    let mut points = Vec::with_capacity(track.len());
    let mut open_gaps = Vec::new();
    for (i, cur) in track.iter().enumerate() {
        points.push(*cur);
        let Some(next) = track.get(i + 1) else { break };
        let gap = Gap {
            after_frame: cur.frame,
            before_frame: next.frame,
        };
        let missing = gap.missing();
        if missing == 0 {
            continue;
        }
        if missing > MAX_FILL_GAP {
            open_gaps.push(gap);
            continue;
        }
        let span = (next.frame - cur.frame) as f64;
        let (a, b) = (cur.bbox, next.bbox);
        for frame in cur.frame + 1..next.frame {
            let t = (frame - cur.frame) as f64 / span;
            // Convex combination of two valid boxes keeps positive extent.
            let bbox = BBox::new(
                lerp(a.cx(), b.cx(), t),
                lerp(a.cy(), b.cy(), t),
                lerp(a.w(), b.w(), t),
                lerp(a.h(), b.h(), t),
            )
            .expect("interpolated box stays valid");
            points.push(TrackPoint {
                frame,
                bbox,
                interpolated: true,
            });
        }
    }
    Ok(FilledTrack { points, open_gaps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    #[test]
    fn fills_midpoint() {
        let t = [
            TrackPoint::observed(1, b(0.0, 0.0, 8.0, 8.0)),
            TrackPoint::observed(3, b(4.0, 4.0, 8.0, 8.0)),
        ];
        let out = interpolate_track(&t).unwrap();
        assert_eq!(out.points.len(), 3);
        assert_eq!(out.points[1].frame, 2);
        assert_eq!(out.points[1].bbox, b(2.0, 2.0, 8.0, 8.0));
        assert!(out.points[1].interpolated);
        assert!(out.open_gaps.is_empty());
    }

    #[test]
    fn long_gap_left_open() {
        let t = [
            TrackPoint::observed(1, b(0.0, 0.0, 8.0, 8.0)),
            TrackPoint::observed(8, b(4.0, 4.0, 8.0, 8.0)),
        ];
        let out = interpolate_track(&t).unwrap();
        assert_eq!(out.points, t.to_vec());
        assert_eq!(out.open_gaps, vec![Gap { after_frame: 1, before_frame: 8 }]);
        assert_eq!(out.open_gaps[0].missing(), 6);
    }

    #[test]
    fn five_missing_frames_are_filled() {
        let t = [
            TrackPoint::observed(0, b(0.0, 0.0, 8.0, 8.0)),
            TrackPoint::observed(6, b(6.0, 0.0, 14.0, 8.0)),
        ];
        let out = interpolate_track(&t).unwrap();
        assert_eq!(out.points.len(), 7);
        assert_eq!(out.points[3].bbox, b(3.0, 0.0, 11.0, 8.0));
    }

    #[test]
    fn adjacent_frames_unchanged() {
        let t = [
            TrackPoint::observed(1, b(0.0, 0.0, 8.0, 8.0)),
            TrackPoint::observed(2, b(4.0, 4.0, 8.0, 8.0)),
        ];
        assert_eq!(interpolate_track(&t).unwrap().points, t.to_vec());
    }

    #[test]
    fn rejects_non_monotone() {
        let t = [
            TrackPoint::observed(3, b(0.0, 0.0, 8.0, 8.0)),
            TrackPoint::observed(3, b(4.0, 4.0, 8.0, 8.0)),
        ];
        assert_eq!(
            interpolate_track(&t),
            Err(TrackError::NonMonotone { prev: 3, next: 3 })
        );
    }

    fn arb_track() -> impl Strategy<Value = Vec<TrackPoint>> {
        prop::collection::vec(
            (1i64..9, -100.0..100.0f64, -100.0..100.0f64, 1.0..50.0f64, 1.0..50.0f64),
            1..12,
        )
        .prop_map(|steps| {
            let mut frame = 0;
            steps
                .into_iter()
                .map(|(df, cx, cy, w, h)| {
                    frame += df;
                    TrackPoint::observed(frame, b(cx, cy, w, h))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn output_monotone_and_convex(track in arb_track()) {
            let out = interpolate_track(&track).unwrap();
            for w in out.points.windows(2) {
                prop_assert!(w[0].frame < w[1].frame);
            }
            // Every interpolated box lies between its observed neighbours per parameter.
            let observed: Vec<_> = out.points.iter().filter(|p| !p.interpolated).collect();
            prop_assert_eq!(observed.len(), track.len());
            for p in out.points.iter().filter(|p| p.interpolated) {
                let lo = observed.iter().rev().find(|o| o.frame < p.frame).unwrap();
                let hi = observed.iter().find(|o| o.frame > p.frame).unwrap();
                prop_assert!(hi.frame - lo.frame - 1 <= MAX_FILL_GAP);
                let pa: [f64; 4] = p.bbox.into();
                let la: [f64; 4] = lo.bbox.into();
                let ha: [f64; 4] = hi.bbox.into();
                for i in 0..4 {
                    prop_assert!(pa[i] >= la[i].min(ha[i]) - 1e-12 && pa[i] <= la[i].max(ha[i]) + 1e-12);
                }
            }
        }
    }
}
