use crate::bbox::BBox;
use crate::metrics::{Measure, MeasureParams};

/// Greedy score-ordered matching for one image and class.
///
/// `detections` must already be sorted by descending score. Each detection
/// takes the unmatched ground truth with the highest affinity at or above
/// `threshold`, considering non-ignored ground truth first and ignored ground
/// truth only when no non-ignored candidate qualifies. Affinity ties go to the
/// lowest ground-truth index. Returns the matched ground-truth index per
/// detection.
pub fn match_detections(
    detections: &[BBox],
    gts: &[BBox],
    gt_ignore: &[bool],
    measure: Measure,
    params: &MeasureParams,
    threshold: f64,
) -> Vec<Option<usize>> {
    assert_eq!(gts.len(), gt_ignore.len(), "one ignore flag per ground truth");
    let affinity: Vec<f64> = detections
        .iter()
        .flat_map(|d| gts.iter().map(move |g| measure.eval(d, g, params)))
        .collect();
    greedy(&affinity, detections.len(), gts.len(), gt_ignore, threshold)
}

/// Matching over a precomputed row-major `detections x gts` affinity matrix.
pub(crate) fn greedy(affinity: &[f64], n_det: usize, n_gt: usize, gt_ignore: &[bool], threshold: f64) -> Vec<Option<usize>> {
    debug_assert_eq!(affinity.len(), n_det * n_gt);
    let mut taken = vec![false; n_gt];
    let mut out = Vec::with_capacity(n_det);
    for d in 0..n_det {
        let row = &affinity[d * n_gt..(d + 1) * n_gt];
        let pick = best(row, &taken, gt_ignore, threshold, false).or_else(|| best(row, &taken, gt_ignore, threshold, true));
        if let Some(g) = pick {
            taken[g] = true;
        }
        out.push(pick);
    }
    out
}

fn best(row: &[f64], taken: &[bool], gt_ignore: &[bool], threshold: f64, ignored: bool) -> Option<usize> {
    let mut pick: Option<(usize, f64)> = None;
    for (g, &a) in row.iter().enumerate() {
        if taken[g] || gt_ignore[g] != ignored || a < threshold {
            continue;
        }
        if pick.map_or(true, |(_, b)| a > b) {
            pick = Some((g, a));
        }
    }
    pick.map(|(g, _)| g)
}
