//! COCO-protocol average precision over pluggable affinity measures.
//!
//! A cell is one `(class, scale bin, threshold)` triple. Within a cell,
//! ground truth outside the bin is ignored, detections matched to ignored
//! ground truth are dropped, and unmatched detections whose own area falls
//! outside the bin are dropped. Cells without any non-ignored ground truth are
//! absent and excluded from every mean.

mod curve;
mod matching;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Annotation, Dataset, Detection, LightVision, Modality, ScaleLevel};
use crate::error::ConfigError;
use crate::metrics::{Measure, MeasureParams};

pub use curve::{curves_csv, deviation_curve, CurvePoint};
pub use matching::match_detections;
pub use report::{BinValue, Cell, ClassReport, EvalReport, IlluminationReport, Summary};

pub const DEFAULT_MAX_DETECTIONS: usize = 300;
pub const DEFAULT_RECALL_POINTS: usize = 101;
pub const ALL_BIN: &str = "all";

/// Left-closed area range `[lo, hi)` in square pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleBin {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl ScaleBin {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self, ConfigError> {
        let name = name.into();
        if lo.is_nan() || hi.is_nan() || lo < 0.0 || hi <= lo || name.is_empty() || name == ALL_BIN {
            return Err(ConfigError::ScaleBin(name));
        }
        Ok(Self { name, lo, hi })
    }

    pub fn contains(&self, area: f64) -> bool {
        self.lo <= area && area < self.hi
    }

    /// Extremely tiny, tiny, small, medium and large.
    pub fn default_bins() -> Vec<ScaleBin> {
        ScaleLevel::ALL
            .iter()
            .map(|l| {
                let (lo, hi) = l.area_range();
                ScaleBin {
                    name: l.name().to_string(),
                    lo,
                    hi,
                }
            })
            .collect()
    }

    fn all() -> Self {
        ScaleBin {
            name: ALL_BIN.to_string(),
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }
}

/// How ground truth filled in by track interpolation is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolatedGt {
    #[default]
    Count,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub measure: Measure,
    pub params: MeasureParams,
    pub thresholds: Vec<f64>,
    pub recall_points: usize,
    /// Cap per image and class, applied after sorting by score.
    pub max_detections: usize,
    pub scale_bins: Vec<ScaleBin>,
    pub modality: Option<Modality>,
    pub light_vision: Option<LightVision>,
    pub interpolated: InterpolatedGt,
    /// Also evaluate each light-vision level on its own.
    pub illumination: bool,
    /// Thread count for one run; `None` uses the global pool.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            measure: Measure::Iou,
            params: MeasureParams::default(),
            thresholds: coco_thresholds(),
            recall_points: DEFAULT_RECALL_POINTS,
            max_detections: DEFAULT_MAX_DETECTIONS,
            scale_bins: ScaleBin::default_bins(),
            modality: None,
            light_vision: None,
            interpolated: InterpolatedGt::Count,
            illumination: true,
            workers: None,
        }
    }
}

/// `0.50, 0.55, ..., 0.95`.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

impl EvalConfig {
    pub fn with_measure(measure: Measure, params: MeasureParams) -> Self {
        Self {
            measure,
            params,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.thresholds;
        if t.is_empty() || t.iter().any(|&v| !(v > 0.0 && v <= 1.0)) || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::Thresholds);
        }
        if self.max_detections == 0 {
            return Err(ConfigError::MaxDetections);
        }
        if self.recall_points < 2 {
            return Err(ConfigError::RecallPoints);
        }
        for b in &self.scale_bins {
            ScaleBin::new(b.name.clone(), b.lo, b.hi)?;
        }
        let mut names = BTreeSet::new();
        if let Some(dup) = self.scale_bins.iter().find(|b| !names.insert(b.name.as_str())) {
            return Err(ConfigError::ScaleBin(dup.name.clone()));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::NonPositive {
                name: "workers",
                value: 0.0,
            });
        }
        Ok(())
    }

    fn threshold_index(&self, t: f64) -> Option<usize> {
        self.thresholds.iter().position(|&v| (v - t).abs() < 1e-12)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Tp,
    Fp,
    Ignored,
}

/// Matching outcome for one image and class across every bin and threshold.
struct Unit {
    class_id: u64,
    scores: Vec<f64>,
    /// `[bin][threshold][detection]`
    status: Vec<Vec<Vec<Status>>>,
    /// Non-ignored ground truth per bin.
    n_gt: Vec<usize>,
}

/// Evaluates `detections` against `gt`.
pub fn evaluate(gt: &Dataset, detections: &[Detection], cfg: &EvalConfig) -> Result<EvalReport, ConfigError> {
    cfg.validate()?;
    match cfg.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .expect("thread pool construction");
            Ok(pool.install(|| evaluate_inner(gt, detections, cfg)))
        }
        None => Ok(evaluate_inner(gt, detections, cfg)),
    }
}

fn evaluate_inner(gt: &Dataset, detections: &[Detection], cfg: &EvalConfig) -> EvalReport {
    let mut base = gt.clone();
    if let Some(m) = cfg.modality {
        base = base.with_modality(m);
    }
    if let Some(l) = cfg.light_vision {
        base = base.with_light_vision(l);
    }
    let (summary, per_class, cells) = evaluate_subset(&base, detections, cfg);
    let illumination = if cfg.illumination {
        LightVision::ALL
            .iter()
            .map(|&level| {
                let sub = base.with_light_vision(level);
                IlluminationReport {
                    light_vision: level,
                    sequences: sub.sequences.len(),
                    summary: evaluate_subset(&sub, detections, cfg).0,
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    EvalReport {
        measure: cfg.measure,
        params: cfg.params,
        thresholds: cfg.thresholds.clone(),
        recall_points: cfg.recall_points,
        max_detections: cfg.max_detections,
        scale_bins: cfg.scale_bins.clone(),
        modality: cfg.modality,
        light_vision: cfg.light_vision,
        interpolated: cfg.interpolated,
        defined: summary.ap.is_some(),
        summary,
        per_class,
        illumination,
        cells,
    }
}

/// Ground truth and detections of one (class, image) pair.
type Group<'a> = (Vec<&'a Annotation>, Vec<&'a Detection>);

fn evaluate_subset(ds: &Dataset, detections: &[Detection], cfg: &EvalConfig) -> (Summary, Vec<ClassReport>, Vec<Cell>) {
    let bins: Vec<ScaleBin> = std::iter::once(ScaleBin::all()).chain(cfg.scale_bins.iter().cloned()).collect();
    let images: BTreeSet<u64> = ds.images.iter().map(|i| i.id).collect();
    let mut classes: BTreeSet<u64> = ds.categories.iter().map(|c| c.id).collect();

    let mut groups: BTreeMap<(u64, u64), Group> = BTreeMap::new();
    for a in &ds.annotations {
        classes.insert(a.class_id);
        groups.entry((a.class_id, a.image_id)).or_default().0.push(a);
    }
    for d in detections.iter().filter(|d| images.contains(&d.image_id)) {
        classes.insert(d.class_id);
        groups.entry((d.class_id, d.image_id)).or_default().1.push(d);
    }

    let groups: Vec<_> = groups.into_iter().collect();
    let units: Vec<Unit> = groups
        .par_iter()
        .map(|((class_id, _), (gts, dets))| match_unit(*class_id, gts, dets, &bins, cfg))
        .collect();

    let classes: Vec<u64> = classes.into_iter().collect();
    let mut by_class: BTreeMap<u64, Vec<&Unit>> = BTreeMap::new();
    for u in &units {
        by_class.entry(u.class_id).or_default().push(u);
    }
    let empty = Vec::new();
    let keys: Vec<(u64, usize, usize)> = classes
        .iter()
        .flat_map(|&c| (0..bins.len()).flat_map(move |b| (0..cfg.thresholds.len()).map(move |t| (c, b, t))))
        .collect();
    let cells: Vec<Option<Cell>> = keys
        .par_iter()
        .map(|&(c, b, t)| {
            let units = by_class.get(&c).unwrap_or(&empty);
            accumulate(units, b, t, cfg.recall_points).map(|(ap, recall, n_gt, n_det)| Cell {
                class_id: c,
                bin: bins[b].name.clone(),
                threshold: cfg.thresholds[t],
                n_gt,
                n_det,
                ap,
                recall,
            })
        })
        .collect();

    // Dense view `[class][bin][threshold]` for the means.
    let nb = bins.len();
    let nt = cfg.thresholds.len();
    let at = |ci: usize, b: usize, t: usize| cells[(ci * nb + b) * nt + t].as_ref();

    let summarize = |class_range: &[usize]| -> Summary {
        let mean = |b: usize, ts: &[usize], f: fn(&Cell) -> f64| -> Option<f64> {
            let mut sum = 0.0;
            let mut n = 0usize;
            for &ci in class_range {
                for &t in ts {
                    if let Some(cell) = at(ci, b, t) {
                        sum += f(cell);
                        n += 1;
                    }
                }
            }
            (n > 0).then(|| sum / n as f64)
        };
        let all_t: Vec<usize> = (0..nt).collect();
        let single = |v: f64| cfg.threshold_index(v).map(|t| vec![t]);
        Summary {
            ap: mean(0, &all_t, |c| c.ap),
            ap50: single(0.5).and_then(|t| mean(0, &t, |c| c.ap)),
            ap75: single(0.75).and_then(|t| mean(0, &t, |c| c.ap)),
            ap_scale: (1..nb)
                .map(|b| BinValue {
                    bin: bins[b].name.clone(),
                    ap: mean(b, &all_t, |c| c.ap),
                })
                .collect(),
            ar: mean(0, &all_t, |c| c.recall),
        }
    };

    let all_classes: Vec<usize> = (0..classes.len()).collect();
    let summary = summarize(&all_classes);
    let names: BTreeMap<u64, &str> = ds.categories.iter().map(|c| (c.id, c.name.as_str())).collect();
    let per_class = classes
        .iter()
        .enumerate()
        .map(|(ci, &class_id)| ClassReport {
            class_id,
            name: names.get(&class_id).map_or_else(|| class_id.to_string(), |n| n.to_string()),
            n_gt: at(ci, 0, 0).map_or(0, |c| c.n_gt),
            summary: summarize(&[ci]),
        })
        .collect();
    (summary, per_class, cells.into_iter().flatten().collect())
}

fn match_unit(class_id: u64, gts: &[&Annotation], dets: &[&Detection], bins: &[ScaleBin], cfg: &EvalConfig) -> Unit {
    let mut dets: Vec<&Detection> = dets.to_vec();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    dets.truncate(cfg.max_detections);

    let n_gt = gts.len();
    let affinity: Vec<f64> = dets
        .iter()
        .flat_map(|d| gts.iter().map(move |g| cfg.measure.eval(&d.bbox, &g.bbox, &cfg.params)))
        .collect();
    let base_ignore: Vec<bool> = gts
        .iter()
        .map(|g| g.ignore || (g.interpolated && cfg.interpolated == InterpolatedGt::Ignore))
        .collect();

    let mut status = Vec::with_capacity(bins.len());
    let mut counts = Vec::with_capacity(bins.len());
    for bin in bins {
        let ignore: Vec<bool> = gts
            .iter()
            .zip(&base_ignore)
            .map(|(g, &base)| base || !bin.contains(g.bbox.area()))
            .collect();
        counts.push(ignore.iter().filter(|&&i| !i).count());
        let per_t = cfg
            .thresholds
            .iter()
            .map(|&t| {
                matching::greedy(&affinity, dets.len(), n_gt, &ignore, t)
                    .into_iter()
                    .zip(&dets)
                    .map(|(m, d)| match m {
                        Some(g) if ignore[g] => Status::Ignored,
                        Some(_) => Status::Tp,
                        None if !bin.contains(d.bbox.area()) => Status::Ignored,
                        None => Status::Fp,
                    })
                    .collect()
            })
            .collect();
        status.push(per_t);
    }
    Unit {
        class_id,
        scores: dets.iter().map(|d| d.score).collect(),
        status,
        n_gt: counts,
    }
}

/// Returns `(ap, final recall, ground truth, scored detections)` or `None`
/// when the cell has no non-ignored ground truth.
fn accumulate(units: &[&Unit], bin: usize, t: usize, recall_points: usize) -> Option<(f64, f64, usize, usize)> {
    let n_gt: usize = units.iter().map(|u| u.n_gt[bin]).sum();
    if n_gt == 0 {
        return None;
    }
    let mut scored: Vec<(f64, bool)> = units
        .iter()
        .flat_map(|u| {
            u.scores
                .iter()
                .zip(&u.status[bin][t])
                .filter(|(_, s)| **s != Status::Ignored)
                .map(|(&score, s)| (score, *s == Status::Tp))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let hits: Vec<bool> = scored.iter().map(|s| s.1).collect();
    let (ap, recall) = average_precision(&hits, n_gt, recall_points);
    Some((ap, recall, n_gt, hits.len()))
}

/// Interpolated average precision of a ranked hit list against `n_gt`
/// positives, sampled at `recall_points` evenly spaced recall levels in
/// `[0, 1]`. Also returns the final recall.
pub fn average_precision(hits: &[bool], n_gt: usize, recall_points: usize) -> (f64, f64) {
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut rc = Vec::with_capacity(hits.len());
    let mut pr = Vec::with_capacity(hits.len());
    for &hit in hits {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        rc.push(tp as f64 / n_gt as f64);
        pr.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (0..pr.len().saturating_sub(1)).rev() {
        if pr[i + 1] > pr[i] {
            pr[i] = pr[i + 1];
        }
    }
    let steps = (recall_points - 1) as f64;
    let mut sum = 0.0;
    for k in 0..recall_points {
        let r = k as f64 / steps;
        let idx = rc.partition_point(|&x| x < r);
        if idx < pr.len() {
            sum += pr[idx];
        }
    }
    (sum / recall_points as f64, rc.last().copied().unwrap_or(0.0))
}
