//! Brute-force reference evaluator and random micro-fixtures.
//!
//! The reference re-derives every cell from scratch: matching picks the best
//! candidate by sorting `(ignored, -affinity, index)` keys, and the PR table is
//! rebuilt for every rank cut, taking the best precision among cuts whose
//! recall reaches each sample point.

#![allow(dead_code)]

use rand::Rng;
use safit_core::dataset::{Category, ImageInfo, SequenceMeta};
use safit_core::{Annotation, BBox, Dataset, Detection, LightVision, Measure, MeasureParams, Modality};

pub const IMAGE_W: f64 = 640.0;
pub const IMAGE_H: f64 = 512.0;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub ds: Dataset,
    pub dets: Vec<Detection>,
}

fn quarter(v: f64) -> f64 {
    (v * 4.0).round() / 4.0
}

fn random_box(rng: &mut impl Rng) -> BBox {
    let side = 2f64.powf(rng.random_range(1.5..7.2));
    let w = quarter((side * rng.random_range(0.7..1.4)).clamp(1.0, 200.0));
    let h = quarter((side * rng.random_range(0.7..1.4)).clamp(1.0, 200.0));
    let x = quarter(rng.random_range(0.0..IMAGE_W - w));
    let y = quarter(rng.random_range(0.0..IMAGE_H - h));
    BBox::from_xywh(x, y, w, h).unwrap()
}

fn jitter(rng: &mut impl Rng, b: &BBox) -> BBox {
    let w = quarter((b.w() * rng.random_range(0.75..1.3)).max(1.0));
    let h = quarter((b.h() * rng.random_range(0.75..1.3)).max(1.0));
    let cx = b.cx() + rng.random_range(-0.25..0.25) * b.w();
    let cy = b.cy() + rng.random_range(-0.25..0.25) * b.h();
    let x = quarter((cx - w / 2.0).clamp(0.0, IMAGE_W - w));
    let y = quarter((cy - h / 2.0).clamp(0.0, IMAGE_H - h));
    BBox::from_xywh(x, y, w, h).unwrap()
}

/// 1 to 4 images, at most 4 ground truth and 6 detections per image, two
/// classes. Scores come from a coarse grid so ties occur.
pub fn random_fixture(rng: &mut impl Rng) -> Fixture {
    let n_images = rng.random_range(1..=4u64);
    let light = LightVision::ALL[rng.random_range(0..4)];
    let mut ds = Dataset {
        sequences: vec![SequenceMeta {
            light_vision: Some(light),
            ..SequenceMeta::bare("seq0")
        }],
        images: vec![],
        categories: vec![
            Category { id: 1, name: "car".into() },
            Category { id: 2, name: "person".into() },
        ],
        annotations: vec![],
    };
    let mut dets = Vec::new();
    for image_id in 1..=n_images {
        ds.images.push(ImageInfo {
            id: image_id,
            sequence_id: "seq0".into(),
            frame_id: image_id as i64,
            modality: Modality::Thermal,
            width: IMAGE_W,
            height: IMAGE_H,
            file_name: None,
        });
        let first = ds.annotations.len();
        for _ in 0..rng.random_range(0..=4) {
            let id = ds.annotations.len() as u64 + 1;
            ds.annotations.push(Annotation {
                id,
                image_id,
                sequence_id: "seq0".into(),
                frame_id: image_id as i64,
                track_id: None,
                class_id: rng.random_range(1..=2),
                bbox: random_box(rng),
                modality: Modality::Thermal,
                ignore: rng.random_bool(0.15),
                interpolated: false,
                clipped: false,
                occlusion: None,
            });
        }
        let gts = ds.annotations[first..].to_vec();
        for _ in 0..rng.random_range(0..=6) {
            let (class_id, bbox) = if !gts.is_empty() && rng.random_bool(0.75) {
                let g = &gts[rng.random_range(0..gts.len())];
                let class = if rng.random_bool(0.9) { g.class_id } else { 3 - g.class_id };
                (class, jitter(rng, &g.bbox))
            } else {
                (rng.random_range(1..=2), random_box(rng))
            };
            dets.push(Detection {
                image_id,
                sequence_id: "seq0".into(),
                frame_id: image_id as i64,
                class_id,
                bbox,
                score: rng.random_range(1..=20) as f64 / 20.0,
                modality: Modality::Thermal,
            });
        }
    }
    Fixture { ds, dets }
}

/// Detections identical to every ground-truth box, all scored 1.
pub fn perfect(ds: &Dataset) -> Vec<Detection> {
    ds.annotations
        .iter()
        .map(|a| Detection {
            image_id: a.image_id,
            sequence_id: a.sequence_id.clone(),
            frame_id: a.frame_id,
            class_id: a.class_id,
            bbox: a.bbox,
            score: 1.0,
            modality: a.modality,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Label {
    Tp,
    Fp,
    Skip,
}

pub struct Protocol {
    pub measure: Measure,
    pub params: MeasureParams,
    pub max_det: usize,
    pub recall_points: usize,
}

/// `(ap, final recall)` of one cell, or `None` without non-ignored ground truth.
pub fn oracle_cell(fx: &Fixture, p: &Protocol, class: u64, lo: f64, hi: f64, t: f64) -> Option<(f64, f64)> {
    let in_bin = |b: &BBox| lo <= b.area() && b.area() < hi;
    let mut image_ids: Vec<u64> = fx.ds.images.iter().map(|i| i.id).collect();
    image_ids.sort();
    let mut n_pos = 0usize;
    let mut ranked: Vec<(f64, Label)> = Vec::new();
    for img in image_ids {
        let gts: Vec<&Annotation> = fx
            .ds
            .annotations
            .iter()
            .filter(|a| a.image_id == img && a.class_id == class)
            .collect();
        let ignored: Vec<bool> = gts.iter().map(|g| g.ignore || !in_bin(&g.bbox)).collect();
        n_pos += ignored.iter().filter(|i| !**i).count();

        let mut dets: Vec<&Detection> = fx.dets.iter().filter(|d| d.image_id == img && d.class_id == class).collect();
        // Insertion sort: stable, descending score.
        for i in 1..dets.len() {
            let mut j = i;
            while j > 0 && dets[j - 1].score < dets[j].score {
                dets.swap(j - 1, j);
                j -= 1;
            }
        }
        dets.truncate(p.max_det);

        let mut used = vec![false; gts.len()];
        for d in dets {
            let mut cands: Vec<(bool, f64, usize)> = gts
                .iter()
                .enumerate()
                .filter(|(g, _)| !used[*g])
                .map(|(g, gt)| (ignored[g], -p.measure.eval(&d.bbox, &gt.bbox, &p.params), g))
                .filter(|c| -c.1 >= t)
                .collect();
            cands.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
            let label = match cands.first() {
                Some(&(ign, _, g)) => {
                    used[g] = true;
                    if ign {
                        Label::Skip
                    } else {
                        Label::Tp
                    }
                }
                None if !in_bin(&d.bbox) => Label::Skip,
                None => Label::Fp,
            };
            ranked.push((d.score, label));
        }
    }
    if n_pos == 0 {
        return None;
    }
    // Merge across images: stable, descending score.
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| ranked[b].0.total_cmp(&ranked[a].0).then(a.cmp(&b)));
    let labels: Vec<Label> = order.into_iter().map(|i| ranked[i].1).filter(|l| *l != Label::Skip).collect();

    let mut cuts: Vec<(f64, f64)> = Vec::new();
    for k in 1..=labels.len() {
        let tp = labels[..k].iter().filter(|l| **l == Label::Tp).count();
        cuts.push((tp as f64 / n_pos as f64, tp as f64 / k as f64));
    }
    let steps = (p.recall_points - 1) as f64;
    let mut sum = 0.0;
    for i in 0..p.recall_points {
        let r = i as f64 / steps;
        let best = cuts
            .iter()
            .filter(|c| c.0 >= r)
            .map(|c| c.1)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
        sum += best.unwrap_or(0.0);
    }
    let recall = cuts.last().map_or(0.0, |c| c.0);
    Some((sum / p.recall_points as f64, recall))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ar: Option<f64>,
    pub ap_scale: Vec<Option<f64>>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Header means over classes 1 and 2 and the given thresholds.
pub fn oracle_summary(fx: &Fixture, p: &Protocol, thresholds: &[f64], bins: &[(f64, f64)]) -> OracleSummary {
    let classes = [1u64, 2];
    let cell = |c: u64, (lo, hi): (f64, f64), t: f64| oracle_cell(fx, p, c, lo, hi, t);
    let all = (0.0, f64::INFINITY);
    let over = |bin: (f64, f64), ts: &[f64], pick: fn((f64, f64)) -> f64| {
        mean(classes.iter().flat_map(|&c| ts.iter().map(move |&t| cell(c, bin, t).map(pick))))
    };
    OracleSummary {
        ap: over(all, thresholds, |c| c.0),
        ap50: over(all, &[0.5], |c| c.0),
        ap75: over(all, &[0.75], |c| c.0),
        ar: over(all, thresholds, |c| c.1),
        ap_scale: bins.iter().map(|&b| over(b, thresholds, |c| c.0)).collect(),
    }
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}
