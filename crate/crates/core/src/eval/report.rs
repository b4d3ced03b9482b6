use serde::Serialize;

use super::{InterpolatedGt, ScaleBin, ALL_BIN};
use crate::dataset::{LightVision, Modality};
use crate::metrics::{Measure, MeasureParams};

/// Absent values (`None`) mark means with no populated cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// Mean over thresholds and classes.
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap_scale: Vec<BinValue>,
    /// Mean final recall over thresholds and classes.
    pub ar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinValue {
    pub bin: String,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class_id: u64,
    pub name: String,
    pub n_gt: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IlluminationReport {
    pub light_vision: LightVision,
    pub sequences: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

/// One populated `(class, bin, threshold)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub class_id: u64,
    pub bin: String,
    pub threshold: f64,
    /// Non-ignored ground truth.
    pub n_gt: usize,
    /// Detections scored as TP or FP.
    pub n_det: usize,
    pub ap: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub measure: Measure,
    pub params: MeasureParams,
    pub thresholds: Vec<f64>,
    pub recall_points: usize,
    pub max_detections: usize,
    pub scale_bins: Vec<ScaleBin>,
    pub modality: Option<Modality>,
    pub light_vision: Option<LightVision>,
    pub interpolated: InterpolatedGt,
    /// False when no ground truth survives filtering.
    pub defined: bool,
    pub summary: Summary,
    pub per_class: Vec<ClassReport>,
    pub illumination: Vec<IlluminationReport>,
    pub cells: Vec<Cell>,
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Flat `measure,class,bin,threshold,metric,value` rows. Absent values are
    /// empty. Summary rows use class `all` and threshold `mean`.
    pub fn to_csv(&self) -> String {
        let m = self.measure.name();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["measure", "class", "bin", "threshold", "metric", "value"])
            .expect("in-memory csv");
        let mut row = |class: &str, bin: &str, threshold: &str, metric: &str, value: String| {
            w.write_record([m, class, bin, threshold, metric, value.as_str()])
                .expect("in-memory csv");
        };
        let mut summary_rows = |class: &str, s: &Summary, singles: bool| {
            row(class, ALL_BIN, "mean", "AP", fmt(s.ap));
            if singles {
                row(class, ALL_BIN, "0.5", "AP", fmt(s.ap50));
                row(class, ALL_BIN, "0.75", "AP", fmt(s.ap75));
            }
            for b in &s.ap_scale {
                row(class, &b.bin, "mean", "AP", fmt(b.ap));
            }
            row(class, ALL_BIN, "mean", "AR", fmt(s.ar));
        };
        summary_rows(ALL_BIN, &self.summary, true);
        for c in &self.per_class {
            summary_rows(&c.class_id.to_string(), &c.summary, false);
        }
        for l in &self.illumination {
            row(ALL_BIN, ALL_BIN, "mean", &format!("AP_light_{}", l.light_vision), fmt(l.summary.ap));
        }
        for c in &self.cells {
            let class = c.class_id.to_string();
            let t = c.threshold.to_string();
            row(&class, &c.bin, &t, "AP", c.ap.to_string());
            row(&class, &c.bin, &t, "recall", c.recall.to_string());
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}
