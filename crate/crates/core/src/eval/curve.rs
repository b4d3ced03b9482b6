use serde::Serialize;

use crate::bbox::BBox;
use crate::error::ConfigError;
use crate::metrics::{Measure, MeasureParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub size: f64,
    pub deviation: u32,
    pub value: f64,
}

/// Measure value between a `size x size` ground-truth box and its copy
/// shifted by `(+d, +d)`, for `d = 0..=max_dev`.
pub fn deviation_curve(
    size: f64,
    max_dev: u32,
    measure: Measure,
    params: &MeasureParams,
) -> Result<Vec<CurvePoint>, ConfigError> {
    if !(size.is_finite() && size > 0.0) {
        return Err(ConfigError::NonPositive { name: "size", value: size });
    }
    let gt = BBox::new(size / 2.0, size / 2.0, size, size).expect("positive size");
    Ok((0..=max_dev)
        .map(|d| {
            let p = gt.translated(d as f64, d as f64).expect("finite shift");
            CurvePoint {
                size,
                deviation: d,
                value: measure.eval(&p, &gt, params),
            }
        })
        .collect())
}

/// `size,deviation,measure,value` rows.
pub fn curves_csv(curves: &[(Measure, Vec<CurvePoint>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["size", "deviation", "measure", "value"]).expect("in-memory csv");
    for (measure, points) in curves {
        for p in points {
            w.write_record([p.size.to_string(), p.deviation.to_string(), measure.name().to_string(), p.value.to_string()])
                .expect("in-memory csv");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}
