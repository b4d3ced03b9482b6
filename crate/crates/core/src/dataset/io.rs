//! JSON ground-truth and prediction files.
//!
//! Ground truth follows the COCO detection layout (`images`, `annotations`,
//! `categories`) extended with `schema_version`, a `sequences` table carrying
//! sequence-level attributes, and per-record `sequence_id`, `frame_id`,
//! `modality` and `track_id`. Boxes are `[x, y, w, h]` with `(x, y)` the
//! top-left corner. Plain COCO files load too: every extension has a default.
//!
//! Predictions are a COCO results array of
//! `{image_id, category_id, bbox, score}` objects, or an object with a
//! `detections` array of the same.
//!
//! Every record is validated individually; all problems are returned together
//! as [`LoadError::Invalid`] with a locator naming the offending record.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Annotation, Category, Dataset, Detection, ImageInfo, Modality, Occlusion, SequenceMeta};
use crate::bbox::BBox;
use crate::error::{LoadError, ValidationIssue};

pub const SCHEMA_VERSION: &str = "1.0";

/// Boxes may overhang the image by this many pixels and are then clipped.
pub const CLIP_TOLERANCE: f64 = 0.5;

const DEFAULT_SEQUENCE: &str = "default";

/// Raw top-level layout of a ground-truth file.
#[derive(Debug, Deserialize)]
pub struct GroundTruthFile {
    #[serde(default)]
    pub schema_version: Option<String>,
    #[serde(default)]
    pub sequences: Vec<Value>,
    pub images: Vec<Value>,
    #[serde(default)]
    pub categories: Vec<Value>,
    #[serde(default)]
    pub annotations: Vec<Value>,
}

#[derive(Debug, Deserialize)]
struct ImageRecord {
    id: u64,
    #[serde(default)]
    sequence_id: Option<String>,
    #[serde(default)]
    frame_id: Option<i64>,
    #[serde(default)]
    modality: Option<Modality>,
    width: f64,
    height: f64,
    #[serde(default)]
    file_name: Option<String>,
}

#[derive(Debug, Deserialize)]
struct AnnotationRecord {
    #[serde(default)]
    id: Option<u64>,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    #[serde(default)]
    track_id: Option<u64>,
    #[serde(default)]
    ignore: bool,
    #[serde(default)]
    iscrowd: Option<Value>,
    #[serde(default)]
    interpolated: bool,
    #[serde(default)]
    clipped: bool,
    #[serde(default)]
    occlusion: Option<Occlusion>,
}

/// One prediction in COCO results form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub image_id: u64,
    pub category_id: u64,
    pub bbox: [f64; 4],
    pub score: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PredictionFile {
    List(Vec<Value>),
    Wrapped { detections: Vec<Value> },
}

#[derive(Default)]
struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn push(&mut self, record: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue {
            record: record.into(),
            message: message.into(),
        });
    }

    fn finish<T>(self, origin: &Path, value: T) -> Result<T, LoadError> {
        if self.0.is_empty() {
            Ok(value)
        } else {
            Err(LoadError::Invalid {
                path: origin.to_path_buf(),
                issues: self.0,
            })
        }
    }
}

fn record<T: DeserializeOwned>(v: &Value, locator: &str, issues: &mut Issues) -> Option<T> {
    match T::deserialize(v) {
        Ok(r) => Some(r),
        Err(e) => {
            issues.push(locator, e.to_string());
            None
        }
    }
}

fn truthy(v: &Option<Value>) -> bool {
    match v {
        Some(Value::Bool(b)) => *b,
        Some(Value::Number(n)) => n.as_f64().is_some_and(|x| x != 0.0),
        _ => false,
    }
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Dataset, LoadError> {
    let path = path.as_ref();
    parse_ground_truth(&read(path)?, path)
}

/// Parses and validates ground truth; `origin` labels errors.
pub fn parse_ground_truth(text: &str, origin: &Path) -> Result<Dataset, LoadError> {
    let file: GroundTruthFile = serde_json::from_str(text).map_err(|source| LoadError::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    let mut issues = Issues::default();
    if let Some(v) = &file.schema_version {
        if v.split('.').next() != SCHEMA_VERSION.split('.').next() {
            issues.push("schema_version", format!("unsupported schema version `{v}`"));
        }
    }

    let mut categories: Vec<Category> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, v) in file.categories.iter().enumerate() {
        let loc = format!("categories[{i}]");
        if let Some(c) = record::<Category>(v, &loc, &mut issues) {
            if !seen.insert(c.id) {
                issues.push(loc, format!("duplicate category id {}", c.id));
            } else {
                categories.push(c);
            }
        }
    }
    let declared_categories = !file.categories.is_empty();

    let mut sequences: Vec<SequenceMeta> = Vec::new();
    for (i, v) in file.sequences.iter().enumerate() {
        let loc = format!("sequences[{i}]");
        if let Some(s) = record::<SequenceMeta>(v, &loc, &mut issues) {
            if sequences.iter().any(|x| x.id == s.id) {
                issues.push(loc, format!("duplicate sequence id `{}`", s.id));
            } else {
                sequences.push(s);
            }
        }
    }

    let mut images: Vec<ImageInfo> = Vec::new();
    let mut image_ids = BTreeSet::new();
    let mut frame_slots = BTreeSet::new();
    for (i, v) in file.images.iter().enumerate() {
        let loc = format!("images[{i}]");
        let Some(r) = record::<ImageRecord>(v, &loc, &mut issues) else {
            continue;
        };
        let loc = format!("images[{i}] (id {})", r.id);
        if !(r.width > 0.0 && r.height > 0.0 && r.width.is_finite() && r.height.is_finite()) {
            issues.push(&loc, format!("image size must be positive, got {}x{}", r.width, r.height));
            continue;
        }
        let img = ImageInfo {
            id: r.id,
            sequence_id: r.sequence_id.unwrap_or_else(|| DEFAULT_SEQUENCE.to_string()),
            frame_id: r.frame_id.unwrap_or(r.id as i64),
            modality: r.modality.unwrap_or(Modality::Visible),
            width: r.width,
            height: r.height,
            file_name: r.file_name,
        };
        if !image_ids.insert(img.id) {
            issues.push(loc, format!("duplicate image id {}", img.id));
            continue;
        }
        if !frame_slots.insert((img.sequence_id.clone(), img.frame_id, img.modality)) {
            issues.push(
                loc,
                format!(
                    "duplicate image for sequence `{}` frame {} ({})",
                    img.sequence_id, img.frame_id, img.modality
                ),
            );
            continue;
        }
        if !sequences.iter().any(|s| s.id == img.sequence_id) {
            sequences.push(SequenceMeta::bare(img.sequence_id.clone()));
        }
        images.push(img);
    }
    let image_by_id: HashMap<u64, &ImageInfo> = images.iter().map(|i| (i.id, i)).collect();

    let mut annotations = Vec::new();
    let mut ann_ids = BTreeSet::new();
    let mut track_slots = BTreeSet::new();
    let mut derived_categories = BTreeSet::new();
    for (i, v) in file.annotations.iter().enumerate() {
        let loc = format!("annotations[{i}]");
        let Some(r) = record::<AnnotationRecord>(v, &loc, &mut issues) else {
            continue;
        };
        let id = r.id.unwrap_or(i as u64 + 1);
        let loc = format!("annotations[{i}] (id {id})");
        if !ann_ids.insert(id) {
            issues.push(&loc, format!("duplicate annotation id {id}"));
            continue;
        }
        let Some(img) = image_by_id.get(&r.image_id) else {
            issues.push(&loc, format!("unknown image_id {}", r.image_id));
            continue;
        };
        if declared_categories && !seen.contains(&r.category_id) {
            issues.push(&loc, format!("unknown category_id {}", r.category_id));
            continue;
        }
        let [x, y, w, h] = r.bbox;
        let bbox = match BBox::from_xywh(x, y, w, h) {
            Ok(b) => b,
            Err(e) => {
                issues.push(&loc, format!("invalid bbox: {e}"));
                continue;
            }
        };
        let c = bbox.corners();
        let overhang = (-c.x1).max(-c.y1).max(c.x2 - img.width).max(c.y2 - img.height);
        if overhang > CLIP_TOLERANCE {
            issues.push(
                &loc,
                format!(
                    "bbox exceeds {}x{} image by {overhang} px (tolerance {CLIP_TOLERANCE})",
                    img.width, img.height
                ),
            );
            continue;
        }
        let Some(clipped_box) = bbox.clip(img.width, img.height) else {
            issues.push(&loc, "bbox has no area inside the image");
            continue;
        };
        if let Some(t) = r.track_id {
            if !track_slots.insert((img.sequence_id.clone(), img.frame_id, t, img.modality)) {
                issues.push(
                    &loc,
                    format!(
                        "duplicate track {t} in sequence `{}` frame {} ({})",
                        img.sequence_id, img.frame_id, img.modality
                    ),
                );
                continue;
            }
        }
        derived_categories.insert(r.category_id);
        annotations.push(Annotation {
            id,
            image_id: img.id,
            sequence_id: img.sequence_id.clone(),
            frame_id: img.frame_id,
            track_id: r.track_id,
            class_id: r.category_id,
            bbox: clipped_box,
            modality: img.modality,
            ignore: r.ignore || truthy(&r.iscrowd),
            interpolated: r.interpolated,
            clipped: r.clipped || clipped_box != bbox,
            occlusion: r.occlusion,
        });
    }
    if !declared_categories {
        categories = derived_categories
            .into_iter()
            .map(|id| Category {
                id,
                name: id.to_string(),
            })
            .collect();
    }
    issues.finish(origin, Dataset {
        sequences,
        images,
        categories,
        annotations,
    })
}

pub fn load_predictions(path: impl AsRef<Path>, gt: &Dataset) -> Result<Vec<Detection>, LoadError> {
    let path = path.as_ref();
    parse_predictions(&read(path)?, path, gt)
}

/// Parses predictions and resolves each against the ground-truth images.
pub fn parse_predictions(text: &str, origin: &Path, gt: &Dataset) -> Result<Vec<Detection>, LoadError> {
    let file: PredictionFile = serde_json::from_str(text).map_err(|source| LoadError::Parse {
        path: origin.to_path_buf(),
        source,
    })?;
    let values = match file {
        PredictionFile::List(v) => v,
        PredictionFile::Wrapped { detections } => detections,
    };
    let images = gt.image_index();
    let classes: BTreeSet<u64> = gt.categories.iter().map(|c| c.id).collect();
    let mut issues = Issues::default();
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        let loc = format!("predictions[{i}]");
        let Some(r) = record::<PredictionRecord>(v, &loc, &mut issues) else {
            continue;
        };
        let loc = format!("predictions[{i}] (image_id {}, category_id {})", r.image_id, r.category_id);
        if !(0.0..=1.0).contains(&r.score) {
            issues.push(&loc, format!("score {} outside [0, 1]", r.score));
            continue;
        }
        let Some(img) = images.get(&r.image_id) else {
            issues.push(&loc, format!("unknown image_id {}", r.image_id));
            continue;
        };
        if !classes.contains(&r.category_id) {
            issues.push(&loc, format!("unknown category_id {}", r.category_id));
            continue;
        }
        let [x, y, w, h] = r.bbox;
        let bbox = match BBox::from_xywh(x, y, w, h) {
            Ok(b) => b,
            Err(e) => {
                issues.push(&loc, format!("invalid bbox: {e}"));
                continue;
            }
        };
        out.push(Detection {
            image_id: img.id,
            sequence_id: img.sequence_id.clone(),
            frame_id: img.frame_id,
            class_id: r.category_id,
            bbox,
            score: r.score,
            modality: img.modality,
        });
    }
    issues.finish(origin, out)
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Serialize)]
struct AnnotationOut {
    id: u64,
    image_id: u64,
    category_id: u64,
    bbox: [f64; 4],
    area: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    track_id: Option<u64>,
    #[serde(skip_serializing_if = "is_false")]
    ignore: bool,
    #[serde(skip_serializing_if = "is_false")]
    interpolated: bool,
    #[serde(skip_serializing_if = "is_false")]
    clipped: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    occlusion: Option<Occlusion>,
}

#[derive(Serialize)]
struct GroundTruthOut<'a> {
    schema_version: &'static str,
    sequences: &'a [SequenceMeta],
    images: &'a [ImageInfo],
    categories: &'a [Category],
    annotations: Vec<AnnotationOut>,
}

/// Serializes a dataset in the extended schema. Loading the output yields the
/// same dataset.
pub fn write_ground_truth(ds: &Dataset) -> String {
    let out = GroundTruthOut {
        schema_version: SCHEMA_VERSION,
        sequences: &ds.sequences,
        images: &ds.images,
        categories: &ds.categories,
        annotations: ds
            .annotations
            .iter()
            .map(|a| AnnotationOut {
                id: a.id,
                image_id: a.image_id,
                category_id: a.class_id,
                bbox: a.bbox.to_xywh(),
                area: a.bbox.area(),
                track_id: a.track_id,
                ignore: a.ignore,
                interpolated: a.interpolated,
                clipped: a.clipped,
                occlusion: a.occlusion,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("ground truth serializes")
}

/// Serializes detections as a COCO results array.
pub fn write_predictions(dets: &[Detection]) -> String {
    let records: Vec<PredictionRecord> = dets
        .iter()
        .map(|d| PredictionRecord {
            image_id: d.image_id,
            category_id: d.class_id,
            bbox: d.bbox.to_xywh(),
            score: d.score,
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("predictions serialize")
}
