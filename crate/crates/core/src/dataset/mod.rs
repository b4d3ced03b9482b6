//! Annotation and prediction data model.
//!
//! A [`Dataset`] holds validated ground truth: sequences with their
//! sequence-level attributes, images (one per frame and modality),
//! categories and annotations. Records are denormalized on load so that each
//! annotation and detection carries its sequence, frame and modality.

mod homography;
mod io;
mod stats;
mod taxonomy;
mod track;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;

pub use homography::{warp_bbox, Homography};
pub use io::{
    load_ground_truth, load_predictions, parse_ground_truth, parse_predictions, write_ground_truth,
    write_predictions, GroundTruthFile, PredictionRecord, CLIP_TOLERANCE, SCHEMA_VERSION,
};
pub use stats::{dataset_stats, ClassScaleHistogram, DatasetStats, SequenceStats};
pub use taxonomy::{density_level, scale_level, DensityLevel, ScaleLevel};
pub use track::{interpolate_track, FilledTrack, Gap, TrackPoint, MAX_FILL_GAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visible,
    Thermal,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Visible => "visible",
            Modality::Thermal => "thermal",
        })
    }
}

/// Sequence-level illumination attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightVision {
    High,
    Medium,
    Low,
    Invisible,
}

impl LightVision {
    pub const ALL: [LightVision; 4] = [
        LightVision::High,
        LightVision::Medium,
        LightVision::Low,
        LightVision::Invisible,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LightVision::High => "high",
            LightVision::Medium => "medium",
            LightVision::Low => "low",
            LightVision::Invisible => "invisible",
        }
    }
}

impl fmt::Display for LightVision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LightVision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "high" | "h" => Ok(LightVision::High),
            "medium" | "m" => Ok(LightVision::Medium),
            "low" | "l" => Ok(LightVision::Low),
            "invisible" | "in" => Ok(LightVision::Invisible),
            other => Err(format!("unknown light-vision level `{other}`")),
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "visible" | "rgb" => Ok(Modality::Visible),
            "thermal" | "ir" => Ok(Modality::Thermal),
            other => Err(format!("unknown modality `{other}`")),
        }
    }
}

/// Optional occlusion severity; stored, not used by evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occlusion {
    Slight,
    Moderate,
    Heavy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceMeta {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub light_vision: Option<LightVision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
}

impl SequenceMeta {
    pub fn bare(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            scene: None,
            light_vision: None,
            fps: None,
            width: None,
            height: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub id: u64,
    pub sequence_id: String,
    pub frame_id: i64,
    pub modality: Modality,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: u64,
    pub name: String,
}

/// Ground-truth box.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub id: u64,
    pub image_id: u64,
    pub sequence_id: String,
    pub frame_id: i64,
    pub track_id: Option<u64>,
    pub class_id: u64,
    pub bbox: BBox,
    pub modality: Modality,
    pub ignore: bool,
    /// Filled in by short-occlusion interpolation rather than drawn by hand.
    pub interpolated: bool,
    /// Trimmed to the image bounds on load.
    pub clipped: bool,
    pub occlusion: Option<Occlusion>,
}

/// Scored predicted box.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: u64,
    pub sequence_id: String,
    pub frame_id: i64,
    pub class_id: u64,
    pub bbox: BBox,
    pub score: f64,
    pub modality: Modality,
}

/// Validated ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<SequenceMeta>,
    pub images: Vec<ImageInfo>,
    pub categories: Vec<Category>,
    pub annotations: Vec<Annotation>,
}

impl Dataset {
    pub fn sequence(&self, id: &str) -> Option<&SequenceMeta> {
        self.sequences.iter().find(|s| s.id == id)
    }

    pub fn image_index(&self) -> BTreeMap<u64, &ImageInfo> {
        self.images.iter().map(|i| (i.id, i)).collect()
    }

    pub fn class_ids(&self) -> Vec<u64> {
        self.categories.iter().map(|c| c.id).collect()
    }

    /// Keeps images (and their annotations) accepted by `keep`.
    pub fn filter_images(&self, keep: impl Fn(&ImageInfo) -> bool) -> Dataset {
        let images: Vec<ImageInfo> = self.images.iter().filter(|i| keep(i)).cloned().collect();
        let ids: BTreeSet<u64> = images.iter().map(|i| i.id).collect();
        let seqs: BTreeSet<&str> = images.iter().map(|i| i.sequence_id.as_str()).collect();
        Dataset {
            sequences: self
                .sequences
                .iter()
                .filter(|s| seqs.contains(s.id.as_str()))
                .cloned()
                .collect(),
            images,
            categories: self.categories.clone(),
            annotations: self
                .annotations
                .iter()
                .filter(|a| ids.contains(&a.image_id))
                .cloned()
                .collect(),
        }
    }

    pub fn with_modality(&self, modality: Modality) -> Dataset {
        self.filter_images(|i| i.modality == modality)
    }

    /// Keeps whole sequences whose light-vision attribute equals `level`.
    pub fn with_light_vision(&self, level: LightVision) -> Dataset {
        let seqs: BTreeSet<&str> = self
            .sequences
            .iter()
            .filter(|s| s.light_vision == Some(level))
            .map(|s| s.id.as_str())
            .collect();
        self.filter_images(|i| seqs.contains(i.sequence_id.as_str()))
    }

    /// Fills short occlusion gaps in every track. Returns the completed
    /// dataset and the gaps left open, keyed by `(sequence, modality, track)`.
    ///
    /// Interpolated boxes are attached to the image of the same sequence,
    /// frame and modality; frames without such an image stay unfilled and are
    /// reported as open gaps.
    pub fn interpolate_tracks(&self) -> Result<(Dataset, Vec<TrackGap>), crate::error::TrackError> {
        let mut tracks: BTreeMap<(&str, Modality, u64), Vec<&Annotation>> = BTreeMap::new();
        for a in &self.annotations {
            if let Some(t) = a.track_id {
                tracks.entry((a.sequence_id.as_str(), a.modality, t)).or_default().push(a);
            }
        }
        let frame_image: BTreeMap<(&str, i64, Modality), &ImageInfo> = self
            .images
            .iter()
            .map(|i| ((i.sequence_id.as_str(), i.frame_id, i.modality), i))
            .collect();
        let mut next_id = self.annotations.iter().map(|a| a.id).max().unwrap_or(0) + 1;
        let mut added = Vec::new();
        let mut report = Vec::new();
        for ((seq, modality, track_id), mut anns) in tracks {
            anns.sort_by_key(|a| a.frame_id);
            let class_id = anns[0].class_id;
            if anns.iter().any(|a| a.class_id != class_id) {
                return Err(crate::error::TrackError::Mixed("class"));
            }
            let points: Vec<TrackPoint> = anns
                .iter()
                .map(|a| TrackPoint {
                    frame: a.frame_id,
                    bbox: a.bbox,
                    interpolated: a.interpolated,
                })
                .collect();
            let filled = interpolate_track(&points)?;
            let mut unplaced: Vec<i64> = Vec::new();
            for p in filled.points.iter().filter(|p| p.interpolated) {
                if anns.iter().any(|a| a.frame_id == p.frame) {
                    continue;
                }
                let Some(img) = frame_image.get(&(seq, p.frame, modality)) else {
                    unplaced.push(p.frame);
                    continue;
                };
                let Some(bbox) = p.bbox.clip(img.width, img.height) else {
                    unplaced.push(p.frame);
                    continue;
                };
                added.push(Annotation {
                    id: next_id,
                    image_id: img.id,
                    sequence_id: seq.to_string(),
                    frame_id: p.frame,
                    track_id: Some(track_id),
                    class_id,
                    bbox,
                    modality,
                    ignore: false,
                    interpolated: true,
                    clipped: bbox != p.bbox,
                    occlusion: None,
                });
                next_id += 1;
            }
            for gap in filled.open_gaps {
                report.push(TrackGap {
                    sequence_id: seq.to_string(),
                    modality,
                    track_id,
                    gap,
                    reason: GapReason::TooLong,
                });
            }
            for frame in unplaced {
                report.push(TrackGap {
                    sequence_id: seq.to_string(),
                    modality,
                    track_id,
                    gap: Gap {
                        after_frame: frame - 1,
                        before_frame: frame + 1,
                    },
                    reason: GapReason::NoImage,
                });
            }
        }
        let mut out = self.clone();
        out.annotations.extend(added);
        let order: BTreeMap<u64, usize> = out.images.iter().enumerate().map(|(i, img)| (img.id, i)).collect();
        out.annotations
            .sort_by_key(|a| (order.get(&a.image_id).copied().unwrap_or(usize::MAX), a.id));
        Ok((out, report))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapReason {
    /// More missing frames than [`MAX_FILL_GAP`].
    TooLong,
    /// No image exists for the frame, so the box has nowhere to attach.
    NoImage,
}

/// An occlusion gap that interpolation left open.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackGap {
    pub sequence_id: String,
    pub modality: Modality,
    pub track_id: u64,
    #[serde(flatten)]
    pub gap: Gap,
    pub reason: GapReason,
}
