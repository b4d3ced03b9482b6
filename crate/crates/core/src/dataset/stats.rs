use std::collections::BTreeMap;

use serde::Serialize;

use super::{density_level, scale_level, Dataset, DensityLevel, LightVision, ScaleLevel};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceStats {
    pub sequence_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub light_vision: Option<LightVision>,
    /// Images in the sequence, over all modalities.
    pub frames: usize,
    pub annotations: usize,
    /// Mean annotations per image.
    pub density: f64,
    pub density_level: DensityLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScaleHistogram {
    pub class_id: u64,
    pub name: String,
    pub counts: BTreeMap<ScaleLevel, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Totals {
    pub sequences: usize,
    pub images: usize,
    pub annotations: usize,
    pub categories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub sequences: Vec<SequenceStats>,
    /// Number of sequences at each density level.
    pub density_levels: BTreeMap<DensityLevel, usize>,
    pub scale_histogram: Vec<ClassScaleHistogram>,
    /// Annotation counts per light-vision level; `unspecified` for sequences without one.
    pub light_vision: BTreeMap<String, usize>,
    pub totals: Totals,
}

pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let mut frames: BTreeMap<&str, usize> = BTreeMap::new();
    for img in &ds.images {
        *frames.entry(img.sequence_id.as_str()).or_default() += 1;
    }
    let mut per_seq: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &ds.annotations {
        *per_seq.entry(a.sequence_id.as_str()).or_default() += 1;
    }

    let mut density_levels: BTreeMap<DensityLevel, usize> = DensityLevel::ALL.iter().map(|&l| (l, 0)).collect();
    let mut light_vision: BTreeMap<String, usize> = BTreeMap::new();
    let sequences = ds
        .sequences
        .iter()
        .map(|s| {
            let n_frames = frames.get(s.id.as_str()).copied().unwrap_or(0);
            let n_anns = per_seq.get(s.id.as_str()).copied().unwrap_or(0);
            let density = if n_frames == 0 { 0.0 } else { n_anns as f64 / n_frames as f64 };
            let level = density_level(density);
            *density_levels.entry(level).or_default() += 1;
            let lv_key = s.light_vision.map_or("unspecified".to_string(), |l| l.name().to_string());
            *light_vision.entry(lv_key).or_default() += n_anns;
            SequenceStats {
                sequence_id: s.id.clone(),
                scene: s.scene.clone(),
                light_vision: s.light_vision,
                frames: n_frames,
                annotations: n_anns,
                density,
                density_level: level,
            }
        })
        .collect();

    let mut hist: BTreeMap<u64, BTreeMap<ScaleLevel, usize>> = ds
        .categories
        .iter()
        .map(|c| (c.id, ScaleLevel::ALL.iter().map(|&l| (l, 0)).collect()))
        .collect();
    for a in &ds.annotations {
        let row = hist
            .entry(a.class_id)
            .or_insert_with(|| ScaleLevel::ALL.iter().map(|&l| (l, 0)).collect());
        *row.entry(scale_level(&a.bbox)).or_default() += 1;
    }
    let scale_histogram = hist
        .into_iter()
        .map(|(class_id, counts)| ClassScaleHistogram {
            class_id,
            name: ds
                .categories
                .iter()
                .find(|c| c.id == class_id)
                .map_or_else(|| class_id.to_string(), |c| c.name.clone()),
            counts,
        })
        .collect();

    DatasetStats {
        sequences,
        density_levels,
        scale_histogram,
        light_vision,
        totals: Totals {
            sequences: ds.sequences.len(),
            images: ds.images.len(),
            annotations: ds.annotations.len(),
            categories: ds.categories.len(),
        },
    }
}

impl DatasetStats {
    /// Flat `section,key,field,value` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut row = |a: &str, b: &str, c: &str, d: String| {
            w.write_record([a, b, c, d.as_str()]).expect("in-memory csv");
        };
        row("section", "key", "field", "value".into());
        for s in &self.sequences {
            row("sequence", &s.sequence_id, "frames", s.frames.to_string());
            row("sequence", &s.sequence_id, "annotations", s.annotations.to_string());
            row("sequence", &s.sequence_id, "density", s.density.to_string());
            row("sequence", &s.sequence_id, "density_level", s.density_level.to_string());
        }
        for (level, n) in &self.density_levels {
            row("density_levels", level.name(), "sequences", n.to_string());
        }
        for h in &self.scale_histogram {
            for (level, n) in &h.counts {
                row("scale_histogram", &h.class_id.to_string(), level.name(), n.to_string());
            }
        }
        for (level, n) in &self.light_vision {
            row("light_vision", level, "annotations", n.to_string());
        }
        let t = &self.totals;
        row("totals", "all", "sequences", t.sequences.to_string());
        row("totals", "all", "images", t.images.to_string());
        row("totals", "all", "annotations", t.annotations.to_string());
        row("totals", "all", "categories", t.categories.to_string());
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}
