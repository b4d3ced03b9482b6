use std::path::{Path, PathBuf};

use safit_core::dataset::{dataset_stats, load_ground_truth, load_predictions, write_ground_truth, PredictionRecord};
use safit_core::eval::{curves_csv, deviation_curve, evaluate, EvalConfig, ScaleBin};
use safit_core::masks::{mask_to_bboxes, rasterize_dataset, Mask};
use safit_core::MeasureParams;
use serde_json::json;

use crate::args::{
    Cli, Command, CurvesArgs, EvaluateArgs, Format, InterpolateArgs, MaskFormat, MasksCommand, MeasureArgs,
    RasterizeArgs, RecoverArgs, StatsArgs,
};
use crate::error::CliError;
use crate::output::{emit, format_of, Meta};

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evaluate(a) => run_evaluate(a),
        Command::Curves(a) => run_curves(a),
        Command::Stats(a) => run_stats(a),
        Command::Masks(MasksCommand::Rasterize(a)) => run_rasterize(a),
        Command::Masks(MasksCommand::Recover(a)) => run_recover(a),
        Command::Interpolate(a) => run_interpolate(a),
    }
}

fn params(a: &MeasureArgs) -> Result<MeasureParams, CliError> {
    Ok(MeasureParams::new(a.c, a.k)?)
}

fn run_evaluate(a: EvaluateArgs) -> Result<(), CliError> {
    let meta = Meta::start("evaluate");
    let cfg = EvalConfig {
        measure: a.measure,
        params: params(&a.params)?,
        thresholds: a.thresholds.0,
        recall_points: a.recall_points,
        max_detections: a.max_dets,
        scale_bins: a.scale_bins.map_or_else(ScaleBin::default_bins, |b| b.0),
        modality: a.modality,
        light_vision: a.light_vision,
        interpolated: a.interpolated.into(),
        illumination: !a.no_illumination,
        workers: a.workers,
    };
    cfg.validate()?;
    let gt = load_ground_truth(&a.gt)?;
    let dets = load_predictions(&a.pred, &gt)?;
    let report = evaluate(&gt, &dets, &cfg)?;
    let body = match format_of(&a.out) {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    emit(a.out.out.as_deref(), body.as_bytes())?;
    if let Some(out) = &a.out.out {
        let mut settings = serde_json::to_value(&cfg).expect("config serializes");
        settings["workers"] = json!(cfg.workers);
        meta.finish(out, &[&a.gt, &a.pred], settings)?;
    }
    Ok(())
}

fn run_curves(a: CurvesArgs) -> Result<(), CliError> {
    let meta = Meta::start("curves");
    let p = params(&a.params)?;
    let mut curves = Vec::new();
    for &m in &a.measure {
        let mut points = Vec::new();
        for &size in &a.sizes {
            points.extend(deviation_curve(size, a.max_dev, m, &p)?);
        }
        curves.push((m, points));
    }
    emit(a.out.as_deref(), curves_csv(&curves).as_bytes())?;
    if let Some(out) = &a.out {
        let measures: Vec<&str> = a.measure.iter().map(|m| m.name()).collect();
        meta.finish(
            out,
            &[],
            json!({"sizes": a.sizes, "max_dev": a.max_dev, "measures": measures, "params": p}),
        )?;
    }
    Ok(())
}

fn run_stats(a: StatsArgs) -> Result<(), CliError> {
    let meta = Meta::start("stats");
    let gt = load_ground_truth(&a.gt)?;
    let stats = dataset_stats(&gt);
    let body = match format_of(&a.out) {
        Format::Json => serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n",
        Format::Csv => stats.to_csv(),
    };
    emit(a.out.out.as_deref(), body.as_bytes())?;
    if let Some(out) = &a.out.out {
        meta.finish(out, &[&a.gt], json!({}))?;
    }
    Ok(())
}

fn run_rasterize(a: RasterizeArgs) -> Result<(), CliError> {
    let meta = Meta::start("masks rasterize");
    if !(a.sigma_factor.is_finite() && a.sigma_factor > 0.0) {
        return Err(CliError::Usage(format!("--sigma-factor must be positive, got {}", a.sigma_factor)));
    }
    let gt = load_ground_truth(&a.gt)?;
    let masks = rasterize_dataset(&gt, a.mode.into(), a.sigma_factor).map_err(|source| CliError::Mask { file: None, source })?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    for (image_id, mask) in &masks {
        let (ext, bytes) = match a.format {
            MaskFormat::Png => ("png", mask.to_png()),
            MaskFormat::Raw => ("sfm", mask.to_raw()),
        };
        let path = a.out_dir.join(format!("{image_id}_{}.{ext}", mask.class_id));
        emit(Some(&path), &bytes)?;
    }
    let mode = format!("{:?}", a.mode).to_lowercase();
    meta.finish(&a.out_dir, &[&a.gt], json!({"mode": mode, "sigma_factor": a.sigma_factor, "masks": masks.len()}))
}

/// `<image_id>_<class_id>` from a mask file name.
fn mask_ids(path: &Path) -> Option<(u64, u64)> {
    let stem = path.file_stem()?.to_str()?;
    let (image, class) = stem.split_once('_')?;
    Some((image.parse().ok()?, class.parse().ok()?))
}

fn run_recover(a: RecoverArgs) -> Result<(), CliError> {
    let meta = Meta::start("masks recover");
    let entries = std::fs::read_dir(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let mut files: Vec<((u64, u64), PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(&a.input, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !matches!(ext.as_deref(), Some("png" | "sfm")) {
            continue;
        }
        let ids = mask_ids(&path)
            .ok_or_else(|| CliError::Usage(format!("mask file {} is not named <image_id>_<class_id>", path.display())))?;
        files.push((ids, path));
    }
    files.sort();

    let mut records = Vec::new();
    for ((image_id, class_id), path) in &files {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let mask = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
            Mask::from_png(&bytes, *class_id)
        } else {
            Mask::from_raw(&bytes)
        }
        .map_err(|source| CliError::Mask {
            file: Some(path.clone()),
            source,
        })?;
        let boxes = mask_to_bboxes(&mask, a.threshold, a.connectivity).map_err(|source| CliError::Mask {
            file: Some(path.clone()),
            source,
        })?;
        records.extend(boxes.into_iter().map(|b| PredictionRecord {
            image_id: *image_id,
            category_id: mask.class_id,
            bbox: b.bbox.to_xywh(),
            score: b.score,
        }));
    }
    let body = serde_json::to_string_pretty(&records).expect("predictions serialize") + "\n";
    emit(a.out.as_deref(), body.as_bytes())?;
    if let Some(out) = &a.out {
        let connectivity = serde_json::to_value(a.connectivity).expect("connectivity serializes");
        meta.finish(
            out,
            &[&a.input],
            json!({"threshold": a.threshold, "connectivity": connectivity, "masks": files.len()}),
        )?;
    }
    Ok(())
}

fn run_interpolate(a: InterpolateArgs) -> Result<(), CliError> {
    let meta = Meta::start("interpolate");
    let gt = load_ground_truth(&a.gt)?;
    let (filled, gaps) = gt.interpolate_tracks()?;
    let body = write_ground_truth(&filled) + "\n";
    emit(a.out.as_deref(), body.as_bytes())?;
    if let Some(path) = &a.gaps {
        let text = serde_json::to_string_pretty(&gaps).expect("gaps serialize") + "\n";
        emit(Some(path), text.as_bytes())?;
    }
    if let Some(out) = &a.out {
        let added = filled.annotations.len() - gt.annotations.len();
        meta.finish(out, &[&a.gt], json!({"added": added, "open_gaps": gaps.len()}))?;
    }
    Ok(())
}
