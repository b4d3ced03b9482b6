use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use safit_core::eval::{InterpolatedGt, ScaleBin};
use safit_core::masks::{Connectivity, MaskMode, DEFAULT_SIGMA_FACTOR, DEFAULT_THRESHOLD};
use safit_core::metrics::DEFAULT_C;
use safit_core::{LightVision, Measure, Modality};

#[derive(Debug, Parser)]
#[command(name = "safit", version, about = "Scale-adaptive detection metrics and evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Measure value against diagonal pixel shift, as CSV.
    Curves(CurvesArgs),
    /// Density, scale and illumination statistics of a ground-truth file.
    Stats(StatsArgs),
    /// Convert between boxes and masks.
    #[command(subcommand)]
    Masks(MasksCommand),
    /// Fill short occlusion gaps in annotated tracks.
    Interpolate(InterpolateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct MeasureArgs {
    /// Size-aware balance constant.
    #[arg(long = "c", default_value_t = DEFAULT_C)]
    pub c: f64,
    /// NWD normalization for the standalone `nwd` measure; defaults to C.
    #[arg(long = "k")]
    pub k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "safit", value_parser = parse_measure)]
    pub measure: Measure,
    #[command(flatten)]
    pub params: MeasureArgs,
    /// Comma list or `start:step:stop`.
    #[arg(long, default_value = "0.5:0.05:0.95", value_parser = parse_thresholds)]
    pub thresholds: Thresholds,
    #[arg(long = "max-dets", default_value_t = safit_core::eval::DEFAULT_MAX_DETECTIONS)]
    pub max_dets: usize,
    #[arg(long = "recall-points", default_value_t = safit_core::eval::DEFAULT_RECALL_POINTS)]
    pub recall_points: usize,
    /// Replace the five default bins, as `name:lo:hi,...` areas (`inf` allowed).
    #[arg(long = "scale-bins", value_parser = parse_bins)]
    pub scale_bins: Option<Bins>,
    #[arg(long, value_parser = parse_modality)]
    pub modality: Option<Modality>,
    #[arg(long = "light-vision", value_parser = parse_light)]
    pub light_vision: Option<LightVision>,
    #[arg(long, value_enum, default_value_t = InterpolatedArg::Count)]
    pub interpolated: InterpolatedArg,
    /// Skip the per-illumination breakdown.
    #[arg(long = "no-illumination")]
    pub no_illumination: bool,
    #[command(flatten)]
    pub out: OutArgs,
    #[arg(long, env = "SAFIT_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to the output extension, else JSON.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InterpolatedArg {
    Count,
    Ignore,
}

impl From<InterpolatedArg> for InterpolatedGt {
    fn from(v: InterpolatedArg) -> Self {
        match v {
            InterpolatedArg::Count => InterpolatedGt::Count,
            InterpolatedArg::Ignore => InterpolatedGt::Ignore,
        }
    }
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128")]
    pub sizes: Vec<f64>,
    #[arg(long = "max-dev", default_value_t = 20)]
    pub max_dev: u32,
    #[arg(long, value_delimiter = ',', default_value = "iou,nwd,safit", value_parser = parse_measure)]
    pub measure: Vec<Measure>,
    #[command(flatten)]
    pub params: MeasureArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Subcommand)]
pub enum MasksCommand {
    /// Write one mask per image and class.
    Rasterize(RasterizeArgs),
    /// Recover boxes from mask files as COCO-style predictions.
    Recover(RecoverArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskFormat {
    Png,
    Raw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Hard,
    Soft,
}

impl From<ModeArg> for MaskMode {
    fn from(v: ModeArg) -> Self {
        match v {
            ModeArg::Hard => MaskMode::Hard,
            ModeArg::Soft => MaskMode::Soft,
        }
    }
}

#[derive(Debug, Args)]
pub struct RasterizeArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Hard)]
    pub mode: ModeArg,
    /// Gaussian sigma as a fraction of box width and height.
    #[arg(long = "sigma-factor", default_value_t = DEFAULT_SIGMA_FACTOR)]
    pub sigma_factor: f64,
    #[arg(long, value_enum, default_value_t = MaskFormat::Png)]
    pub format: MaskFormat,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    /// Directory of `<image_id>_<class_id>.png` or `.sfm` files.
    #[arg(long = "input")]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "8", value_parser = parse_connectivity)]
    pub connectivity: Connectivity,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InterpolateArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the gaps left open as JSON.
    #[arg(long)]
    pub gaps: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Thresholds(pub Vec<f64>);

#[derive(Debug, Clone)]
pub struct Bins(pub Vec<ScaleBin>);

fn parse_measure(s: &str) -> Result<Measure, String> {
    s.parse::<Measure>().map_err(|e| e.to_string())
}

fn parse_modality(s: &str) -> Result<Modality, String> {
    s.parse()
}

fn parse_light(s: &str) -> Result<LightVision, String> {
    s.parse()
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    match s {
        "4" => Ok(Connectivity::Four),
        "8" => Ok(Connectivity::Eight),
        other => Err(format!("connectivity must be 4 or 8, got `{other}`")),
    }
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
}

/// Snaps to 12 decimals so `0.5:0.05:0.95` yields the literal values.
fn snap(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

pub fn parse_thresholds(s: &str) -> Result<Thresholds, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (number(start)?, number(step)?, number(stop)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err("range needs a positive step and stop >= start".into());
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..n).map(|i| snap(start + i as f64 * step)).collect()
        }
        [list] => list.split(',').map(number).collect::<Result<Vec<_>, _>>()?,
        _ => return Err("expected a comma list or start:step:stop".into()),
    };
    Ok(Thresholds(values))
}

pub fn parse_bins(s: &str) -> Result<Bins, String> {
    s.split(',')
        .map(|spec| {
            let parts: Vec<&str> = spec.split(':').collect();
            let [name, lo, hi] = parts.as_slice() else {
                return Err(format!("bin `{spec}` must be name:lo:hi"));
            };
            let hi = if hi.trim() == "inf" { f64::INFINITY } else { number(hi)? };
            ScaleBin::new(name.trim(), number(lo)?, hi).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Bins)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_range_matches_coco_defaults() {
        assert_eq!(parse_thresholds("0.5:0.05:0.95").unwrap().0, safit_core::eval::coco_thresholds());
        assert_eq!(parse_thresholds("0.5,0.75").unwrap().0, vec![0.5, 0.75]);
        assert!(parse_thresholds("0.5:0:1").is_err());
        assert!(parse_thresholds("a").is_err());
    }

    #[test]
    fn bins_parse() {
        let b = parse_bins("small:0:1024, big:1024:inf").unwrap().0;
        assert_eq!(b.len(), 2);
        assert_eq!(b[1].name, "big");
        assert!(b[1].hi.is_infinite());
        assert!(parse_bins("x:5:1").is_err());
        assert!(parse_bins("x:5").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
