use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BoxError {
    #[error("box extent must be positive, got w={w} h={h}")]
    Degenerate { w: f64, h: f64 },
    #[error("box coordinates must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown measure `{0}`")]
    UnknownMeasure(String),
    #[error("parameter `{name}` must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("thresholds must be non-empty, strictly increasing and inside (0, 1]")]
    Thresholds,
    #[error("max_detections must be at least 1")]
    MaxDetections,
    #[error("recall sample count must be at least 2")]
    RecallPoints,
    #[error("scale bin `{0}` has an empty or inverted area range")]
    ScaleBin(String),
    #[error("finite-difference step must be positive, got {0}")]
    Step(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("track frames must be strictly increasing (frame {prev} followed by {next})")]
    NonMonotone { prev: i64, next: i64 },
    #[error("track mixes identities: {0}")]
    Mixed(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WarpError {
    #[error("homography is singular (det = {0:e})")]
    Singular(f64),
    #[error("homography entries must be finite")]
    NonFinite,
    #[error("corner ({x}, {y}) maps to the plane at infinity")]
    AtInfinity { x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error("mask dimensions must be non-zero, got {width}x{height}")]
    ZeroSize { width: u32, height: u32 },
    #[error("binarization threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("mask data length {got} does not match {width}x{height}")]
    Length { width: u32, height: u32, got: usize },
    #[error("mask container: {0}")]
    Format(String),
}

/// One invariant breach found while loading a file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    /// Locator such as `annotations[3] (id 17)`.
    pub record: String,
    pub message: String,
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.record, self.message)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{}: {} validation error(s), first: {}", path.display(), issues.len(), issues[0])]
    Invalid { path: PathBuf, issues: Vec<ValidationIssue> },
}
