use std::path::PathBuf;

use safit_core::error::{ConfigError, LoadError, MaskError, TrackError, ValidationIssue};
use serde_json::json;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Invalid { file: PathBuf, issues: Vec<ValidationIssue> },
    Parse { file: PathBuf, message: String },
    Io { path: PathBuf, message: String },
    Mask { file: Option<PathBuf>, source: MaskError },
    Track(TrackError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            _ => 1,
        }
    }

    /// One JSON object per line on stderr.
    pub fn report(&self) {
        let lines = match self {
            CliError::Usage(m) => vec![json!({"kind": "usage", "message": m})],
            CliError::Config(e) => vec![json!({"kind": "usage", "message": e.to_string()})],
            CliError::Invalid { file, issues } => issues
                .iter()
                .map(|i| json!({"kind": "validation", "file": file, "record": i.record, "message": i.message}))
                .collect(),
            CliError::Parse { file, message } => vec![json!({"kind": "parse", "file": file, "message": message})],
            CliError::Io { path, message } => vec![json!({"kind": "io", "file": path, "message": message})],
            CliError::Mask { file, source } => {
                vec![json!({"kind": "mask", "file": file, "message": source.to_string()})]
            }
            CliError::Track(e) => vec![json!({"kind": "track", "message": e.to_string()})],
        };
        for l in lines {
            eprintln!("{l}");
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { path, source } => CliError::io(path, source),
            LoadError::Parse { path, source } => CliError::Parse {
                file: path,
                message: source.to_string(),
            },
            LoadError::Invalid { path, issues } => CliError::Invalid { file: path, issues },
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<TrackError> for CliError {
    fn from(e: TrackError) -> Self {
        CliError::Track(e)
    }
}
