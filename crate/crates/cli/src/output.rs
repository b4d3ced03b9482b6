use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use crate::args::{Format, OutArgs};
use crate::error::CliError;

pub fn format_of(out: &OutArgs) -> Format {
    out.format.unwrap_or_else(|| match out.out.as_deref().and_then(Path::extension) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    })
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            std::fs::write(p, bytes).map_err(|e| CliError::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).and_then(|_| out.flush()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Run metadata kept out of the payload so outputs stay byte-identical.
pub struct Meta {
    command: &'static str,
    started: Instant,
    started_unix: f64,
}

impl Meta {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
        }
    }

    /// Writes `<out>.meta.json` next to `out`.
    pub fn finish(self, out: &Path, inputs: &[&Path], settings: Value) -> Result<(), CliError> {
        let meta = json!({
            "tool": "safit",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "inputs": inputs,
            "settings": settings,
            "started_unix": self.started_unix,
            "elapsed_seconds": self.started.elapsed().as_secs_f64(),
        });
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
        emit(Some(&sidecar_path(out)), text.as_bytes())
    }
}
