//! CSV tables and run manifests.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUTPUT_DIR_ENV: &str = "HICONTRAST_OUTPUT_DIR";

/// Resolves relative output paths against the output directory.
#[derive(Clone, Debug)]
pub struct OutputDir(pub PathBuf);

impl OutputDir {
    /// `--output-dir`, else the environment override, else the working
    /// directory.
    pub fn from_flag(flag: Option<PathBuf>) -> Self {
        let dir = flag
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Self(dir)
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.0.join(p)
        }
    }
}

/// Appends rows to a CSV file, writing the header first if the file is new
/// or empty. LF line endings.
pub fn append_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    if fresh {
        w.write_record(header).map_err(csv_err)?;
    }
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv: {e}"))
}

/// Shortest round-trip form with a `.` decimal point, e.g. `0.5`, `-2.0`,
/// `1e-20`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub wall_time_seconds: f64,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            wall_time_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Writes `<command>-manifest.json` into the output directory.
    pub fn write(&self, dir: &OutputDir) -> Result<PathBuf, CliError> {
        std::fs::create_dir_all(&dir.0)?;
        let path = dir.0.join(format!("{}-manifest.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}
