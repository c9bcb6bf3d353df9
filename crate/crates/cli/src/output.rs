use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Fixed 17-significant-digit rendering, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// SHA-256 of the canonical JSON form (object keys sorted).
pub fn config_hash(config: &Value) -> String {
    let text = serde_json::to_string(config).expect("json values serialize");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

/// Output directory that records every file written through it.
pub struct Artifacts {
    root: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn target(&mut self, name: &str) -> CliResult<PathBuf> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
        let path = self.target(name)?;
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush().map_err(CliError::io(&path))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.target(name)?;
        let text = serde_json::to_string_pretty(value).expect("outputs serialize");
        fs::write(&path, text + "\n").map_err(CliError::io(&path))
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub subcommand: &'a str,
    pub config_hash: String,
    pub config: &'a Value,
    pub outputs: &'a [String],
    pub wall_clock_seconds: f64,
    pub steps: u64,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub const MANIFEST: &str = "manifest.json";
