//! Run manifests and deterministic CSV emission.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Canonical digest of a config: whitespace-only edits do not change it.
/// Comments are dropped, keys and values trimmed, blank lines removed.
pub fn config_digest(text: &str) -> String {
    let canonical: Vec<String> = text
        .lines()
        .filter_map(|raw| {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                return None;
            }
            Some(match line.split_once('=') {
                Some((k, v)) => format!("{}={}", k.trim(), v.trim()),
                None => line.to_string(),
            })
        })
        .collect();
    let mut hasher = Sha256::new();
    hasher.update(canonical.join("\n").as_bytes());
    let out = hasher.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record accompanying every output file of a run.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub tool_version: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub subcommand: String,
    pub parameters: BTreeMap<String, String>,
    pub wall_seconds: f64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config_text: &str, master_seed: u64, subcommand: &str) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: config_digest(config_text),
            master_seed,
            subcommand: subcommand.to_string(),
            parameters: BTreeMap::new(),
            wall_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let name = format!("manifest_{}.json", self.subcommand.replace(' ', "_"));
        let path = dir.join(name);
        let mut file = std::fs::File::create(&path)?;
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        file.write_all(json.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(path)
    }
}

/// Fixed CSV dialect: comma separated, `.` decimal, LF endings, mandatory
/// header row. Floats go through the shortest round-trip formatting, so
/// identical runs emit identical bytes.
pub struct CsvWriter {
    path: PathBuf,
    lines: Vec<String>,
}

impl CsvWriter {
    pub fn new(path: impl Into<PathBuf>, header: &[&str]) -> Self {
        CsvWriter { path: path.into(), lines: vec![header.join(",")] }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.lines.push(cells.join(","));
    }

    pub fn finish(self) -> Result<PathBuf> {
        if let Some(parent) = self.path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut file = std::fs::File::create(&self.path)?;
        for line in &self.lines {
            file.write_all(line.as_bytes())?;
            file.write_all(b"\n")?;
        }
        Ok(self.path)
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut file = std::fs::File::create(&path)?;
    let json = serde_json::to_string_pretty(value).expect("value serializes");
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(path)
}
