// SPDX-License-Identifier: Apache-2.0

//! CSV tables, file checksums and the per-run manifest.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Floats are written with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV table held in memory until the sequencer writes it.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|&x| format_float(x)))?;
        }
        w.into_inner().map_err(|e| CliError::Parse(e.to_string()))
    }

    /// Read a CSV written by [`Table::to_bytes`].
    pub fn read(path: &Path) -> Result<Table> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `bytes` to `dir/name` and describe the file.
pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    Ok(FileEntry {
        name: name.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

/// Recompute the checksum of a listed file.
pub fn verify_entry(dir: &Path, entry: &FileEntry) -> Result<bool> {
    let path = dir.join(&entry.name);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(sha256_hex(&bytes) == entry.sha256 && bytes.len() as u64 == entry.bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub artifact_version: String,
    pub config: ExperimentConfig,
    pub wall_clock_seconds: f64,
    /// Named per-stage diagnostics.
    pub diagnostics: BTreeMap<String, serde_json::Value>,
    /// Every data and plot file written by the run.
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn file_name(subcommand: &str) -> String {
        format!("{subcommand}.manifest.json")
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let path = dir.join(Self::file_name(&self.subcommand));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
