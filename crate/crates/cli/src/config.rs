// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration: a TOML document, dotted-path overrides, and
//! validation that names the offending key.

use crate::error::{CliError, Result};
use gue_relax::dynamics::ContourSpec;
use gue_relax::{MeasureSpec, ModelParams, SpectralMeasure, TwoLevelState, C64};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: MeasureSpec,
    pub s: f64,
    pub v: f64,
    /// Reservoir energy of the initial state.
    #[serde(rename = "E")]
    pub energy: f64,
    pub rho0: Rho0,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_time")]
    pub time: Grid,
    #[serde(default = "default_tau")]
    pub tau: Grid,
    #[serde(default)]
    pub contour: ContourOptions,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub spectrum: SpectrumOptions,
    #[serde(default)]
    pub equilibrium: EquilibriumOptions,
    #[serde(default)]
    pub montecarlo: MonteCarloOptions,
    #[serde(default)]
    pub compare: CompareOptions,
}

/// Initial state as real and imaginary parts in the order `++, +-, -+, --`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rho0 {
    pub re: [f64; 4],
    #[serde(default)]
    pub im: [f64; 4],
}

impl Rho0 {
    pub fn entries(&self) -> [[C64; 2]; 2] {
        let c = |i: usize| C64::new(self.re[i], self.im[i]);
        [[c(0), c(1)], [c(2), c(3)]]
    }
}

/// Uniform grid of `points` values from `start` to `stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + h * i as f64).collect()
    }

    fn validate(&self, key: &str) -> Result<()> {
        if self.points == 0 {
            return Err(CliError::validation(
                &format!("{key}.points"),
                "grid needs at least one point",
            ));
        }
        if !(self.start.is_finite() && self.start >= 0.0) {
            return Err(CliError::validation(&format!("{key}.start"), "must be finite and >= 0"));
        }
        if !self.stop.is_finite() || (self.points > 1 && self.stop <= self.start) {
            return Err(CliError::validation(
                &format!("{key}.stop"),
                format!("must exceed start = {} for an increasing grid", self.start),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl ContourOptions {
    pub fn spec(&self) -> ContourSpec {
        let d = ContourSpec::default();
        ContourSpec {
            eta1: self.eta1,
            eta2: self.eta2,
            x: self.x,
            panels: self.panels,
            tol: self.tol.unwrap_or(d.tol),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumOptions {
    pub spacing: f64,
    pub eta1: f64,
    pub tol: f64,
    /// When set, also histogram one finite-`n` sample into this many bins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            spacing: 0.01,
            eta1: gue_relax::selfconsistent::DEFAULT_ETA1,
            tol: gue_relax::selfconsistent::DEFAULT_TOL,
            bins: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumOptions {
    pub betas: Vec<f64>,
    /// Window half-width; 5% of the reservoir support width when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Number of window centres across the reservoir support.
    pub points: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            betas: vec![0.0, 0.5, 1.0, 2.0, 5.0],
            epsilon: None,
            points: 41,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloOptions {
    /// Canonical initial reservoir state at this inverse temperature instead
    /// of the level nearest `E`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareOptions {
    pub threshold: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { threshold: 0.05 }
    }
}

fn default_n() -> usize {
    400
}
fn default_samples() -> usize {
    50
}
fn default_time() -> Grid {
    Grid {
        start: 0.0,
        stop: 2.0,
        points: 5,
    }
}
fn default_tau() -> Grid {
    Grid {
        start: 0.0,
        stop: 1.0,
        points: 11,
    }
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn measure(&self) -> Result<SpectralMeasure> {
        SpectralMeasure::new(self.measure.clone()).map_err(|e| CliError::validation("measure", e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.s, self.v, self.measure()?)?)
    }

    pub fn rho0(&self) -> Result<TwoLevelState> {
        let m = self.rho0.entries();
        TwoLevelState::new(m).map_err(|e| CliError::validation("rho0", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.measure()?;
        for (key, x) in [("s", self.s), ("v", self.v)] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(CliError::validation(key, format!("must be finite and >= 0, got {x}")));
            }
        }
        if !self.energy.is_finite() {
            return Err(CliError::validation("E", "must be finite"));
        }
        self.rho0()?;
        if self.n == 0 {
            return Err(CliError::validation("n", "reservoir dimension must be >= 1"));
        }
        if self.samples < 2 {
            return Err(CliError::validation(
                "samples",
                "ensemble variances need at least two samples",
            ));
        }
        self.time.validate("time")?;
        self.tau.validate("tau")?;
        let c = &self.contour;
        for (key, x) in [("contour.eta1", c.eta1), ("contour.eta2", c.eta2), ("contour.x", c.x)] {
            if let Some(x) = x {
                if !(x.is_finite() && x > 0.0) {
                    return Err(CliError::validation(key, "must be positive"));
                }
            }
        }
        if c.panels == Some(0) {
            return Err(CliError::validation("contour.panels", "must be >= 1"));
        }
        if let Some(t) = c.tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::validation("contour.tol", "must lie in (0, 1)"));
            }
        }
        let sp = &self.spectrum;
        for (key, x) in [
            ("spectrum.spacing", sp.spacing),
            ("spectrum.eta1", sp.eta1),
            ("spectrum.tol", sp.tol),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return Err(CliError::validation(key, "must be positive"));
            }
        }
        if sp.bins == Some(0) {
            return Err(CliError::validation("spectrum.bins", "must be >= 1"));
        }
        let eq = &self.equilibrium;
        if eq.betas.iter().any(|b| !b.is_finite()) {
            return Err(CliError::validation("equilibrium.betas", "must be finite"));
        }
        if let Some(e) = eq.epsilon {
            if !(e.is_finite() && e > 0.0) {
                return Err(CliError::validation("equilibrium.epsilon", "must be positive"));
            }
        }
        if eq.points == 0 {
            return Err(CliError::validation("equilibrium.points", "must be >= 1"));
        }
        if let Some(b) = self.montecarlo.beta {
            if !b.is_finite() {
                return Err(CliError::validation("montecarlo.beta", "must be finite"));
            }
        }
        if !(self.compare.threshold.is_finite() && self.compare.threshold > 0.0) {
            return Err(CliError::validation("compare.threshold", "must be positive"));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    from_table(table)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

fn from_table(table: toml::Table) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Set `key` (dotted path) to `value` in a TOML table. The value is read as a
/// TOML literal when it parses as one and as a string otherwise.
pub fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<()> {
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::validation(key, "empty path segment in override"));
    }
    if parts.len() > 1 && !table.contains_key(parts[0]) {
        // start from the section defaults so a single field can be overridden
        if let Some(d) = section_defaults(parts[0]) {
            table.insert(parts[0].to_string(), d);
        }
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::validation(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

fn section_defaults(key: &str) -> Option<toml::Value> {
    let v = match key {
        "time" => toml::Value::try_from(default_time()),
        "tau" => toml::Value::try_from(default_tau()),
        _ => return None,
    };
    v.ok()
}

/// Config file (optional) plus `key=value` overrides plus explicit flags,
/// later sources winning.
pub fn resolve(
    path: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<ExperimentConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            text.parse::<toml::Table>()
                .map_err(|e| CliError::Parse(e.to_string()))?
        }
        None => toml::Table::new(),
    };
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("override `{s}` is not key=value")))?;
        apply_override(&mut table, k.trim(), v.trim())?;
    }
    if let Some(seed) = seed {
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
    }
    if let Some(out) = out {
        table.insert("out".into(), toml::Value::String(out.display().to_string()));
    }
    from_table(table)
}
