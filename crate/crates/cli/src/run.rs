// SPDX-License-Identifier: Apache-2.0

//! Subcommand orchestration. Each subcommand computes its tables in memory;
//! a single sequencer then writes data files, optional plots and the
//! manifest.

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{write_file, RunManifest, Table, ARTIFACT_VERSION};
use crate::plot::{emit_plot, PlotSpec};
use gue_relax::dynamics::{evolve, Trajectory};
use gue_relax::finite::{canonical_initial_weights, ensemble_run_with, variance_bound, EnsembleStats, FiniteModel};
use gue_relax::selfconsistent::{
    default_epsilon, default_grid, equilibrium_canonical, equilibrium_micro, pair_residual, spectral_densities,
    DensityGrid,
};
use gue_relax::vanhove::VanHoveParams;
use gue_relax::{Error as ModelError, ModelParams, TwoLevelState};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Spectrum,
    Evolve,
    Vanhove,
    Montecarlo,
    Compare,
    Equilibrium,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Spectrum,
        Subcommand::Evolve,
        Subcommand::Vanhove,
        Subcommand::Montecarlo,
        Subcommand::Compare,
        Subcommand::Equilibrium,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Evolve => "evolve",
            Subcommand::Vanhove => "vanhove",
            Subcommand::Montecarlo => "montecarlo",
            Subcommand::Compare => "compare",
            Subcommand::Equilibrium => "equilibrium",
        }
    }
}

impl FromStr for Subcommand {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Parse(format!("unknown subcommand `{s}`")))
    }
}

/// Result of one run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    /// `compare` only: some deviation exceeded the threshold.
    pub breach: bool,
    pub warnings: Vec<String>,
}

struct Artifact {
    file: String,
    table: Table,
    plot: Option<PlotSpec>,
}

#[derive(Default)]
struct Products {
    artifacts: Vec<Artifact>,
    diagnostics: BTreeMap<String, Value>,
    warnings: Vec<String>,
    breach: bool,
}

impl Products {
    fn add(&mut self, file: &str, table: Table, plot: Option<PlotSpec>) {
        self.artifacts.push(Artifact {
            file: file.into(),
            table,
            plot,
        });
    }

    fn diag(&mut self, key: &str, v: Value) {
        self.diagnostics.insert(key.into(), v);
    }
}

const ENTRIES: [&str; 4] = ["pp", "pm", "mp", "mm"];

/// Run `cmd` and write its outputs under `cfg.out`.
pub fn run(cmd: Subcommand, cfg: &ExperimentConfig, plot: bool) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let products = match cmd {
        Subcommand::Spectrum => spectrum(cfg)?,
        Subcommand::Evolve => evolve_cmd(cfg)?,
        Subcommand::Vanhove => vanhove(cfg)?,
        Subcommand::Montecarlo => montecarlo(cfg)?,
        Subcommand::Compare => compare(cfg)?,
        Subcommand::Equilibrium => equilibrium(cfg)?,
    };

    let dir = &cfg.out;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for a in &products.artifacts {
        files.push(write_file(dir, &a.file, &a.table.to_bytes()?)?);
        if plot {
            if let Some(spec) = &a.plot {
                let svg = emit_plot(&dir.join(&a.file), spec)?;
                let name = a.file.trim_end_matches(".csv").to_string() + ".svg";
                files.push(write_file(dir, &name, svg.as_bytes())?);
            }
        }
    }
    let manifest = RunManifest {
        subcommand: cmd.name().into(),
        artifact_version: ARTIFACT_VERSION.into(),
        config: cfg.clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        diagnostics: products.diagnostics,
        files,
    };
    let manifest_path = manifest.write(dir)?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
        breach: products.breach,
        warnings: products.warnings,
    })
}

fn densities(cfg: &ExperimentConfig, p: &ModelParams) -> Result<DensityGrid> {
    let sp = &cfg.spectrum;
    Ok(spectral_densities(p, &default_grid(p, sp.spacing), sp.eta1, sp.tol)?)
}

fn density_diagnostics(out: &mut Products, d: &DensityGrid, p: &ModelParams) {
    let residual = d.pairs.iter().map(|q| pair_residual(p, q)).fold(0.0, f64::max);
    out.diag("solver_max_residual", json!(residual));
    out.diag("density_mass", json!(d.mass));
    out.diag("density_max", json!(d.max_density()));
    out.diag("density_extrapolated", json!(d.extrapolated));
    out.diag("grid_points", json!(d.lambda.len()));
}

fn spectrum(cfg: &ExperimentConfig) -> Result<Products> {
    let p = cfg.params()?;
    let d = densities(cfg, &p)?;
    let mut out = Products::default();
    density_diagnostics(&mut out, &d, &p);
    let mut t = Table::new(&[
        "lambda",
        "nu_plus",
        "nu_minus",
        "re_f_plus",
        "im_f_plus",
        "re_f_minus",
        "im_f_minus",
    ]);
    for (i, &l) in d.lambda.iter().enumerate() {
        let q = &d.pairs[i];
        t.push(vec![
            l,
            d.nu_plus[i],
            d.nu_minus[i],
            q.f_plus.re,
            q.f_plus.im,
            q.f_minus.re,
            q.f_minus.im,
        ]);
    }
    out.add(
        "spectrum.csv",
        t,
        Some(PlotSpec::new(
            "limiting spectral densities",
            "lambda",
            &["nu_plus", "nu_minus"],
        )),
    );

    if let Some(bins) = cfg.spectrum.bins {
        let fm = FiniteModel::new(p, cfg.n, 0, cfg.seed)?;
        let sp = fm.spectrum(0)?;
        let lo = d.lambda[0].min(sp.values[0]);
        let hi = d.lambda[d.lambda.len() - 1].max(sp.values[sp.values.len() - 1]);
        let edges: Vec<f64> = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        let h = sp.empirical_measure(&edges)?;
        let mut e = Table::new(&["lambda_lo", "lambda_hi", "density_plus", "density_minus"]);
        for b in 0..bins {
            let w = edges[b + 1] - edges[b];
            e.push(vec![edges[b], edges[b + 1], h.plus_plus[b] / w, h.minus_minus[b] / w]);
        }
        out.add(
            "spectrum_empirical.csv",
            e,
            Some(PlotSpec::new(
                "finite-n histogram",
                "lambda_lo",
                &["density_plus", "density_minus"],
            )),
        );
        out.diag(
            "empirical_sample",
            json!({ "n": cfg.n, "bins": bins, "seed": cfg.seed }),
        );
    }
    Ok(out)
}

fn trajectory(cfg: &ExperimentConfig, out: &mut Products) -> Result<(Trajectory, Table)> {
    let p = cfg.params()?;
    let rho0 = cfg.rho0()?;
    let (a, b) = p.measure.support();
    let inside = cfg.energy >= a && cfg.energy <= b;
    if !inside {
        out.warnings.push(format!(
            "E = {} lies outside the reservoir support [{a}, {b}]",
            cfg.energy
        ));
    }
    let tr = evolve(&p, cfg.energy, &rho0, &cfg.time.values(), &cfg.contour.spec())?;
    let mut t = Table::new(&[
        "t",
        "re_pp",
        "im_pp",
        "re_pm",
        "im_pm",
        "re_mp",
        "im_mp",
        "re_mm",
        "im_mm",
        "trace_error",
        "herm_error",
    ]);
    for (time, s) in tr.times.iter().zip(&tr.states) {
        let mut row = vec![*time];
        for x in s.flat() {
            row.push(x.re);
            row.push(x.im);
        }
        row.push(s.trace_error());
        row.push(s.hermiticity_error());
        t.push(row);
    }
    let d = &tr.diagnostics;
    out.diag("energy_in_support", json!(inside));
    out.diag("contour_tol", json!(cfg.contour.spec().tol));
    out.diag(
        "max_trace_error",
        json!(d.iter().map(|x| x.trace_error).fold(0.0, f64::max)),
    );
    out.diag(
        "max_herm_error",
        json!(d.iter().map(|x| x.hermiticity_error).fold(0.0, f64::max)),
    );
    out.diag(
        "min_denominator",
        json!(d.iter().map(|x| x.min_denominator).fold(f64::INFINITY, f64::min)),
    );
    out.diag(
        "max_nodes_per_line",
        json!(d.iter().map(|x| x.nodes_per_line).max().unwrap_or(0)),
    );
    out.diag("eta_doubled_points", json!(d.iter().filter(|x| x.eta_doubled).count()));
    Ok((tr, t))
}

fn evolve_plot() -> PlotSpec {
    PlotSpec::new(
        "limiting reduced density matrix",
        "t",
        &["re_pp", "re_mm", "re_pm", "im_pm"],
    )
}

fn evolve_cmd(cfg: &ExperimentConfig) -> Result<Products> {
    let mut out = Products::default();
    let (_, t) = trajectory(cfg, &mut out)?;
    out.add("evolve.csv", t, Some(evolve_plot()));
    Ok(out)
}

fn ensemble(cfg: &ExperimentConfig, out: &mut Products) -> Result<(EnsembleStats, Table)> {
    let p = cfg.params()?;
    let rho0 = cfg.rho0()?;
    let fm = FiniteModel::nearest(p, cfg.n, cfg.energy, cfg.seed)?;
    let weights = cfg
        .montecarlo
        .beta
        .map(|b| canonical_initial_weights(&fm, b))
        .transpose()?;
    let times = cfg.time.values();
    let stats = ensemble_run_with(&fm, &rho0, &times, cfg.samples, weights.as_deref())?;

    let mut header = vec!["t".to_string()];
    for e in ENTRIES {
        header.push(format!("mean_re_{e}"));
        header.push(format!("mean_im_{e}"));
    }
    for e in ENTRIES {
        header.push(format!("var_{e}"));
    }
    header.push("variance_bound".into());
    let mut t = Table {
        header,
        rows: Vec::new(),
    };
    let mut max_ratio: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut violations = 0usize;
    for (i, &time) in times.iter().enumerate() {
        let bound = variance_bound(cfg.v, time, cfg.n);
        let mut row = vec![time];
        for x in stats.mean[i].flat() {
            row.push(x.re);
            row.push(x.im);
        }
        row.extend_from_slice(&stats.variance[i]);
        row.push(bound);
        t.push(row);
        if time > 0.0 && cfg.v > 0.0 {
            let mv = stats.max_variance(i);
            max_ratio = max_ratio.max(mv / bound);
            min_margin = min_margin.min(bound - mv);
            if mv >= bound {
                violations += 1;
            }
        }
    }
    out.diag("n", json!(cfg.n));
    out.diag("samples", json!(cfg.samples));
    out.diag("initial_level_index", json!(fm.k));
    out.diag("initial_level_energy", json!(fm.eigenvalues[fm.k]));
    out.diag("canonical_beta", json!(cfg.montecarlo.beta));
    out.diag("max_variance_to_bound", json!(max_ratio));
    out.diag(
        "min_variance_bound_margin",
        if min_margin.is_finite() {
            json!(min_margin)
        } else {
            Value::Null
        },
    );
    out.diag("variance_bound_violations", json!(violations));
    Ok((stats, t))
}

fn montecarlo_plot() -> PlotSpec {
    PlotSpec::new(
        "ensemble variance",
        "t",
        &["var_pp", "var_pm", "var_mp", "var_mm", "variance_bound"],
    )
    .dashed(&["variance_bound"])
}

fn montecarlo(cfg: &ExperimentConfig) -> Result<Products> {
    let mut out = Products::default();
    let (_, t) = ensemble(cfg, &mut out)?;
    out.add("montecarlo.csv", t, Some(montecarlo_plot()));
    Ok(out)
}

fn compare(cfg: &ExperimentConfig) -> Result<Products> {
    if cfg.montecarlo.beta.is_some() {
        return Err(CliError::validation(
            "montecarlo.beta",
            "compare needs a single initial reservoir level; unset beta",
        ));
    }
    let mut out = Products::default();
    let (limit, et) = trajectory(cfg, &mut out)?;
    let (mc, mt) = ensemble(cfg, &mut out)?;
    let mut t = Table::new(&["t", "dev_pp", "dev_pm", "dev_mp", "dev_mm", "max_dev"]);
    let mut per_time = Vec::new();
    for (i, &time) in limit.times.iter().enumerate() {
        let dev = deviation(&limit.states[i], &mc.mean[i]);
        let max = dev.iter().cloned().fold(0.0, f64::max);
        per_time.push(max);
        t.push(vec![time, dev[0], dev[1], dev[2], dev[3], max]);
    }
    let max_dev = per_time.iter().cloned().fold(0.0, f64::max);
    out.breach = max_dev > cfg.compare.threshold;
    out.diag("max_deviation", json!(max_dev));
    out.diag("max_deviation_per_time", json!(per_time));
    out.diag("threshold", json!(cfg.compare.threshold));
    out.diag("threshold_breached", json!(out.breach));
    out.add(
        "compare.csv",
        t,
        Some(PlotSpec::new(
            "limit minus ensemble mean",
            "t",
            &["dev_pp", "dev_pm", "dev_mp", "dev_mm", "max_dev"],
        )),
    );
    out.add("evolve.csv", et, Some(evolve_plot()));
    out.add("montecarlo.csv", mt, Some(montecarlo_plot()));
    Ok(out)
}

/// Entrywise `|a - b|` in the order `++, +-, -+, --`.
pub fn deviation(a: &TwoLevelState, b: &TwoLevelState) -> [f64; 4] {
    let (x, y) = (a.flat(), b.flat());
    [0, 1, 2, 3].map(|i| (x[i] - y[i]).norm())
}

fn vanhove(cfg: &ExperimentConfig) -> Result<Products> {
    let vh = VanHoveParams::new(cfg.energy, cfg.s, cfg.measure()?)?;
    let rho0 = cfg.rho0()?;
    let t_per_tau = if cfg.v > 0.0 { 1.0 / (cfg.v * cfg.v) } else { 0.0 };
    let r = vh.run(&cfg.tau.values(), t_per_tau, &rho0)?;
    let st = r.stationary.unwrap_or([f64::NAN; 2]);
    let mut t = Table::new(&[
        "tau",
        "rho_pp",
        "rho_mm",
        "offdiag_modulus",
        "offdiag_slow_phase",
        "gamma_plus",
        "gamma_minus",
        "stationary_pp",
        "stationary_mm",
    ]);
    for i in 0..r.taus.len() {
        let o = &r.offdiag[i];
        t.push(vec![
            r.taus[i],
            r.diag[i][0],
            r.diag[i][1],
            o.modulus,
            o.slow_phase,
            r.gamma[0],
            r.gamma[1],
            st[0],
            st[1],
        ]);
    }
    let mut out = Products::default();
    out.diag("gamma", json!(r.gamma));
    out.diag("zero_rate", json!(r.zero_rate));
    out.diag("stationary", json!(r.stationary));
    out.diag("t_per_tau", json!(t_per_tau));
    out.add(
        "vanhove.csv",
        t,
        Some(
            PlotSpec::new(
                "weak-coupling relaxation",
                "tau",
                &["rho_pp", "rho_mm", "stationary_pp", "stationary_mm"],
            )
            .dashed(&["stationary_pp", "stationary_mm"]),
        ),
    );
    Ok(out)
}

fn equilibrium(cfg: &ExperimentConfig) -> Result<Products> {
    let p = cfg.params()?;
    let d = densities(cfg, &p)?;
    let mut out = Products::default();
    density_diagnostics(&mut out, &d, &p);
    let eps = cfg.equilibrium.epsilon.unwrap_or_else(|| default_epsilon(&p));
    let (a, b) = p.measure.support();
    let k = cfg.equilibrium.points;
    let centres: Vec<f64> = if k == 1 {
        vec![0.5 * (a + b)]
    } else {
        (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect()
    };
    let mut micro = Table::new(&["lambda", "epsilon", "omega_pp", "omega_mm"]);
    let mut skipped = Vec::new();
    for l in centres {
        match equilibrium_micro(l, eps, &d) {
            Ok(e) => micro.push(vec![l, eps, population(&e.omega, 0), population(&e.omega, 1)]),
            Err(ModelError::EmptyWindow) => skipped.push(l),
            Err(e) => return Err(e.into()),
        }
    }
    let mut canon = Table::new(&["beta", "omega_pp", "omega_mm"]);
    for &beta in &cfg.equilibrium.betas {
        let w = equilibrium_canonical(beta, &d)?;
        canon.push(vec![beta, population(&w, 0), population(&w, 1)]);
    }
    out.diag("epsilon", json!(eps));
    out.diag("skipped_empty_windows", json!(skipped));
    out.add(
        "equilibrium_micro.csv",
        micro,
        Some(PlotSpec::new(
            "microcanonical populations",
            "lambda",
            &["omega_pp", "omega_mm"],
        )),
    );
    out.add(
        "equilibrium_canonical.csv",
        canon,
        Some(PlotSpec::new(
            "canonical populations",
            "beta",
            &["omega_pp", "omega_mm"],
        )),
    );
    Ok(out)
}

fn population(s: &TwoLevelState, i: usize) -> f64 {
    s.entries()[i][i].re
}
