// SPDX-License-Identifier: Apache-2.0

//! Coupled equations `f_a(z) = f_0(z - a s + v^2 f_{-a}(z))`, density
//! inversion and equilibrium reduced distributions.

use crate::measures::SpectralMeasure;
use crate::quad::trapezoid;
use crate::state::TwoLevelState;
use crate::{Error, Level, Result, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

pub const MAX_ITERATIONS: usize = 10_000;
/// Continuation factor between successive `eta` levels.
pub const ETA_FACTOR: f64 = 0.7;
/// Default inversion offset; the second level is half of it.
pub const DEFAULT_ETA1: f64 = 5e-5;
pub const DEFAULT_TOL: f64 = 1e-12;
/// Tolerance on the recovered unit mass.
pub const MASS_TOL: f64 = 1e-3;
/// Extrapolated densities below this are solver noise; exponential weights
/// in canonical averages would otherwise amplify them.
pub const DENSITY_FLOOR: f64 = 1e-10;
/// Below this separation from the real axis sign checks allow rounding noise.
const HERGLOTZ_SLACK: f64 = 1e-14;

/// Model parameters `s`, `v` and the reservoir measure.
#[derive(Clone, Debug)]
pub struct ModelParams {
    pub s: f64,
    pub v: f64,
    pub measure: SpectralMeasure,
}

impl ModelParams {
    pub fn new(s: f64, v: f64, measure: SpectralMeasure) -> Result<Self> {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidParameter(format!("s must be >= 0, got {s}")));
        }
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!("v must be >= 0, got {v}")));
        }
        Ok(ModelParams { s, v, measure })
    }

    /// `E + a s`.
    #[inline]
    pub fn level_energy(&self, e: f64, a: Level) -> f64 {
        e + a.sign() * self.s
    }
}

/// Solution `(f_+(z), f_-(z))` of the coupled equations at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StieltjesPair {
    pub z: C64,
    pub f_plus: C64,
    pub f_minus: C64,
    /// `max_a |f_a - f_0(A_a)|` at the returned values.
    pub residual: f64,
}

impl StieltjesPair {
    #[inline]
    pub fn get(&self, a: Level) -> C64 {
        match a {
            Level::Plus => self.f_plus,
            Level::Minus => self.f_minus,
        }
    }

    /// Shifted argument `A_a(z) = z - a s + v^2 f_{-a}(z)`.
    #[inline]
    pub fn shifted(&self, p: &ModelParams, a: Level) -> C64 {
        self.z - a.sign() * p.s + p.v * p.v * self.get(a.flip())
    }

    pub fn conj(&self) -> StieltjesPair {
        StieltjesPair {
            z: self.z.conj(),
            f_plus: self.f_plus.conj(),
            f_minus: self.f_minus.conj(),
            residual: self.residual,
        }
    }
}

fn rhs(p: &ModelParams, z: C64, f: [C64; 2]) -> [C64; 2] {
    let v2 = p.v * p.v;
    [
        p.measure.stieltjes_unchecked(z - p.s + v2 * f[1]),
        p.measure.stieltjes_unchecked(z + p.s + v2 * f[0]),
    ]
}

fn residual_of(f: [C64; 2], t: [C64; 2]) -> f64 {
    (f[0] - t[0]).norm().max((f[1] - t[1]).norm())
}

/// Upper half-plane Herglotz membership, with slack for rounding.
fn herglotz(z: C64, f: [C64; 2]) -> bool {
    let bound = 1.0 / z.im;
    f.iter().all(|x| {
        x.re.is_finite()
            && x.im.is_finite()
            && x.im >= -HERGLOTZ_SLACK * (1.0 + x.norm())
            && x.norm() <= bound * (1.0 + 1e-9)
    })
}

/// Residual of a pair re-substituted into the equations.
pub fn pair_residual(p: &ModelParams, pair: &StieltjesPair) -> f64 {
    let f = [pair.f_plus, pair.f_minus];
    residual_of(f, rhs(p, pair.z, f))
}

/// Solve the coupled equations at `z` to residual `tol`.
///
/// Newton steps on the 2x2 system are taken whenever they reduce the
/// residual and stay in the Herglotz class; otherwise a damped fixed-point
/// step `f <- (1 - g) f + g T(f)` is used, with `g` halved whenever the
/// residual grows. Lower half-plane points are solved at `conj(z)`.
pub fn solve_pair(p: &ModelParams, z: C64, tol: f64, warm: Option<&StieltjesPair>) -> Result<StieltjesPair> {
    if z.im == 0.0 || !z.im.is_finite() || !z.re.is_finite() {
        return Err(Error::RealAxisEvaluation(z.re));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("solver tolerance must be positive".into()));
    }
    if z.im < 0.0 {
        let w = warm.map(|w| w.conj());
        return solve_pair(p, z.conj(), tol, w.as_ref()).map(|s| s.conj());
    }
    let v2 = p.v * p.v;
    let mut f = match warm {
        Some(w) if herglotz(z, [w.f_plus, w.f_minus]) => [w.f_plus, w.f_minus],
        _ => [
            p.measure.stieltjes_unchecked(z - p.s),
            p.measure.stieltjes_unchecked(z + p.s),
        ],
    };
    let mut t = rhs(p, z, f);
    let mut r = residual_of(f, t);
    let mut gamma = 0.5;
    for _ in 0..MAX_ITERATIONS {
        if r <= tol {
            return Ok(StieltjesPair {
                z,
                f_plus: f[0],
                f_minus: f[1],
                residual: r,
            });
        }
        // Newton on F(f) = f - T(f); dT_+/df_- = v^2 f_0'(A_+) and vice versa
        if v2 > 0.0 {
            let a = v2 * p.measure.stieltjes_derivative(z - p.s + v2 * f[1]);
            let b = v2 * p.measure.stieltjes_derivative(z + p.s + v2 * f[0]);
            let det = 1.0 - a * b;
            if det.norm() > 1e-300 {
                let g = [f[0] - t[0], f[1] - t[1]];
                let cand = [f[0] - (g[0] + a * g[1]) / det, f[1] - (g[1] + b * g[0]) / det];
                if herglotz(z, cand) {
                    let tc = rhs(p, z, cand);
                    let rc = residual_of(cand, tc);
                    if rc < r {
                        f = cand;
                        t = tc;
                        r = rc;
                        continue;
                    }
                }
            }
        }
        loop {
            let cand = [f[0] * (1.0 - gamma) + t[0] * gamma, f[1] * (1.0 - gamma) + t[1] * gamma];
            let tc = rhs(p, z, cand);
            let rc = residual_of(cand, tc);
            if rc <= r || gamma < 1e-6 {
                f = cand;
                t = tc;
                r = rc;
                gamma = (gamma * 1.5).min(0.5);
                break;
            }
            gamma *= 0.5;
        }
    }
    if r <= tol {
        return Ok(StieltjesPair {
            z,
            f_plus: f[0],
            f_minus: f[1],
            residual: r,
        });
    }
    Err(Error::NoConvergence {
        re: z.re,
        im: z.im,
        residual: r,
    })
}

/// Continuation schedule from `max(2v, 1)` down to `eta` by factor 0.7.
pub fn eta_schedule(v: f64, eta: f64) -> Vec<f64> {
    let mut levels = Vec::new();
    let mut e = (2.0 * v).max(1.0);
    while e > eta {
        levels.push(e);
        e *= ETA_FACTOR;
    }
    levels.push(eta);
    levels
}

/// Solve at `lambda + i eta`, tracking the solution branch down from the
/// contraction region.
pub fn solve_continued(p: &ModelParams, lambda: f64, eta: f64, tol: f64) -> Result<StieltjesPair> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter("eta must be positive".into()));
    }
    let mut prev: Option<StieltjesPair> = None;
    for level in eta_schedule(p.v, eta) {
        let pair = solve_pair(p, C64::new(lambda, level), tol, prev.as_ref())?;
        prev = Some(pair);
    }
    Ok(prev.unwrap())
}

/// Pairs at `lambda_j + i eta` for every grid point; parallel across the
/// grid, sequential in `eta`.
pub fn solve_on_grid(p: &ModelParams, grid: &[f64], eta: f64, tol: f64) -> Result<Vec<StieltjesPair>> {
    grid.par_iter().map(|&l| solve_continued(p, l, eta, tol)).collect()
}

/// Limiting densities `nu_+'`, `nu_-'` on a grid.
#[derive(Clone, Debug)]
pub struct DensityGrid {
    pub lambda: Vec<f64>,
    pub nu_plus: Vec<f64>,
    pub nu_minus: Vec<f64>,
    /// Trapezoid masses of `nu_+` and `nu_-` over the grid.
    pub mass: [f64; 2],
    /// Pairs at the smaller offset, kept for output.
    pub pairs: Vec<StieltjesPair>,
    /// `false` when the values are the finite-`eta` smoothing without
    /// extrapolation (atomic reservoir, no coupling).
    pub extrapolated: bool,
}

impl DensityGrid {
    pub fn get(&self, a: Level) -> &[f64] {
        match a {
            Level::Plus => &self.nu_plus,
            Level::Minus => &self.nu_minus,
        }
    }

    pub fn max_density(&self) -> f64 {
        self.nu_plus.iter().chain(&self.nu_minus).cloned().fold(0.0, f64::max)
    }
}

/// Richardson-extrapolated inversion `2 d(eta/2) - d(eta)` with
/// `d(eta) = Im f_a(lambda + i eta) / pi`. Values below [`DENSITY_FLOOR`]
/// are set to zero.
pub fn invert_density(at_eta1: &[StieltjesPair], at_eta2: &[StieltjesPair]) -> Result<DensityGrid> {
    if at_eta1.len() != at_eta2.len() || at_eta1.len() < 2 {
        return Err(Error::InvalidParameter(
            "inversion needs two equally long grids of at least two points".into(),
        ));
    }
    for (p1, p2) in at_eta1.iter().zip(at_eta2) {
        if p1.z.re != p2.z.re || !((p2.z.im - 0.5 * p1.z.im).abs() <= 1e-12 * p1.z.im) {
            return Err(Error::InvalidParameter(
                "inversion grids must share lambda and satisfy eta2 = eta1 / 2".into(),
            ));
        }
    }
    let extrap = |a: Level| -> Vec<f64> {
        at_eta1
            .iter()
            .zip(at_eta2)
            .map(|(p1, p2)| {
                let d = (2.0 * p2.get(a).im - p1.get(a).im) / PI;
                if d < DENSITY_FLOOR {
                    0.0
                } else {
                    d
                }
            })
            .collect()
    };
    let grid = build(at_eta2, extrap(Level::Plus), extrap(Level::Minus), true);
    for m in grid.mass {
        if (m - 1.0).abs() > MASS_TOL {
            return Err(Error::MassDeficit { mass: m, tol: MASS_TOL });
        }
    }
    Ok(grid)
}

/// `Im f_a(lambda + i eta) / pi` without extrapolation.
pub fn smoothed_density(pairs: &[StieltjesPair]) -> DensityGrid {
    let d = |a: Level| -> Vec<f64> { pairs.iter().map(|p| (p.get(a).im / PI).max(0.0)).collect() };
    build(pairs, d(Level::Plus), d(Level::Minus), false)
}

fn build(pairs: &[StieltjesPair], plus: Vec<f64>, minus: Vec<f64>, extrapolated: bool) -> DensityGrid {
    let lambda: Vec<f64> = pairs.iter().map(|p| p.z.re).collect();
    let mass = [trapezoid(&lambda, &plus), trapezoid(&lambda, &minus)];
    DensityGrid {
        lambda,
        nu_plus: plus,
        nu_minus: minus,
        mass,
        pairs: pairs.to_vec(),
        extrapolated,
    }
}

/// Uniform grid covering the support of `nu_+` and `nu_-` with margin.
pub fn default_grid(p: &ModelParams, spacing: f64) -> Vec<f64> {
    let (a, b) = p.measure.support();
    let margin = p.s + 3.0 * p.v + 0.25;
    let (lo, hi) = (a - margin, b + margin);
    let n = ((hi - lo) / spacing).ceil().max(2.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Densities at the default offsets `eta1 = 5e-5`, `eta2 = eta1 / 2`.
///
/// For an atomic reservoir at zero coupling the limit is atomic; the
/// finite-`eta1` smoothing is returned instead and no mass check is made.
pub fn spectral_densities(p: &ModelParams, grid: &[f64], eta1: f64, tol: f64) -> Result<DensityGrid> {
    if p.measure.is_atomic() && p.v == 0.0 {
        return Ok(smoothed_density(&solve_on_grid(p, grid, eta1, tol)?));
    }
    let p1 = solve_on_grid(p, grid, eta1, tol)?;
    let p2 = solve_on_grid(p, grid, 0.5 * eta1, tol)?;
    invert_density(&p1, &p2)
}

/// Microcanonical reduced distribution at energy `lambda`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EquilibriumState {
    pub lambda: f64,
    pub epsilon: f64,
    pub omega: TwoLevelState,
}

/// Default window half-width: 5% of the reservoir support width.
pub fn default_epsilon(p: &ModelParams) -> f64 {
    let (a, b) = p.measure.support();
    0.05 * (b - a).max(1e-12)
}

/// `omega_a = nubar_a / (nubar_+ + nubar_-)` with window averages over
/// `[lambda - eps, lambda + eps]`.
pub fn equilibrium_micro(lambda: f64, epsilon: f64, d: &DensityGrid) -> Result<EquilibriumState> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("window half-width must be positive".into()));
    }
    let (lo, hi) = (lambda - epsilon, lambda + epsilon);
    let first = d.lambda[0];
    let last = *d.lambda.last().unwrap();
    if lo < first || hi > last {
        return Err(Error::WindowOutOfRange { lo, hi });
    }
    let m = [
        window_integral(&d.lambda, &d.nu_plus, lo, hi),
        window_integral(&d.lambda, &d.nu_minus, lo, hi),
    ];
    let total = m[0] + m[1];
    if m[0] < 1e-14 && m[1] < 1e-14 {
        return Err(Error::EmptyWindow);
    }
    let omega = TwoLevelState::diagonal(m[0] / total, 1.0 - m[0] / total)?;
    Ok(EquilibriumState { lambda, epsilon, omega })
}

/// Trapezoid integral of the piecewise-linear interpolant over `[lo, hi]`.
fn window_integral(x: &[f64], y: &[f64], lo: f64, hi: f64) -> f64 {
    let at = |t: f64| -> f64 {
        let i = x.partition_point(|&e| e <= t).clamp(1, x.len() - 1);
        let s = (t - x[i - 1]) / (x[i] - x[i - 1]);
        y[i - 1] + s * (y[i] - y[i - 1])
    };
    let mut xs = vec![lo];
    let mut ys = vec![at(lo)];
    for (&xi, &yi) in x.iter().zip(y) {
        if xi > lo && xi < hi {
            xs.push(xi);
            ys.push(yi);
        }
    }
    xs.push(hi);
    ys.push(at(hi));
    trapezoid(&xs, &ys)
}

/// Canonical reduced distribution `diag(m_+, m_-) / (m_+ + m_-)`,
/// `m_a = int e^{-beta lambda} nu_a(d lambda)`, with max-shifted exponents.
pub fn equilibrium_canonical(beta: f64, d: &DensityGrid) -> Result<TwoLevelState> {
    if !beta.is_finite() {
        return Err(Error::InvalidParameter("beta must be finite".into()));
    }
    let shift = d
        .lambda
        .iter()
        .zip(d.nu_plus.iter().zip(&d.nu_minus))
        .filter(|(_, (a, b))| **a > 0.0 || **b > 0.0)
        .map(|(l, _)| -beta * l)
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::TailOverflow);
    }
    let weight: Vec<f64> = d.lambda.iter().map(|l| (-beta * l - shift).exp()).collect();
    let moment = |nu: &[f64]| -> f64 {
        let y: Vec<f64> = nu.iter().zip(&weight).map(|(a, w)| a * w).collect();
        trapezoid(&d.lambda, &y)
    };
    let (mp, mm) = (moment(&d.nu_plus), moment(&d.nu_minus));
    let total = mp + mm;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::TailOverflow);
    }
    TwoLevelState::diagonal(mp / total, 1.0 - mp / total)
}
