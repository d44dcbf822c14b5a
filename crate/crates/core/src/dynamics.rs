// SPDX-License-Identifier: Apache-2.0

//! Limiting one-point propagators, two-point functions and the limiting
//! reduced density matrix.
//!
//! All time-domain quantities are inverse generalized Fourier transforms
//! along horizontal lines `L1` (above the real axis, kernel `e^{-itz}`) and
//! `L2` (below, kernel `e^{itz}`). Outside `[-X, X]` both lines are rotated
//! onto vertical rays pointing away from the real axis in the direction in
//! which the kernel decays; the integrands are analytic there because
//! `X` exceeds the support of every measure involved.
//!
//! The density matrix is evaluated as
//!
//! ```text
//! rho_ad(E, t) = conj(U_a(t)) U_d(t) rho_ad(0)
//!              + (2 pi)^-2 int_L2 int_L1 e^{it(z2 - z1)} R_ad(z1, z2)
//! ```
//!
//! where the first term is the product part `f_a f_d rho_ad(0)` of the
//! full integrand evaluated exactly through the one-point propagators, and
//! `R_ad` decays like `1/|z|^2` in each variable.

use crate::quad::GaussLegendre;
use crate::selfconsistent::{solve_continued, solve_pair, ModelParams, StieltjesPair};
use crate::state::TwoLevelState;
use crate::{Error, Level, Result, C64};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Largest number of nodes allowed on one contour line.
pub const NODE_BUDGET: usize = 20_000;
/// Smallest admissible `|1 - v^4 f f|` on the contour.
pub const MIN_DENOMINATOR: f64 = 1e-6;
const SOLVER_TOL: f64 = 1e-13;
/// Below this `|A - B|` the two-point closed form switches to `f_0'`.
const CONFLUENT: f64 = 1e-5;

/// `f_a(E, z) = 1 / (E + a s - z - v^2 f_{-a}(z))`, both diagonal entries.
pub fn f_e(p: &ModelParams, e: f64, pair: &StieltjesPair) -> [C64; 2] {
    [
        1.0 / (e - pair.shifted(p, Level::Plus)),
        1.0 / (e - pair.shifted(p, Level::Minus)),
    ]
}

/// `f_{b,g}(z1, z2) = int nu_0(dE) f_b(E, z1) f_g(E, z2)` by direct
/// quadrature over the reservoir measure.
pub fn two_point(p: &ModelParams, beta: Level, gamma: Level, pair1: &StieltjesPair, pair2: &StieltjesPair) -> C64 {
    let a = pair1.shifted(p, beta);
    let b = pair2.shifted(p, gamma);
    p.measure
        .expect_with(|e| 1.0 / ((e - a) * (e - b)), &[a.re, b.re], 1e-13, 1e-16)
}

/// Closed form of [`two_point`] by partial fractions:
/// `(f_b(z1) - f_g(z2)) / (A_b(z1) - A_g(z2))`.
pub fn two_point_closed(
    p: &ModelParams,
    beta: Level,
    gamma: Level,
    pair1: &StieltjesPair,
    pair2: &StieltjesPair,
) -> C64 {
    let a = pair1.shifted(p, beta);
    let b = pair2.shifted(p, gamma);
    partial_fraction(p, pair1.get(beta), pair2.get(gamma), a, b)
}

#[inline]
fn partial_fraction(p: &ModelParams, fa: C64, fb: C64, a: C64, b: C64) -> C64 {
    let d = a - b;
    if d.norm() < CONFLUENT * (1.0 + a.norm()) {
        p.measure.stieltjes_derivative(0.5 * (a + b))
    } else {
        (fa - fb) / d
    }
}

/// Contour settings; `None` fields are chosen automatically per time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    /// Offset of `L1` above the real axis.
    pub eta1: Option<f64>,
    /// Offset of `L2` below the real axis.
    pub eta2: Option<f64>,
    /// Half-width of the horizontal part.
    pub x: Option<f64>,
    /// Number of panels on the horizontal part.
    pub panels: Option<usize>,
    /// Target quadrature error.
    pub tol: f64,
}

impl Default for ContourSpec {
    fn default() -> Self {
        ContourSpec {
            eta1: None,
            eta2: None,
            x: None,
            panels: None,
            tol: 1e-6,
        }
    }
}

impl ContourSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, e) in [("eta1", self.eta1), ("eta2", self.eta2), ("x", self.x)] {
            if let Some(e) = e {
                if !(e.is_finite() && e > 0.0) {
                    return Err(Error::InvalidParameter(format!("contour {name} must be positive")));
                }
            }
        }
        if self.panels == Some(0) {
            return Err(Error::InvalidParameter("contour needs at least one panel".into()));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParameter("contour tol must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Default offset `min(0.5, 1 / (1 + t))`, keeping `e^{t(eta1 + eta2)} <= e`.
pub fn default_eta(t: f64) -> f64 {
    (1.0 / (1.0 + t)).min(0.5)
}

/// Gauss-Legendre order reaching `tol` on panels twice as wide as the
/// distance to the nearest singularity.
pub fn panel_order(tol: f64) -> usize {
    (((1.0 / tol).ln() / 1.763).ceil() as usize + 2).clamp(6, 24)
}

/// Node set of one contour line with the solved pairs at each node.
#[derive(Clone, Debug)]
pub struct Line {
    pub nodes: Vec<C64>,
    /// Complex weights including `dz` along rays.
    pub weights: Vec<C64>,
    pub pairs: Vec<StieltjesPair>,
}

impl Line {
    fn conj(&self) -> Line {
        Line {
            nodes: self.nodes.iter().map(|z| z.conj()).collect(),
            weights: self.weights.iter().map(|w| w.conj()).collect(),
            pairs: self.pairs.iter().map(|p| p.conj()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Resolved geometry for one evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Geometry {
    pub eta1: f64,
    pub eta2: f64,
    pub x: f64,
    pub order: usize,
}

/// `X >= support radius + s + 2v + v^2 + 1.5`, `X >= |E| + s + 2v + 1.5`
/// and `X >= support radius + max(1, 10 eta)`.
pub fn default_half_width(p: &ModelParams, e: f64, eta: f64) -> f64 {
    let r = p.measure.support_radius();
    let spread = p.s + 2.0 * p.v;
    (r + spread + p.v * p.v + 1.5)
        .max(e.abs() + spread + 1.5)
        .max(r + (10.0 * eta).max(1.0))
}

/// Panel edges on `[-x, x]`: width `min(pi/t, 2 eta, 0.25)` over the part
/// where the integrands have structure, `min(pi/t, 0.5)` elsewhere.
fn segment_edges(p: &ModelParams, e: f64, x: f64, eta: f64, t: f64, panels: Option<usize>) -> Vec<f64> {
    if let Some(n) = panels {
        return (0..=n).map(|i| -x + 2.0 * x * i as f64 / n as f64).collect();
    }
    let osc = if t > 0.0 { PI / t } else { f64::INFINITY };
    let fine = osc.min(2.0 * eta).min(0.25);
    let coarse = osc.min(0.5);
    let (a, b) = p.measure.support();
    let spread = p.s + 2.0 * p.v + 0.5;
    let lo = (a.min(e) - spread).max(-x);
    let hi = (b.max(e) + spread).min(x);
    let mut edges = Vec::new();
    let push_range = |from: f64, to: f64, h: f64, edges: &mut Vec<f64>| {
        if to <= from {
            return;
        }
        let n = ((to - from) / h).ceil().max(1.0) as usize;
        for i in 0..n {
            edges.push(from + (to - from) * i as f64 / n as f64);
        }
    };
    push_range(-x, lo, coarse, &mut edges);
    push_range(lo, hi, fine, &mut edges);
    push_range(hi, x, coarse, &mut edges);
    edges.push(x);
    edges
}

/// `y`-panels for a ray: geometric from `min(0.5, 0.5/t)` up to a cut-off,
/// then `y = Y / (1 - u)` on `u in [0, 1)`.
fn ray_nodes(t: f64, x: f64, gl: &GaussLegendre) -> Vec<(f64, f64)> {
    let first = if t > 0.0 { (0.5 / t).min(0.5) } else { 0.5 };
    let cut = if t > 0.0 {
        (40.0 / t).min(4.0 * x).max(first)
    } else {
        4.0 * x
    };
    let mut edges = vec![0.0, first];
    while *edges.last().unwrap() < cut {
        let next = (edges.last().unwrap() * 2.0).min(cut);
        edges.push(next);
    }
    let mut out = Vec::new();
    for w in edges.windows(2) {
        out.extend(gl.on(w[0], w[1]));
    }
    let y0 = cut;
    for w in [0.0, 0.5, 0.8, 0.95, 1.0].windows(2) {
        for (u, wu) in gl.on(w[0], w[1]) {
            let one = 1.0 - u;
            out.push((y0 / one, wu * y0 / (one * one)));
        }
    }
    out
}

/// Upper line `L1` at offset `eta`: horizontal part and both downward rays.
fn build_upper(
    p: &ModelParams,
    e: f64,
    eta: f64,
    x: f64,
    t: f64,
    spec: &ContourSpec,
    gl: &GaussLegendre,
) -> Result<Line> {
    let edges = segment_edges(p, e, x, eta, t, spec.panels);
    let rays = ray_nodes(t, x, gl);
    let needed = (edges.len() - 1) * gl.nodes.len() + 2 * rays.len();
    if needed > NODE_BUDGET {
        return Err(Error::QuadratureBudgetExceeded {
            needed,
            budget: NODE_BUDGET,
        });
    }
    let mut nodes = Vec::with_capacity(needed);
    let mut weights = Vec::with_capacity(needed);
    // left ray, from -x - i inf up to -x + i eta
    for &(y, w) in rays.iter().rev() {
        nodes.push(C64::new(-x, eta - y));
        weights.push(C64::new(0.0, w));
    }
    for win in edges.windows(2) {
        for (xx, w) in gl.on(win[0], win[1]) {
            nodes.push(C64::new(xx, eta));
            weights.push(C64::new(w, 0.0));
        }
    }
    // right ray, from x + i eta down to x - i inf
    for &(y, w) in &rays {
        nodes.push(C64::new(x, eta - y));
        weights.push(C64::new(0.0, -w));
    }
    for z in nodes.iter_mut() {
        if z.im == 0.0 {
            z.im = 1e-14;
        }
    }
    let pairs = solve_line(p, &nodes)?;
    Ok(Line { nodes, weights, pairs })
}

/// Solve along the line in three independent stretches, each warm-started
/// from its neighbour.
fn solve_line(p: &ModelParams, nodes: &[C64]) -> Result<Vec<StieltjesPair>> {
    // split at the ray/segment junctions so the stretches run in parallel
    let mut cuts = vec![0];
    for i in 1..nodes.len() {
        if nodes[i].re != nodes[i - 1].re && (nodes[i].im != nodes[i - 1].im) {
            cuts.push(i);
        }
    }
    cuts.push(nodes.len());
    let chunks: Vec<(usize, usize)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let solved: Result<Vec<Vec<StieltjesPair>>> = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut out = Vec::with_capacity(hi - lo);
            let mut prev: Option<StieltjesPair> = None;
            for z in &nodes[lo..hi] {
                let pair = match solve_pair(p, *z, SOLVER_TOL, prev.as_ref()) {
                    Ok(pair) => pair,
                    Err(_) => {
                        let up = solve_continued(p, z.re, z.im.abs(), SOLVER_TOL)?;
                        if z.im < 0.0 {
                            up.conj()
                        } else {
                            up
                        }
                    }
                };
                prev = Some(pair);
                out.push(pair);
            }
            Ok(out)
        })
        .collect();
    Ok(solved?.into_iter().flatten().collect())
}

/// Both lines for one evaluation.
#[derive(Clone, Debug)]
pub struct Contours {
    pub l1: Line,
    pub l2: Line,
    pub geometry: Geometry,
}

impl Contours {
    pub fn build(p: &ModelParams, e: f64, t: f64, spec: &ContourSpec) -> Result<Contours> {
        Self::build_scaled(p, e, t, spec, 1.0)
    }

    fn build_scaled(p: &ModelParams, e: f64, t: f64, spec: &ContourSpec, scale: f64) -> Result<Contours> {
        spec.validate()?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time must be >= 0, got {t}")));
        }
        let eta1 = spec.eta1.unwrap_or_else(|| default_eta(t)) * scale;
        let eta2 = spec.eta2.unwrap_or_else(|| default_eta(t)) * scale;
        let x = spec.x.unwrap_or_else(|| default_half_width(p, e, eta1.max(eta2)));
        let order = panel_order(spec.tol);
        let gl = GaussLegendre::new(order);
        let l1 = build_upper(p, e, eta1, x, t, spec, &gl)?;
        let l2 = if eta2 == eta1 {
            l1.conj()
        } else {
            build_upper(p, e, eta2, x, t, spec, &gl)?.conj()
        };
        Ok(Contours {
            l1,
            l2,
            geometry: Geometry { eta1, eta2, x, order },
        })
    }
}

/// `(U_E)_aa(t) = e^{i E_a t} + (i/2pi) int_L2 e^{itz} [f_a(E,z) - 1/(E_a - z)] dz`.
fn propagator_on(p: &ModelParams, e: f64, t: f64, l2: &Line) -> [C64; 2] {
    let mut out = [C64::new(0.0, 0.0); 2];
    for a in Level::BOTH {
        let ea = p.level_energy(e, a);
        let mut acc = C64::new(0.0, 0.0);
        for ((z, w), pair) in l2.nodes.iter().zip(&l2.weights).zip(&l2.pairs) {
            let g = 1.0 / (e - pair.shifted(p, a));
            let free = 1.0 / (ea - z);
            acc += w * (C64::i() * t * z).exp() * (g - free);
        }
        out[a.index()] = C64::new(0.0, ea * t).exp() + C64::i() / (2.0 * PI) * acc;
    }
    out
}

/// Limiting one-point propagator `U_E(t)`, diagonal entries.
pub fn u_e(p: &ModelParams, e: f64, t: f64, spec: &ContourSpec) -> Result<[C64; 2]> {
    let c = Contours::build(p, e, t, spec)?;
    Ok(propagator_on(p, e, t, &c.l2))
}

/// `u(t) = (i/2pi) int_L e^{izt} f(z) dz`, diagonal entries, with the free
/// part `-1/(z - c_a)`, `c_a = mean(nu_0) + a s`, integrated exactly.
pub fn u_mean(p: &ModelParams, t: f64, spec: &ContourSpec) -> Result<[C64; 2]> {
    let mean = p.measure.mean();
    let c = Contours::build(p, mean, t, spec)?;
    let mut out = [C64::new(0.0, 0.0); 2];
    for a in Level::BOTH {
        let ca = p.level_energy(mean, a);
        let mut acc = C64::new(0.0, 0.0);
        for ((z, w), pair) in c.l2.nodes.iter().zip(&c.l2.weights).zip(&c.l2.pairs) {
            acc += w * (C64::i() * t * z).exp() * (pair.get(a) + 1.0 / (z - ca));
        }
        out[a.index()] = C64::new(0.0, ca * t).exp() + C64::i() / (2.0 * PI) * acc;
    }
    Ok(out)
}

/// Per-evaluation diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub geometry: Geometry,
    pub nodes_per_line: usize,
    pub min_denominator: f64,
    pub trace_error: f64,
    pub hermiticity_error: f64,
    /// Offsets were doubled after a near-zero denominator.
    pub eta_doubled: bool,
}

/// Limiting reduced density matrix at one time, with diagnostics.
pub fn rho_limit_with_diagnostics(
    p: &ModelParams,
    e: f64,
    t: f64,
    rho0: &TwoLevelState,
    spec: &ContourSpec,
) -> Result<(TwoLevelState, Diagnostics)> {
    let c = Contours::build(p, e, t, spec)?;
    match evaluate(p, e, t, rho0, &c) {
        Ok((rho, min_d)) => Ok((rho, diagnostics(&c, rho, min_d, false))),
        Err(Error::DenominatorNearZero(_)) => {
            let c = Contours::build_scaled(p, e, t, spec, 2.0)?;
            let (rho, min_d) = evaluate(p, e, t, rho0, &c)?;
            Ok((rho, diagnostics(&c, rho, min_d, true)))
        }
        Err(err) => Err(err),
    }
}

fn diagnostics(c: &Contours, rho: TwoLevelState, min_d: f64, doubled: bool) -> Diagnostics {
    Diagnostics {
        geometry: c.geometry,
        nodes_per_line: c.l1.len(),
        min_denominator: min_d,
        trace_error: rho.trace_error(),
        hermiticity_error: rho.hermiticity_error(),
        eta_doubled: doubled,
    }
}

/// Limiting reduced density matrix `rho(E, t)` for initial state `rho0`.
pub fn rho_limit(p: &ModelParams, e: f64, t: f64, rho0: &TwoLevelState, spec: &ContourSpec) -> Result<TwoLevelState> {
    rho_limit_with_diagnostics(p, e, t, rho0, spec).map(|r| r.0)
}

/// Per-node quantities on one line.
struct NodeData {
    /// `w e^{-+itz}`.
    kernel: Vec<C64>,
    /// `f_+(z)`, `f_-(z)`.
    f: Vec<[C64; 2]>,
    /// Shifted arguments `A_+(z)`, `A_-(z)`.
    shifted: Vec<[C64; 2]>,
    /// `f_+(E, z)`, `f_-(E, z)`.
    g: Vec<[C64; 2]>,
}

fn node_data(p: &ModelParams, e: f64, line: &Line, phase: C64) -> NodeData {
    let n = line.len();
    let mut d = NodeData {
        kernel: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
        shifted: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
    };
    for ((z, w), pair) in line.nodes.iter().zip(&line.weights).zip(&line.pairs) {
        d.kernel.push(w * (phase * z).exp());
        d.f.push([pair.f_plus, pair.f_minus]);
        let sh = [pair.shifted(p, Level::Plus), pair.shifted(p, Level::Minus)];
        d.g.push([1.0 / (e - sh[0]), 1.0 / (e - sh[1])]);
        d.shifted.push(sh);
    }
    d
}

fn evaluate(p: &ModelParams, e: f64, t: f64, rho0: &TwoLevelState, c: &Contours) -> Result<(TwoLevelState, f64)> {
    let u = propagator_on(p, e, t, &c.l2);
    let r0 = rho0.entries();
    let mut rho = TwoLevelState::zero();
    for a in Level::BOTH {
        for d in Level::BOTH {
            rho.set(a, d, u[a.index()].conj() * u[d.index()] * r0[a.index()][d.index()]);
        }
    }
    if p.v == 0.0 {
        return Ok((rho, 1.0));
    }
    let n1 = node_data(p, e, &c.l1, C64::new(0.0, -t));
    let n2 = node_data(p, e, &c.l2, C64::new(0.0, t));
    let v2 = p.v * p.v;
    let v4 = v2 * v2;

    // rows in parallel, reduced in row order for reproducibility
    let rows: Vec<([C64; 4], f64)> = (0..c.l1.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = [C64::new(0.0, 0.0); 4];
            let mut min_d = f64::INFINITY;
            let (f1, a1, g1, k1) = (n1.f[i], n1.shifted[i], n1.g[i], n1.kernel[i]);
            for j in 0..c.l2.len() {
                let (f2, b2, g2) = (n2.f[j], n2.shifted[j], n2.g[j]);
                // F[b][g] = f_{b,g}(z1, z2)
                let mut ff = [[C64::new(0.0, 0.0); 2]; 2];
                for bi in 0..2 {
                    for gi in 0..2 {
                        ff[bi][gi] = partial_fraction(p, f1[bi], f2[gi], a1[bi], b2[gi]);
                    }
                }
                let d_same = 1.0 - v4 * ff[0][0] * ff[1][1];
                let d_cross = 1.0 - v4 * ff[0][1] * ff[1][0];
                min_d = min_d.min(d_same.norm()).min(d_cross.norm());
                let kern = k1 * n2.kernel[j];
                for ai in 0..2 {
                    for di in 0..2 {
                        let (na, nd) = (1 - ai, 1 - di);
                        let den = if ai == di { d_same } else { d_cross };
                        let direct = g1[ai] * g2[di] * r0[ai][di] * (v4 * ff[ai][di] * ff[na][nd]);
                        let exchange = v2 * g1[na] * g2[nd] * ff[ai][di] * r0[na][nd];
                        acc[2 * ai + di] += kern * (direct + exchange) / den;
                    }
                }
            }
            (acc, min_d)
        })
        .collect();
    let mut sum = [C64::new(0.0, 0.0); 4];
    let mut min_d = f64::INFINITY;
    for (acc, m) in &rows {
        for k in 0..4 {
            sum[k] += acc[k];
        }
        min_d = min_d.min(*m);
    }
    if min_d < MIN_DENOMINATOR {
        return Err(Error::DenominatorNearZero(min_d));
    }
    let scale = 1.0 / (4.0 * PI * PI);
    for a in Level::BOTH {
        for d in Level::BOTH {
            let k = 2 * a.index() + d.index();
            let v = rho.get(a, d) + sum[k] * scale;
            rho.set(a, d, v);
        }
    }
    Ok((rho, min_d))
}

/// Time series of reduced density matrices.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<TwoLevelState>,
    pub diagnostics: Vec<Diagnostics>,
}

/// `rho_limit` on a strictly increasing time grid.
pub fn evolve(p: &ModelParams, e: f64, rho0: &TwoLevelState, times: &[f64], spec: &ContourSpec) -> Result<Trajectory> {
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter(
            "time grid must be nonempty and strictly increasing".into(),
        ));
    }
    let mut states = Vec::with_capacity(times.len());
    let mut diagnostics = Vec::with_capacity(times.len());
    for &t in times {
        let (s, d) = rho_limit_with_diagnostics(p, e, t, rho0, spec)?;
        states.push(s);
        diagnostics.push(d);
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        diagnostics,
    })
}
