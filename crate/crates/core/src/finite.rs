// SPDX-License-Identifier: Apache-2.0

//! Finite-`n` oracle: GUE sampling, the `2n x 2n` composite Hamiltonian,
//! exact evolution through one Hermitian eigendecomposition per sample,
//! and ensemble statistics.
//!
//! Basis ordering is `(a, j)` with row `a.index() * n + j`, so the `+`
//! block comes first.

use crate::selfconsistent::ModelParams;
use crate::state::{TwoLevelState, PSD_TOL};
use crate::{Error, Level, Result, C64};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;

/// Tolerance on trace and Hermiticity of a single-sample reduced state.
pub const SAMPLE_TOL: f64 = 1e-10;

/// Realized model: deterministic reservoir spectrum plus parameters.
#[derive(Clone, Debug)]
pub struct FiniteModel {
    pub n: usize,
    /// Sorted reservoir eigenvalues `E_j`.
    pub eigenvalues: Vec<f64>,
    pub params: ModelParams,
    /// Initial reservoir index, zero-based.
    pub k: usize,
    pub seed: u64,
}

impl FiniteModel {
    /// Quantile discretization of the measure, initial index `k` (zero-based).
    pub fn new(params: ModelParams, n: usize, k: usize, seed: u64) -> Result<Self> {
        let eigenvalues = params.measure.quantile_eigenvalues(n)?;
        if k >= n {
            return Err(Error::InvalidParameter(format!("initial index {k} must be < n = {n}")));
        }
        Ok(FiniteModel {
            n,
            eigenvalues,
            params,
            k,
            seed,
        })
    }

    /// Initial index chosen as the eigenvalue nearest to `e` (lowest on ties).
    pub fn nearest(params: ModelParams, n: usize, e: f64, seed: u64) -> Result<Self> {
        let mut fm = Self::new(params, n, 0, seed)?;
        fm.k = nearest_index(&fm.eigenvalues, e);
        Ok(fm)
    }

    /// `2n`.
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    #[inline]
    pub fn row(&self, a: Level, j: usize) -> usize {
        a.index() * self.n + j
    }

    /// Per-sample RNG: ChaCha20 keyed by the base seed, stream = sample index.
    pub fn rng(&self, sample: u64) -> ChaCha20Rng {
        rng_for(self.seed, sample)
    }

    /// GUE draw for one sample index.
    pub fn sample(&self, index: u64) -> GueSample {
        sample_gue(self.n, &mut self.rng(index))
    }

    /// Eigendecomposition of `H` for one sample index.
    pub fn spectrum(&self, index: u64) -> Result<Spectrum> {
        Spectrum::new(self, &self.sample(index))
    }
}

pub fn nearest_index(values: &[f64], e: f64) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if (v - e).abs() < (values[best] - e).abs() {
            best = i;
        }
    }
    best
}

pub fn rng_for(seed: u64, sample: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

/// Hermitian `n x n` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GueSample {
    pub n: usize,
    pub data: Vec<C64>,
}

impl GueSample {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C64) -> GueSample {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        GueSample { n, data }
    }
}

/// Diagonal entries `N(0, 1)`, off-diagonal real and imaginary parts
/// `N(0, 1/2)`, drawn row by row over the upper triangle.
pub fn sample_gue<R: Rng>(n: usize, rng: &mut R) -> GueSample {
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let d: f64 = rng.sample(StandardNormal);
        data[i * n + i] = C64::new(d, 0.0);
        for j in i + 1..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let w = C64::new(re, im) * FRAC_1_SQRT_2;
            data[i * n + j] = w;
            data[j * n + i] = w.conj();
        }
    }
    GueSample { n, data }
}

/// `[[h + s, v w / sqrt(n)], [v w / sqrt(n), h - s]]`.
pub fn assemble_h(fm: &FiniteModel, w: &GueSample) -> Result<Mat<C64>> {
    let n = fm.n;
    if w.n != n {
        return Err(Error::InvalidParameter(format!(
            "GUE sample has size {}, model has n = {n}",
            w.n
        )));
    }
    let c = fm.params.v / (n as f64).sqrt();
    let s = fm.params.s;
    Ok(Mat::from_fn(2 * n, 2 * n, |r, q| {
        let (a, i) = (r / n, r % n);
        let (b, j) = (q / n, q % n);
        if a == b {
            if i == j {
                let sign = if a == 0 { 1.0 } else { -1.0 };
                C64::new(fm.eigenvalues[i] + sign * s, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        } else {
            w.get(i, j) * c
        }
    }))
}

/// Eigendecomposition `H = V diag(lambda) V^dagger` of one realization.
pub struct Spectrum {
    pub n: usize,
    pub values: Vec<f64>,
    vectors: Mat<C64>,
}

impl Spectrum {
    pub fn new(fm: &FiniteModel, w: &GueSample) -> Result<Spectrum> {
        let h = assemble_h(fm, w)?;
        Self::from_matrix(fm.n, &h)
    }

    pub fn from_matrix(n: usize, h: &Mat<C64>) -> Result<Spectrum> {
        let evd = h
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::EigendecompositionFailure(format!("{e:?}")))?;
        let values: Vec<f64> = evd.S().column_vector().iter().map(|x| x.re).collect();
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigendecompositionFailure("non-finite eigenvalue".into()));
        }
        Ok(Spectrum {
            n,
            values,
            vectors: evd.U().to_owned(),
        })
    }

    /// Eigenvector `m` in the `(alpha, j)` basis.
    #[inline]
    pub fn column(&self, m: usize) -> &[C64] {
        self.vectors
            .col(m)
            .try_as_col_major()
            .expect("owned matrices are column-major")
            .as_slice()
    }

    /// `V e^{i t Lambda} V^dagger x`, i.e. `U(t) x` with `U(t) = e^{itH}`.
    pub fn apply(&self, t: f64, x: &[C64]) -> Vec<C64> {
        let dim = self.values.len();
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for m in 0..dim {
            let col = self.column(m);
            let proj: C64 = col.iter().zip(x).map(|(v, xi)| v.conj() * xi).sum();
            let c = proj * C64::new(0.0, t * self.values[m]).exp();
            for (o, v) in out.iter_mut().zip(col) {
                *o += c * v;
            }
        }
        out
    }

    /// `U(t) e_{b k}`; only one row of `V^dagger` is needed.
    pub fn propagator_column(&self, t: f64, b: Level, k: usize) -> Vec<C64> {
        let dim = self.values.len();
        let r = b.index() * self.n + k;
        let mut out = vec![C64::new(0.0, 0.0); dim];
        for m in 0..dim {
            let col = self.column(m);
            let c = col[r].conj() * C64::new(0.0, t * self.values[m]).exp();
            for (o, v) in out.iter_mut().zip(col) {
                *o += c * v;
            }
        }
        out
    }

    /// Reduced density matrix at `t` for `mu(0) = rho0 (x) P_k`, without
    /// validation.
    pub fn reduced_raw(&self, rho0: &TwoLevelState, k: usize, t: f64) -> TwoLevelState {
        let n = self.n;
        // psi_b = e^{-itH} e_{b k}
        let psi = [
            self.propagator_column(-t, Level::Plus, k),
            self.propagator_column(-t, Level::Minus, k),
        ];
        let r0 = rho0.entries();
        let mut out = TwoLevelState::zero();
        for a in Level::BOTH {
            for d in Level::BOTH {
                let mut acc = C64::new(0.0, 0.0);
                for bi in 0..2 {
                    for gi in 0..2 {
                        if r0[bi][gi] == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let s: C64 = (0..n)
                            .map(|j| psi[bi][a.index() * n + j] * psi[gi][d.index() * n + j].conj())
                            .sum();
                        acc += r0[bi][gi] * s;
                    }
                }
                out.set(a, d, acc);
            }
        }
        out
    }

    /// Validated reduced density matrix.
    pub fn reduced(&self, rho0: &TwoLevelState, k: usize, t: f64) -> Result<TwoLevelState> {
        let r = self.reduced_raw(rho0, k, t);
        r.validate(SAMPLE_TOL, PSD_TOL).map_err(|e| {
            Error::InvalidState(format!(
                "sample reduced state at t = {t}: {e}; eigenvalues {:?}",
                r.eigenvalues()
            ))
        })?;
        Ok(r)
    }

    /// Mixture `sum_k p_k rho^(k)(t)` over initial reservoir indices.
    pub fn reduced_mixture(&self, rho0: &TwoLevelState, weights: &[f64], t: f64) -> Result<TwoLevelState> {
        let mut acc = TwoLevelState::zero();
        for (k, &p) in weights.iter().enumerate() {
            if p > 0.0 {
                acc = acc.add(&self.reduced_raw(rho0, k, t).scale(p));
            }
        }
        acc.validate(SAMPLE_TOL, PSD_TOL)?;
        Ok(acc)
    }

    /// `g_{ag}(z) = n^{-1} sum_j (H - z)^{-1}_{aj, gj}`.
    pub fn resolvent_trace(&self, z: C64) -> Result<[[C64; 2]; 2]> {
        if z.im == 0.0 {
            return Err(Error::RealAxisEvaluation(z.re));
        }
        let n = self.n;
        let mut g = [[C64::new(0.0, 0.0); 2]; 2];
        for (m, &l) in self.values.iter().enumerate() {
            let col = self.column(m);
            let r = 1.0 / (l - z);
            for a in 0..2 {
                for c in 0..2 {
                    let s: C64 = (0..n).map(|j| col[a * n + j] * col[c * n + j].conj()).sum();
                    g[a][c] += s * r;
                }
            }
        }
        for row in g.iter_mut() {
            for x in row.iter_mut() {
                *x /= n as f64;
            }
        }
        Ok(g)
    }

    /// Matrix histogram `nu_{ag}(bin) = n^{-1} sum_j chi_bin(H)_{aj, gj}`.
    pub fn empirical_measure(&self, edges: &[f64]) -> Result<MatrixHistogram> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("bin edges must be strictly increasing".into()));
        }
        let n = self.n;
        let bins = edges.len() - 1;
        let mut plus_plus = vec![0.0; bins];
        let mut minus_minus = vec![0.0; bins];
        let mut off = vec![C64::new(0.0, 0.0); bins];
        let (lo, hi) = (edges[0], edges[bins]);
        for (m, &l) in self.values.iter().enumerate() {
            if l < lo || l > hi {
                return Err(Error::SpectrumOutOfRange(l));
            }
            let b = (edges.partition_point(|&e| e <= l)).clamp(1, bins) - 1;
            let col = self.column(m);
            let pp: f64 = col[..n].iter().map(|x| x.norm_sqr()).sum();
            let mm: f64 = col[n..].iter().map(|x| x.norm_sqr()).sum();
            let pm: C64 = (0..n).map(|j| col[j] * col[n + j].conj()).sum();
            plus_plus[b] += pp / n as f64;
            minus_minus[b] += mm / n as f64;
            off[b] += pm / n as f64;
        }
        Ok(MatrixHistogram {
            edges: edges.to_vec(),
            plus_plus,
            minus_minus,
            plus_minus: off,
        })
    }
}

/// Binned 2x2 matrix measure.
#[derive(Clone, Debug)]
pub struct MatrixHistogram {
    pub edges: Vec<f64>,
    pub plus_plus: Vec<f64>,
    pub minus_minus: Vec<f64>,
    /// `nu_{+-}`; `nu_{-+}` is its conjugate.
    pub plus_minus: Vec<C64>,
}

/// Sample means and unbiased variances `E|x - mean|^2` of complex observables.
#[derive(Clone, Debug)]
pub struct Moments {
    pub mean: Vec<C64>,
    pub variance: Vec<f64>,
    pub samples: usize,
}

/// Evaluate `f` on `m` independent realizations and reduce in sample order.
pub fn ensemble<F>(fm: &FiniteModel, m: usize, f: F) -> Result<Moments>
where
    F: Fn(&Spectrum) -> Result<Vec<C64>> + Sync,
{
    if m < 2 {
        return Err(Error::InvalidParameter("ensemble needs at least two samples".into()));
    }
    let per_sample: Vec<Vec<C64>> = (0..m as u64)
        .into_par_iter()
        .map(|i| f(&fm.spectrum(i)?))
        .collect::<Result<_>>()?;
    let len = per_sample[0].len();
    let mut mean = vec![C64::new(0.0, 0.0); len];
    for s in &per_sample {
        for (acc, x) in mean.iter_mut().zip(s) {
            *acc += x;
        }
    }
    for x in mean.iter_mut() {
        *x /= m as f64;
    }
    let mut variance = vec![0.0; len];
    for s in &per_sample {
        for ((acc, x), mu) in variance.iter_mut().zip(s).zip(&mean) {
            *acc += (x - mu).norm_sqr();
        }
    }
    for x in variance.iter_mut() {
        *x /= (m - 1) as f64;
    }
    Ok(Moments {
        mean,
        variance,
        samples: m,
    })
}

/// Ensemble mean and variance of the reduced density matrix.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean: Vec<TwoLevelState>,
    /// Per-entry variances in the order `++, +-, -+, --`.
    pub variance: Vec<[f64; 4]>,
    pub samples: usize,
}

impl EnsembleStats {
    pub fn max_variance(&self, i: usize) -> f64 {
        self.variance[i].iter().cloned().fold(0.0, f64::max)
    }
}

/// Variance bound `8 v^2 t^2 / n`.
pub fn variance_bound(v: f64, t: f64, n: usize) -> f64 {
    8.0 * v * v * t * t / n as f64
}

pub fn ensemble_run(fm: &FiniteModel, rho0: &TwoLevelState, times: &[f64], m: usize) -> Result<EnsembleStats> {
    ensemble_run_with(fm, rho0, times, m, None)
}

/// As [`ensemble_run`]; with `weights` the initial reservoir state is the
/// mixture `sum_k p_k P_k` instead of `P_k` for the model's `k`.
pub fn ensemble_run_with(
    fm: &FiniteModel,
    rho0: &TwoLevelState,
    times: &[f64],
    m: usize,
    weights: Option<&[f64]>,
) -> Result<EnsembleStats> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("time grid is empty".into()));
    }
    let mom = ensemble(fm, m, |sp| {
        let mut out = Vec::with_capacity(4 * times.len());
        for &t in times {
            let r = match weights {
                Some(w) => sp.reduced_mixture(rho0, w, t)?,
                None => sp.reduced(rho0, fm.k, t)?,
            };
            out.extend_from_slice(&r.flat());
        }
        Ok(out)
    })?;
    let mut mean = Vec::with_capacity(times.len());
    let mut variance = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let e = &mom.mean[4 * i..4 * i + 4];
        mean.push(TwoLevelState::from_entries([[e[0], e[1]], [e[2], e[3]]]));
        let v = &mom.variance[4 * i..4 * i + 4];
        variance.push([v[0], v[1], v[2], v[3]]);
    }
    Ok(EnsembleStats {
        times: times.to_vec(),
        mean,
        variance,
        samples: m,
    })
}

/// Boltzmann weights `e^{-beta E_k} / sum_j e^{-beta E_j}`, max-shifted.
pub fn canonical_initial_weights(fm: &FiniteModel, beta: f64) -> Result<Vec<f64>> {
    if !beta.is_finite() {
        return Err(Error::InvalidParameter("beta must be finite".into()));
    }
    let shift = fm
        .eigenvalues
        .iter()
        .map(|e| -beta * e)
        .fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = fm.eigenvalues.iter().map(|e| (-beta * e - shift).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::TailOverflow);
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}
