// SPDX-License-Identifier: Apache-2.0

//! Weak-coupling (van Hove) limit `v -> 0`, `t -> infinity`, `tau = t v^2`.
//!
//! The diagonal entries are evaluated in the regrouped form
//!
//! ```text
//! rho_aa(tau) = rho_aa(0) [1 - p_a (1 - e^{-tau G_a})]
//!             + rho_{-a,-a}(0) p_{-a} (1 - e^{-tau G_{-a}}),
//! p_a = nu'(E + 2as) / (nu'(E) + nu'(E + 2as)),
//! ```
//!
//! which is algebraically the four-term expression with
//! `G_a = 2 pi [nu'(E) + nu'(E + 2as)]`, has no `0/0` when a rate vanishes
//! (then `p_a = 0`), and makes the unit trace exact.

use crate::measures::{Side, SpectralMeasure};
use crate::state::TwoLevelState;
use crate::{Error, Level, Result, C64};
use std::f64::consts::PI;

/// Reservoir energy, level half-spacing and a reservoir measure with density.
#[derive(Clone, Debug)]
pub struct VanHoveParams {
    pub e: f64,
    pub s: f64,
    pub measure: SpectralMeasure,
}

impl VanHoveParams {
    pub fn new(e: f64, s: f64, measure: SpectralMeasure) -> Result<Self> {
        if measure.is_atomic() {
            return Err(Error::AtomicMeasure);
        }
        if !(e.is_finite() && s.is_finite() && s >= 0.0) {
            return Err(Error::InvalidParameter("van Hove needs finite E and s >= 0".into()));
        }
        Ok(VanHoveParams { e, s, measure })
    }

    fn density(&self, x: f64) -> f64 {
        self.measure.density(x).expect("checked non-atomic")
    }

    /// `G_a = 2 pi [nu'(E) + nu'(E + 2as)]`.
    pub fn gamma(&self, a: Level) -> f64 {
        2.0 * PI * (self.density(self.e) + self.density(self.e + 2.0 * a.sign() * self.s))
    }

    /// Both rates; `true` entries of the flag mark vanishing rates.
    pub fn rates(&self) -> ([f64; 2], [bool; 2]) {
        let g = [self.gamma(Level::Plus), self.gamma(Level::Minus)];
        (g, [g[0] == 0.0, g[1] == 0.0])
    }

    /// Branching fraction `p_a`, zero when the rate vanishes.
    fn branch(&self, a: Level) -> f64 {
        let up = self.density(self.e + 2.0 * a.sign() * self.s);
        let total = self.density(self.e) + up;
        if total == 0.0 {
            0.0
        } else {
            up / total
        }
    }

    /// Diagonal entries `(rho_++, rho_--)` at rescaled time `tau`.
    pub fn rho_diag(&self, tau: f64, rho0: &TwoLevelState) -> Result<[f64; 2]> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidParameter(format!("tau must be >= 0, got {tau}")));
        }
        let d0 = [
            rho0.get(Level::Plus, Level::Plus).re,
            rho0.get(Level::Minus, Level::Minus).re,
        ];
        // population leaving level a by time tau
        let moved = |a: Level| -> f64 {
            let g = self.gamma(a);
            let p = self.branch(a);
            d0[a.index()] * p * -(-tau * g).exp_m1()
        };
        let out_p = moved(Level::Plus);
        let out_m = moved(Level::Minus);
        let pp = d0[0] - out_p + out_m;
        Ok([pp, 1.0 - pp])
    }

    /// `tau -> infinity` values of the diagonal entries.
    pub fn stationary(&self, rho0: &TwoLevelState) -> Result<[f64; 2]> {
        let (_, zero) = self.rates();
        if zero[0] && zero[1] {
            return Err(Error::ZeroRate);
        }
        let d0 = [
            rho0.get(Level::Plus, Level::Plus).re,
            rho0.get(Level::Minus, Level::Minus).re,
        ];
        let pp = d0[0] * (1.0 - self.branch(Level::Plus)) + d0[1] * self.branch(Level::Minus);
        Ok([pp, 1.0 - pp])
    }

    /// `rho_{a,-a}` at display time `t` and rescaled time `tau`.
    pub fn rho_offdiag(&self, a: Level, t: f64, tau: f64, rho0: &TwoLevelState) -> Result<OffDiagonal> {
        let sa = a.sign();
        let above = self.measure.boundary_value(self.e + 2.0 * sa * self.s, Side::Above)?;
        let below = self.measure.boundary_value(self.e - 2.0 * sa * self.s, Side::Below)?;
        let exponent = C64::i() * tau * (above.value() - below.value());
        let r0 = rho0.get(a, a.flip());
        let modulus = r0.norm() * exponent.re.exp();
        let slow_phase = exponent.im;
        let fast_phase = -2.0 * sa * self.s * t;
        Ok(OffDiagonal {
            value: r0 * C64::new(0.0, fast_phase).exp() * exponent.exp(),
            modulus,
            slow_phase,
            fast_phase,
        })
    }

    /// Full 2x2 van Hove state.
    pub fn state(&self, t: f64, tau: f64, rho0: &TwoLevelState) -> Result<TwoLevelState> {
        let d = self.rho_diag(tau, rho0)?;
        let pm = self.rho_offdiag(Level::Plus, t, tau, rho0)?.value;
        let mp = self.rho_offdiag(Level::Minus, t, tau, rho0)?.value;
        Ok(TwoLevelState::from_entries([
            [C64::new(d[0], 0.0), pm],
            [mp, C64::new(d[1], 0.0)],
        ]))
    }

    /// Trajectory over a `tau` grid; display time `t = tau * t_per_tau`.
    pub fn run(&self, taus: &[f64], t_per_tau: f64, rho0: &TwoLevelState) -> Result<VanHoveResult> {
        let (gamma, zero_rate) = self.rates();
        let stationary = self.stationary(rho0).ok();
        let mut diag = Vec::with_capacity(taus.len());
        let mut offdiag = Vec::with_capacity(taus.len());
        for &tau in taus {
            diag.push(self.rho_diag(tau, rho0)?);
            offdiag.push(self.rho_offdiag(Level::Plus, tau * t_per_tau, tau, rho0)?);
        }
        Ok(VanHoveResult {
            gamma,
            zero_rate,
            stationary,
            taus: taus.to_vec(),
            diag,
            offdiag,
        })
    }
}

/// Off-diagonal entry split into modulus, slow phase (in `tau`) and fast
/// phase `-2 a s t` (in display time).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OffDiagonal {
    pub value: C64,
    pub modulus: f64,
    pub slow_phase: f64,
    pub fast_phase: f64,
}

#[derive(Clone, Debug)]
pub struct VanHoveResult {
    pub gamma: [f64; 2],
    pub zero_rate: [bool; 2],
    /// `None` when both rates vanish.
    pub stationary: Option<[f64; 2]>,
    pub taus: Vec<f64>,
    pub diag: Vec<[f64; 2]>,
    /// `rho_{+-}` at each `tau`.
    pub offdiag: Vec<OffDiagonal>,
}

/// `(2 dt)^{-1} int_{t - dt}^{t + dt} rho(t') dt'` by the trapezoid rule on
/// the trajectory samples, interpolating linearly at the window ends.
pub fn time_window_average(times: &[f64], states: &[TwoLevelState], center: f64, half: f64) -> Result<TwoLevelState> {
    if !(half > 0.0) || times.len() != states.len() || times.len() < 2 {
        return Err(Error::InvalidParameter(
            "window average needs a positive half-width and at least two samples".into(),
        ));
    }
    let (lo, hi) = (center - half, center + half);
    if lo < times[0] || hi > *times.last().unwrap() {
        return Err(Error::WindowOutOfRange { lo, hi });
    }
    let at = |x: f64| -> TwoLevelState {
        let i = times.partition_point(|&e| e <= x).clamp(1, times.len() - 1);
        let w = (x - times[i - 1]) / (times[i] - times[i - 1]);
        states[i - 1].scale(1.0 - w).add(&states[i].scale(w))
    };
    let mut xs = vec![lo];
    let mut ys = vec![at(lo)];
    for (&t, s) in times.iter().zip(states) {
        if t > lo && t < hi {
            xs.push(t);
            ys.push(*s);
        }
    }
    xs.push(hi);
    ys.push(at(hi));
    let mut acc = TwoLevelState::zero();
    for i in 1..xs.len() {
        let h = 0.5 * (xs[i] - xs[i - 1]);
        acc = acc.add(&ys[i].add(&ys[i - 1]).scale(h));
    }
    Ok(acc.scale(0.5 / half))
}
