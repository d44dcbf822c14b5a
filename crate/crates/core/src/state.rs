// SPDX-License-Identifier: Apache-2.0

use crate::{Error, Level, Result, C64};

/// Tolerance on Hermiticity and unit trace for validated states.
pub const STATE_TOL: f64 = 1e-12;
/// Most negative eigenvalue accepted as positive semidefinite.
pub const PSD_TOL: f64 = 1e-10;

/// 2x2 complex matrix indexed by [`Level`], `Plus` first.
///
/// Used both for genuine density matrices (constructed through
/// [`TwoLevelState::new`], which validates) and for quadrature outputs whose
/// trace and Hermiticity hold only to quadrature accuracy (constructed
/// through [`TwoLevelState::from_entries`]).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevelState {
    m: [[C64; 2]; 2],
}

impl TwoLevelState {
    /// Validated density matrix: Hermitian and unit trace to `1e-12`,
    /// eigenvalues `>= -1e-10`.
    pub fn new(m: [[C64; 2]; 2]) -> Result<Self> {
        let s = TwoLevelState { m };
        s.validate(STATE_TOL, PSD_TOL)?;
        Ok(s)
    }

    pub fn from_entries(m: [[C64; 2]; 2]) -> Self {
        TwoLevelState { m }
    }

    /// `diag(p_plus, p_minus)`, validated.
    pub fn diagonal(p_plus: f64, p_minus: f64) -> Result<Self> {
        let z = C64::new(0.0, 0.0);
        Self::new([[C64::new(p_plus, 0.0), z], [z, C64::new(p_minus, 0.0)]])
    }

    pub fn zero() -> Self {
        TwoLevelState {
            m: [[C64::new(0.0, 0.0); 2]; 2],
        }
    }

    #[inline]
    pub fn get(&self, a: Level, d: Level) -> C64 {
        self.m[a.index()][d.index()]
    }

    #[inline]
    pub fn set(&mut self, a: Level, d: Level, value: C64) {
        self.m[a.index()][d.index()] = value;
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.m
    }

    /// Entries in the order `++, +-, -+, --`.
    pub fn flat(&self) -> [C64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    /// `|tr - 1|`.
    pub fn trace_error(&self) -> f64 {
        (self.trace() - 1.0).norm()
    }

    /// Largest deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let off = (self.m[0][1] - self.m[1][0].conj()).norm();
        let d = self.m[0][0].im.abs().max(self.m[1][1].im.abs());
        off.max(d)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let b = 0.5 * (self.m[0][1] + self.m[1][0].conj());
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - r, mean + r]
    }

    pub fn validate(&self, tol: f64, psd_tol: f64) -> Result<()> {
        if self.m.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entry".into()));
        }
        let h = self.hermiticity_error();
        if h > tol {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {h:.3e})")));
        }
        let t = self.trace_error();
        if t > tol {
            return Err(Error::InvalidState(format!("trace differs from 1 by {t:.3e}")));
        }
        let ev = self.eigenvalues();
        if ev[0] < -psd_tol {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (eigenvalues {:.6}, {:.6})",
                ev[0], ev[1]
            )));
        }
        Ok(())
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &TwoLevelState) -> f64 {
        self.flat()
            .iter()
            .zip(other.flat().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        for z in out.m.iter_mut().flatten() {
            *z *= c;
        }
        out
    }

    pub fn add(&self, other: &TwoLevelState) -> Self {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.m[i][j] += other.m[i][j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn accepts_pure_and_mixed_states() {
        assert!(TwoLevelState::diagonal(1.0, 0.0).is_ok());
        assert!(TwoLevelState::new([[c(0.5, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.5, 0.0)]]).is_ok());
        assert!(TwoLevelState::new([[c(0.7, 0.0), c(0.3, -0.2)], [c(0.3, 0.2), c(0.3, 0.0)]]).is_ok());
    }

    #[test]
    fn rejects_indefinite_matrix() {
        // eigenvalues 0.5 +- sqrt(0.01 + 0.25)
        let r = TwoLevelState::new([[c(0.6, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.4, 0.0)]]);
        let ev = TwoLevelState::from_entries([[c(0.6, 0.0), c(0.5, 0.0)], [c(0.5, 0.0), c(0.4, 0.0)]]).eigenvalues();
        assert!((ev[0] - (0.5 - 0.26f64.sqrt())).abs() < 1e-15);
        assert!(matches!(r, Err(Error::InvalidState(_))));
    }

    #[test]
    fn rejects_bad_trace_and_non_hermitian() {
        assert!(TwoLevelState::diagonal(0.6, 0.6).is_err());
        assert!(TwoLevelState::new([[c(0.5, 0.0), c(0.1, 0.1)], [c(0.1, 0.1), c(0.5, 0.0)]]).is_err());
    }
}
