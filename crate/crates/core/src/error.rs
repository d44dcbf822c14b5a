// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("measure has zero total mass")]
    NonNormalizable,
    #[error("tabulated energy grid is not strictly increasing at index {0}")]
    NonMonotoneGrid(usize),
    #[error("negative density value {value} at index {index}")]
    NegativeDensity { index: usize, value: f64 },
    #[error("evaluation on the real axis (Im z = 0) at z = {0}")]
    RealAxisEvaluation(f64),
    #[error("operation requires a density but the measure is atomic")]
    AtomicMeasure,
    #[error("Fourier transform not absolutely integrable: tail estimate {tail:.3e} (decay exponent {exponent:.2})")]
    DivergentTail { tail: f64, exponent: f64 },
    #[error("fixed-point iteration did not converge at z = {re} + {im}i (last residual {residual:.3e})")]
    NoConvergence { re: f64, im: f64, residual: f64 },
    #[error("recovered mass {mass} differs from 1 by more than {tol}")]
    MassDeficit { mass: f64, tol: f64 },
    #[error("both equilibrium window masses vanish")]
    EmptyWindow,
    #[error("window [{lo}, {hi}] not covered by the available data")]
    WindowOutOfRange { lo: f64, hi: f64 },
    #[error("exponential weights overflow or vanish")]
    TailOverflow,
    #[error("quadrature needs {needed} nodes per line, budget is {budget}")]
    QuadratureBudgetExceeded { needed: usize, budget: usize },
    #[error("two-point denominator |1 - v^4 f f| = {0:.3e} too close to zero on the contour")]
    DenominatorNearZero(f64),
    #[error("Hermitian eigendecomposition failed: {0}")]
    EigendecompositionFailure(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("both relaxation rates vanish")]
    ZeroRate,
    #[error("spectrum value {0} outside the histogram range")]
    SpectrumOutOfRange(f64),
}
