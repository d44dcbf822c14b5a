// SPDX-License-Identifier: Apache-2.0

//! Random-matrix model of a two-level system relaxing in contact with an
//! `n`-level reservoir through a GUE coupling.
//!
//! The crate evaluates the `n -> infinity` objects of the model (the coupled
//! Stieltjes-transform equations, the limiting spectral measures, the limiting
//! reduced density matrix and its weak-coupling limit) and provides a
//! brute-force finite-`n` ensemble that serves as an independent oracle for
//! all of them.
//!
//! Module map:
//!
//! * [`measures`]: the reservoir spectral measure and its transforms.
//! * [`selfconsistent`]: the coupled equations for `f_+` and `f_-`, density
//!   inversion and equilibrium states.
//! * [`dynamics`]: propagator limits, two-point functions and the limiting
//!   reduced density matrix by double contour quadrature.
//! * [`finite`]: GUE sampling, exact evolution and ensemble statistics.
//! * [`vanhove`]: closed-form weak-coupling limit.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod finite;
pub mod measures;
pub mod quad;
pub mod selfconsistent;
pub mod state;
pub mod vanhove;

pub use error::{Error, Result};
pub use measures::{MeasureSpec, SpectralMeasure};
pub use selfconsistent::{ModelParams, StieltjesPair};
pub use state::TwoLevelState;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Index of a level of the two-level system, `+` (upper) or `-` (lower).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Level {
    Plus,
    Minus,
}

impl Level {
    pub const BOTH: [Level; 2] = [Level::Plus, Level::Minus];

    /// `+1.0` for `Plus`, `-1.0` for `Minus`.
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Level::Plus => 1.0,
            Level::Minus => -1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Level {
        match self {
            Level::Plus => Level::Minus,
            Level::Minus => Level::Plus,
        }
    }

    /// Row/column position in 2x2 matrices (`Plus` first).
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Level::Plus => 0,
            Level::Minus => 1,
        }
    }
}
