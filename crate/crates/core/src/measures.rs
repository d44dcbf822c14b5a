// SPDX-License-Identifier: Apache-2.0

//! Reservoir spectral measures `nu_0` and their transforms.
//!
//! A [`SpectralMeasure`] is built from a serializable [`MeasureSpec`] and is
//! always a probability measure. Closed forms are used for the Stieltjes
//! transform of atoms, uniform, semicircle and piecewise-linear tabulated
//! densities; the truncated Gaussian goes through adaptive quadrature with
//! singularity subtraction.

use crate::quad::{self, adaptive};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

const REL_TOL: f64 = 1e-12;
const ABS_TOL: f64 = 1e-15;
const MAX_SEGMENTS: usize = 20_000;

fn default_truncation() -> f64 {
    8.0
}

/// Serializable description of a reservoir measure, tagged by `type`.
///
/// ```text
/// {"type": "semicircle", "radius": 2.0}
/// {"type": "uniform", "a": -1.0, "b": 1.0}
/// {"type": "gaussian", "sigma": 1.0, "truncation": 8.0}
/// {"type": "atoms", "locations": [0.0, 1.0], "weights": [0.4, 0.6]}
/// {"type": "tabulated", "energies": [-1, 0, 1], "density": [1, 1, 1]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Atoms {
        locations: Vec<f64>,
        weights: Vec<f64>,
    },
    Semicircle {
        radius: f64,
        #[serde(default)]
        center: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    Gaussian {
        sigma: f64,
        #[serde(default)]
        center: f64,
        /// Half-width of the support in units of `sigma`.
        #[serde(default = "default_truncation")]
        truncation: f64,
    },
    Tabulated {
        energies: Vec<f64>,
        density: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
enum Kind {
    Atoms {
        loc: Vec<f64>,
        w: Vec<f64>,
    },
    Semicircle {
        c: f64,
        r: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    Gaussian {
        c: f64,
        sigma: f64,
        half_width: f64,
        /// Normalization of the truncated density.
        norm: f64,
    },
    Tabulated {
        x: Vec<f64>,
        y: Vec<f64>,
        /// Cumulative mass at each node.
        cdf: Vec<f64>,
    },
}

/// Probability measure on the real line describing the reservoir spectrum.
#[derive(Clone, Debug)]
pub struct SpectralMeasure {
    spec: MeasureSpec,
    kind: Kind,
}

/// Which side of the real axis a boundary value is taken from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Below,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Above => 1.0,
            Side::Below => -1.0,
        }
    }
}

/// `f_0(lambda +- i0)`: principal value plus `+- i pi nu_0'(lambda)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryValue {
    pub re: f64,
    pub im: f64,
    pub side: Side,
}

impl BoundaryValue {
    pub fn value(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// Estimate of `c_0 = int |nu_0^(u)| du`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C0Estimate {
    /// Integral over `|u| <= cap`.
    pub value: f64,
    /// Extrapolated contribution of `|u| > cap`.
    pub tail: f64,
    /// Fitted power-law decay exponent of `|nu_0^(u)|` (infinite for
    /// faster-than-polynomial decay).
    pub decay_exponent: f64,
}

impl C0Estimate {
    pub fn total(&self) -> f64 {
        self.value + self.tail
    }
}

impl SpectralMeasure {
    pub fn new(spec: MeasureSpec) -> Result<Self> {
        let kind = match &spec {
            MeasureSpec::Atoms { locations, weights } => {
                if locations.len() != weights.len() || locations.is_empty() {
                    return Err(Error::InvalidParameter(
                        "atoms need equally many (non-zero) locations and weights".into(),
                    ));
                }
                for (i, (&x, &w)) in locations.iter().zip(weights).enumerate() {
                    if !x.is_finite() || !w.is_finite() {
                        return Err(Error::InvalidParameter(format!("atom {i} is not finite")));
                    }
                    if w < 0.0 {
                        return Err(Error::NegativeDensity { index: i, value: w });
                    }
                }
                let total: f64 = weights.iter().sum();
                if total <= 0.0 {
                    return Err(Error::NonNormalizable);
                }
                let mut pairs: Vec<(f64, f64)> = locations
                    .iter()
                    .zip(weights)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&x, &w)| (x, w / total))
                    .collect();
                pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
                Kind::Atoms {
                    loc: pairs.iter().map(|p| p.0).collect(),
                    w: pairs.iter().map(|p| p.1).collect(),
                }
            }
            MeasureSpec::Semicircle { radius, center } => {
                if !(radius.is_finite() && *radius > 0.0) || !center.is_finite() {
                    return Err(Error::InvalidParameter("semicircle radius must be > 0".into()));
                }
                Kind::Semicircle { c: *center, r: *radius }
            }
            MeasureSpec::Uniform { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return Err(Error::InvalidParameter("uniform measure needs a < b".into()));
                }
                Kind::Uniform { a: *a, b: *b }
            }
            MeasureSpec::Gaussian {
                sigma,
                center,
                truncation,
            } => {
                if !(sigma.is_finite() && *sigma > 0.0) || !center.is_finite() {
                    return Err(Error::InvalidParameter("gaussian sigma must be > 0".into()));
                }
                if !(truncation.is_finite() && *truncation > 0.0) {
                    return Err(Error::InvalidParameter("gaussian truncation must be > 0".into()));
                }
                let norm = erf(truncation * FRAC_1_SQRT_2);
                Kind::Gaussian {
                    c: *center,
                    sigma: *sigma,
                    half_width: truncation * sigma,
                    norm,
                }
            }
            MeasureSpec::Tabulated { energies, density } => {
                if energies.len() != density.len() || energies.len() < 2 {
                    return Err(Error::InvalidParameter(
                        "tabulated measure needs at least two nodes and matching lengths".into(),
                    ));
                }
                for i in 1..energies.len() {
                    if !(energies[i] > energies[i - 1]) {
                        return Err(Error::NonMonotoneGrid(i));
                    }
                }
                for (i, &y) in density.iter().enumerate() {
                    if !y.is_finite() || y < 0.0 {
                        return Err(Error::NegativeDensity { index: i, value: y });
                    }
                }
                let mass = quad::trapezoid(energies, density);
                if !(mass > 0.0) {
                    return Err(Error::NonNormalizable);
                }
                let y: Vec<f64> = density.iter().map(|v| v / mass).collect();
                let mut cdf = vec![0.0; y.len()];
                for i in 1..y.len() {
                    cdf[i] = cdf[i - 1] + 0.5 * (energies[i] - energies[i - 1]) * (y[i] + y[i - 1]);
                }
                Kind::Tabulated {
                    x: energies.clone(),
                    y,
                    cdf,
                }
            }
        };
        Ok(SpectralMeasure { spec, kind })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, Kind::Atoms { .. })
    }

    /// Smallest closed interval containing the support.
    pub fn support(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Atoms { loc, .. } => (loc[0], *loc.last().unwrap()),
            Kind::Semicircle { c, r } => (c - r, c + r),
            Kind::Uniform { a, b } => (*a, *b),
            Kind::Gaussian { c, half_width, .. } => (c - half_width, c + half_width),
            Kind::Tabulated { x, .. } => (x[0], *x.last().unwrap()),
        }
    }

    /// `max |E|` over the support.
    pub fn support_radius(&self) -> f64 {
        let (a, b) = self.support();
        a.abs().max(b.abs())
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            Kind::Atoms { loc, w } => loc.iter().zip(w).map(|(x, p)| x * p).sum(),
            Kind::Semicircle { c, .. } | Kind::Gaussian { c, .. } => *c,
            Kind::Uniform { a, b } => 0.5 * (a + b),
            Kind::Tabulated { .. } => self.expect(|e| C64::new(e, 0.0)).re,
        }
    }

    /// Density `nu_0'(x)`, `None` for atomic measures.
    pub fn density(&self, x: f64) -> Option<f64> {
        let d = match &self.kind {
            Kind::Atoms { .. } => return None,
            Kind::Semicircle { c, r } => {
                let u = x - c;
                if u.abs() >= *r {
                    0.0
                } else {
                    2.0 / (PI * r * r) * (r * r - u * u).sqrt()
                }
            }
            Kind::Uniform { a, b } => {
                if x >= *a && x <= *b {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Kind::Gaussian {
                c,
                sigma,
                half_width,
                norm,
            } => {
                let u = x - c;
                if u.abs() > *half_width {
                    0.0
                } else {
                    (-0.5 * (u / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt() * norm)
                }
            }
            Kind::Tabulated { x: xs, y, .. } => interp(xs, y, x),
        };
        Some(d)
    }

    /// `sup nu_0'`, `None` for atomic measures.
    pub fn sup_density(&self) -> Option<f64> {
        match &self.kind {
            Kind::Atoms { .. } => None,
            Kind::Semicircle { r, .. } => Some(2.0 / (PI * r)),
            Kind::Uniform { a, b } => Some(1.0 / (b - a)),
            Kind::Gaussian { sigma, norm, .. } => Some(1.0 / (sigma * (2.0 * PI).sqrt() * norm)),
            Kind::Tabulated { y, .. } => Some(y.iter().cloned().fold(0.0, f64::max)),
        }
    }

    fn density_derivative(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Gaussian { c, sigma, .. } => -(x - c) / (sigma * sigma) * self.density(x).unwrap(),
            _ => unreachable!("only used for the gaussian quadrature path"),
        }
    }

    /// Integral of `g` against the measure.
    pub fn expect<F: FnMut(f64) -> C64>(&self, g: F) -> C64 {
        self.expect_with(g, &[], REL_TOL, ABS_TOL)
    }

    /// Integral of `g` against the measure, with extra break points handed
    /// to the adaptive rule (useful near known peaks of `g`).
    pub fn expect_with<F: FnMut(f64) -> C64>(&self, mut g: F, extra_breaks: &[f64], rel_tol: f64, abs_tol: f64) -> C64 {
        match &self.kind {
            Kind::Atoms { loc, w } => loc.iter().zip(w).map(|(&x, &p)| g(x) * p).sum(),
            Kind::Semicircle { c, r } => {
                // E = c + r sin(theta) removes the square-root endpoints
                let mut breaks = vec![-FRAC_PI_2, FRAC_PI_2];
                for &e in extra_breaks {
                    let u = (e - c) / r;
                    if u.abs() < 1.0 {
                        breaks.push(u.asin());
                    }
                }
                sort_dedup(&mut breaks);
                adaptive(
                    |th| {
                        let ct = th.cos();
                        g(c + r * th.sin()) * (2.0 / PI * ct * ct)
                    },
                    &breaks,
                    rel_tol,
                    abs_tol,
                    MAX_SEGMENTS,
                )
                .value
            }
            Kind::Uniform { a, b } => {
                let breaks = with_breaks(&[*a, *b], extra_breaks);
                let h = 1.0 / (b - a);
                adaptive(|e| g(e) * h, &breaks, rel_tol, abs_tol, MAX_SEGMENTS).value
            }
            Kind::Gaussian { c, half_width, .. } => {
                let breaks = with_breaks(&[c - half_width, *c, c + half_width], extra_breaks);
                adaptive(
                    |e| g(e) * self.density(e).unwrap(),
                    &breaks,
                    rel_tol,
                    abs_tol,
                    MAX_SEGMENTS,
                )
                .value
            }
            Kind::Tabulated { x, y, .. } => {
                let breaks = with_breaks(x, extra_breaks);
                adaptive(|e| g(e) * interp(x, y, e), &breaks, rel_tol, abs_tol, MAX_SEGMENTS).value
            }
        }
    }

    /// Stieltjes transform `f_0(z) = int nu_0(dE) / (E - z)`.
    pub fn stieltjes(&self, z: C64) -> Result<C64> {
        if z.im == 0.0 {
            return Err(Error::RealAxisEvaluation(z.re));
        }
        Ok(self.stieltjes_unchecked(z))
    }

    /// Stieltjes transform without the off-axis check. Valid wherever the
    /// transform is analytic, including real points outside the support.
    pub fn stieltjes_unchecked(&self, z: C64) -> C64 {
        match &self.kind {
            Kind::Atoms { loc, w } => loc.iter().zip(w).map(|(&x, &p)| p / (x - z)).sum(),
            Kind::Uniform { a, b } => ((*b - z).ln() - (*a - z).ln()) / (b - a),
            Kind::Semicircle { c, r } => {
                let u = z - c;
                let root = (u - r).sqrt() * (u + r).sqrt();
                (root - u) * (2.0 / (r * r))
            }
            Kind::Tabulated { x, y, .. } => {
                let mut acc = C64::new(0.0, 0.0);
                for i in 1..x.len() {
                    let h = x[i] - x[i - 1];
                    let m = (y[i] - y[i - 1]) / h;
                    let lin = y[i - 1] + m * (z - x[i - 1]);
                    acc += m * h + lin * ((x[i] - z).ln() - (x[i - 1] - z).ln());
                }
                acc
            }
            Kind::Gaussian { c, half_width, .. } => {
                let (a, b) = (c - half_width, c + half_width);
                stieltjes_subtracted(|e| self.density(e).unwrap(), a, b, z, &[*c])
            }
        }
    }

    /// `f_0'(z) = int nu_0(dE) / (E - z)^2`.
    pub fn stieltjes_derivative(&self, z: C64) -> C64 {
        match &self.kind {
            Kind::Atoms { loc, w } => loc.iter().zip(w).map(|(&x, &p)| p / ((x - z) * (x - z))).sum(),
            Kind::Uniform { a, b } => (1.0 / (*a - z) - 1.0 / (*b - z)) / (b - a),
            Kind::Semicircle { c, r } => {
                let u = z - c;
                let root = (u - r).sqrt() * (u + r).sqrt();
                (u / root - 1.0) * (2.0 / (r * r))
            }
            Kind::Tabulated { x, y, .. } => {
                let mut acc = C64::new(0.0, 0.0);
                for i in 1..x.len() {
                    let h = x[i] - x[i - 1];
                    let m = (y[i] - y[i - 1]) / h;
                    let lin = y[i - 1] + m * (z - x[i - 1]);
                    acc +=
                        m * ((x[i] - z).ln() - (x[i - 1] - z).ln()) + lin * (1.0 / (x[i - 1] - z) - 1.0 / (x[i] - z));
                }
                acc
            }
            Kind::Gaussian { c, half_width, .. } => {
                // integrate by parts: boundary terms plus the transform of nu_0''
                let (a, b) = (c - half_width, c + half_width);
                let da = self.density(a).unwrap();
                let db = self.density(b).unwrap();
                let bulk = stieltjes_subtracted(|e| self.density_derivative(e), a, b, z, &[*c]);
                da / (a - z) - db / (b - z) + bulk
            }
        }
    }

    /// Principal value `PV int nu_0'(E) / (E - lambda) dE`.
    pub fn principal_value(&self, lambda: f64) -> Result<f64> {
        match &self.kind {
            Kind::Atoms { .. } => Err(Error::AtomicMeasure),
            Kind::Uniform { a, b } => Ok(((b - lambda).abs() / (a - lambda).abs()).ln() / (b - a)),
            Kind::Semicircle { c, r } => {
                let u = lambda - c;
                let k = 2.0 / (r * r);
                if u.abs() <= *r {
                    Ok(-k * u)
                } else {
                    Ok(k * (-u + u.signum() * (u * u - r * r).sqrt()))
                }
            }
            _ => Ok(self.principal_value_subtracted(lambda)),
        }
    }

    /// Singularity-subtraction principal value, available for every density
    /// variant:
    /// `int (nu'(E) - nu'(l)) / (E - l) dE + nu'(l) ln|(b - l) / (l - a)|`.
    pub fn principal_value_subtracted(&self, lambda: f64) -> f64 {
        let (a, b) = self.support();
        let d0 = self.density(lambda).unwrap_or(0.0);
        let inside = lambda > a && lambda < b;
        let mut breaks = vec![a, b];
        if inside {
            breaks.push(lambda);
        }
        if let Kind::Tabulated { x, .. } = &self.kind {
            breaks.extend_from_slice(x);
        }
        if let Kind::Gaussian { c, .. } | Kind::Semicircle { c, .. } = &self.kind {
            breaks.push(*c);
        }
        sort_dedup(&mut breaks);
        let sub = if inside { d0 } else { 0.0 };
        let (bulk, _) = quad::adaptive_real(
            |e| {
                let de = e - lambda;
                if de == 0.0 {
                    0.0
                } else {
                    (self.density(e).unwrap() - sub) / de
                }
            },
            &breaks,
            REL_TOL,
            1e-14,
            MAX_SEGMENTS,
        );
        if inside {
            bulk + d0 * ((b - lambda) / (lambda - a)).ln()
        } else {
            bulk
        }
    }

    /// Boundary value `f_0(lambda +- i0)`.
    pub fn boundary_value(&self, lambda: f64, side: Side) -> Result<BoundaryValue> {
        let re = self.principal_value(lambda)?;
        let d = self.density(lambda).ok_or(Error::AtomicMeasure)?;
        Ok(BoundaryValue {
            re,
            im: side.sign() * PI * d,
            side,
        })
    }

    /// Fourier transform `int e^{-i u E} nu_0(dE)`.
    pub fn fourier(&self, u: f64) -> C64 {
        match &self.kind {
            Kind::Atoms { loc, w } => loc.iter().zip(w).map(|(&x, &p)| C64::new(0.0, -u * x).exp() * p).sum(),
            Kind::Uniform { a, b } => {
                let half = 0.5 * (b - a);
                let phase = C64::new(0.0, -u * 0.5 * (a + b)).exp();
                phase * sinc(u * half)
            }
            _ => {
                // panel the integrand by oscillation period
                let (a, b) = self.support();
                let periods = (u.abs() * (b - a) / (2.0 * PI)).ceil() as usize;
                let pieces = periods.clamp(1, 4000);
                let extra: Vec<f64> = (1..pieces).map(|i| a + (b - a) * i as f64 / pieces as f64).collect();
                self.expect_with(|e| C64::new(0.0, -u * e).exp(), &extra, 1e-12, 1e-14)
            }
        }
    }

    /// Numerical estimate of `c_0 = int |nu_0^(u)| du` over `|u| <= cap` with
    /// a power-law tail extrapolation.
    ///
    /// Returns `DivergentTail` when the fitted decay exponent is too close
    /// to one for the tail to be integrable, or when the tail estimate
    /// exceeds the in-range value.
    pub fn c0_bound(&self, cap: f64) -> Result<C0Estimate> {
        if self.is_atomic() {
            return Err(Error::AtomicMeasure);
        }
        if !(cap > 0.0) {
            return Err(Error::InvalidParameter("c0 cap must be positive".into()));
        }
        let (a, b) = self.support();
        let width = b - a;
        // |nu^(-u)| = |nu^(u)| for a real density
        let period = 2.0 * PI / width;
        let panels = ((cap / period).ceil() as usize * 2).clamp(8, 20_000);
        let breaks: Vec<f64> = (0..=panels).map(|i| cap * i as f64 / panels as f64).collect();
        let (half, _) = quad::adaptive_real(|u| self.fourier(u).norm(), &breaks, 1e-8, 1e-12, 200_000);
        let value = 2.0 * half;

        // envelope maxima on [cap/4, cap/2] and [cap/2, cap]
        let env = |lo: f64, hi: f64| -> f64 {
            let n = 400;
            (0..=n)
                .map(|i| self.fourier(lo + (hi - lo) * i as f64 / n as f64).norm())
                .fold(0.0, f64::max)
        };
        let m1 = env(0.25 * cap, 0.5 * cap);
        let m2 = env(0.5 * cap, cap);
        if m2 <= 1e-300 || m1 <= 1e-300 {
            return Ok(C0Estimate {
                value,
                tail: 0.0,
                decay_exponent: f64::INFINITY,
            });
        }
        let p = (m1 / m2).ln() / 2f64.ln();
        if p > 30.0 {
            return Ok(C0Estimate {
                value,
                tail: 0.0,
                decay_exponent: f64::INFINITY,
            });
        }
        // envelope C u^{-p} anchored at the left end of the last window
        let amp = m2 * (0.5 * cap).powf(p);
        let tail = if p > 1.0 {
            2.0 * amp * cap.powf(1.0 - p) / (p - 1.0)
        } else {
            f64::INFINITY
        };
        if p <= 1.2 || tail > value {
            return Err(Error::DivergentTail { tail, exponent: p });
        }
        Ok(C0Estimate {
            value,
            tail,
            decay_exponent: p,
        })
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Atoms { loc, w } => loc.iter().zip(w).filter(|(&e, _)| e <= x).map(|(_, p)| p).sum(),
            Kind::Uniform { a, b } => ((x - a) / (b - a)).clamp(0.0, 1.0),
            Kind::Semicircle { c, r } => {
                let u = ((x - c) / r).clamp(-1.0, 1.0);
                (0.5 + (u * (1.0 - u * u).sqrt() + u.asin()) / PI).clamp(0.0, 1.0)
            }
            Kind::Gaussian {
                c,
                sigma,
                half_width,
                norm,
            } => {
                let u = (x - c).clamp(-half_width, *half_width) / sigma;
                (0.5 * (erf(u * FRAC_1_SQRT_2) + norm) / norm).clamp(0.0, 1.0)
            }
            Kind::Tabulated { x: xs, y, cdf } => {
                if x <= xs[0] {
                    return 0.0;
                }
                if x >= *xs.last().unwrap() {
                    return 1.0;
                }
                let i = xs.partition_point(|&e| e <= x) - 1;
                let d = x - xs[i];
                let m = (y[i + 1] - y[i]) / (xs[i + 1] - xs[i]);
                cdf[i] + y[i] * d + 0.5 * m * d * d
            }
        }
    }

    /// Generalized inverse `inf { x : F(x) >= p }` for a density variant.
    fn quantile(&self, p: f64) -> f64 {
        let (lo, hi) = self.support();
        match &self.kind {
            Kind::Uniform { a, b } => a + p * (b - a),
            Kind::Tabulated { x, y, cdf } => {
                let i = (cdf.partition_point(|&c| c < p)).clamp(1, x.len() - 1) - 1;
                let rem = p - cdf[i];
                let h = x[i + 1] - x[i];
                let m = (y[i + 1] - y[i]) / h;
                // solve y_i d + m d^2 / 2 = rem on [0, h]
                let d = if m.abs() < 1e-300 {
                    if y[i] > 0.0 {
                        rem / y[i]
                    } else {
                        0.0
                    }
                } else {
                    let disc = (y[i] * y[i] + 2.0 * m * rem).max(0.0);
                    // numerically stable root of the quadratic
                    2.0 * rem / (y[i] + disc.sqrt())
                };
                x[i] + d.clamp(0.0, h)
            }
            _ => {
                // safeguarded Newton on F(x) - p
                let (mut a, mut b) = (lo, hi);
                let mut x = lo + p * (hi - lo);
                for _ in 0..200 {
                    let f = self.cdf(x) - p;
                    if f > 0.0 {
                        b = x;
                    } else {
                        a = x;
                    }
                    let d = self.density(x).unwrap_or(0.0);
                    let mut next = if d > 0.0 { x - f / d } else { f64::NAN };
                    if !(next > a && next < b) {
                        next = 0.5 * (a + b);
                    }
                    if (next - x).abs() <= 1e-15 * (1.0 + x.abs()) || b - a <= 1e-15 * (1.0 + x.abs()) {
                        x = next;
                        break;
                    }
                    x = next;
                }
                x
            }
        }
    }

    /// Deterministic `n`-point discretization: `E_j = F^{-1}((j - 1/2)/n)`,
    /// ascending. Atoms receive `round(w n)` copies each, with rounding drift
    /// fixed by largest remainders.
    pub fn quantile_eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one eigenvalue".into()));
        }
        match &self.kind {
            Kind::Atoms { loc, w } => {
                let exact: Vec<f64> = w.iter().map(|p| p * n as f64).collect();
                let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
                let assigned: usize = counts.iter().sum();
                let mut order: Vec<usize> = (0..w.len()).collect();
                // largest remainder first; ties go to the lower location
                order.sort_by(|&i, &j| {
                    let ri = exact[i] - exact[i].floor();
                    let rj = exact[j] - exact[j].floor();
                    rj.total_cmp(&ri).then(i.cmp(&j))
                });
                for &i in order.iter().take(n.saturating_sub(assigned)) {
                    counts[i] += 1;
                }
                Ok(loc
                    .iter()
                    .zip(&counts)
                    .flat_map(|(&x, &c)| std::iter::repeat_n(x, c))
                    .collect())
            }
            _ => Ok((1..=n).map(|j| self.quantile((j as f64 - 0.5) / n as f64)).collect()),
        }
    }
}

/// `int_a^b g(E) / (E - z) dE` by subtracting `g(x0)` at `x0 = clamp(Re z)`
/// and adding its exact logarithmic integral.
fn stieltjes_subtracted<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, z: C64, breaks: &[f64]) -> C64 {
    let x0 = z.re.clamp(a, b);
    let g0 = g(x0);
    let mut br = with_breaks(&[a, b, x0], breaks);
    // resolve the Lorentzian scale around x0
    let eta = z.im.abs();
    for k in [1.0, 4.0, 16.0] {
        br.push((x0 - k * eta).max(a));
        br.push((x0 + k * eta).min(b));
    }
    sort_dedup(&mut br);
    let bulk = adaptive(|e| (g(e) - g0) / (e - z), &br, REL_TOL, 1e-15, MAX_SEGMENTS).value;
    bulk + g0 * ((b - z).ln() - (a - z).ln())
}

fn interp(x: &[f64], y: &[f64], t: f64) -> f64 {
    if t < x[0] || t > *x.last().unwrap() {
        return 0.0;
    }
    let i = x.partition_point(|&e| e <= t).clamp(1, x.len() - 1);
    let (x0, x1) = (x[i - 1], x[i]);
    let s = (t - x0) / (x1 - x0);
    y[i - 1] + s * (y[i] - y[i - 1])
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

fn with_breaks(base: &[f64], extra: &[f64]) -> Vec<f64> {
    let lo = base.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = base.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut v: Vec<f64> = base.to_vec();
    v.extend(extra.iter().filter(|&&e| e > lo && e < hi));
    sort_dedup(&mut v);
    v
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * (1.0 + a.abs()));
}
