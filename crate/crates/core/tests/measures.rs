// SPDX-License-Identifier: Apache-2.0

use approx::assert_abs_diff_eq;
use gue_relax::measures::Side;
use gue_relax::quad::adaptive;
use gue_relax::{Error, MeasureSpec, SpectralMeasure, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

fn uniform() -> SpectralMeasure {
    SpectralMeasure::new(MeasureSpec::Uniform { a: -1.0, b: 1.0 }).unwrap()
}

fn semicircle() -> SpectralMeasure {
    SpectralMeasure::new(MeasureSpec::Semicircle {
        radius: 2.0,
        center: 0.0,
    })
    .unwrap()
}

fn gaussian() -> SpectralMeasure {
    SpectralMeasure::new(MeasureSpec::Gaussian {
        sigma: 1.0,
        center: 0.0,
        truncation: 8.0,
    })
    .unwrap()
}

fn tabulated() -> SpectralMeasure {
    SpectralMeasure::new(MeasureSpec::Tabulated {
        energies: vec![-1.5, -0.5, 0.0, 0.7, 1.2],
        density: vec![0.0, 1.0, 0.4, 0.8, 0.0],
    })
    .unwrap()
}

fn atoms() -> SpectralMeasure {
    SpectralMeasure::new(MeasureSpec::Atoms {
        locations: vec![-0.5, 0.0, 1.0],
        weights: vec![0.2, 0.5, 0.3],
    })
    .unwrap()
}

fn all() -> Vec<SpectralMeasure> {
    vec![uniform(), semicircle(), gaussian(), tabulated(), atoms()]
}

/// Stieltjes transform by brute-force adaptive quadrature of the density.
fn quadrature_f0(m: &SpectralMeasure, z: C64) -> C64 {
    let (a, b) = m.support();
    let r = adaptive(
        |e| C64::new(m.density(e).unwrap(), 0.0) / (e - z),
        &[a, z.re.clamp(a, b), b],
        1e-12,
        1e-15,
        4000,
    );
    assert!(r.converged);
    r.value
}

#[test]
fn stieltjes_reference_values() {
    let i = C64::i();
    let single = SpectralMeasure::new(MeasureSpec::Atoms {
        locations: vec![0.0],
        weights: vec![1.0],
    })
    .unwrap();
    assert_abs_diff_eq!((single.stieltjes(i).unwrap() - i).norm(), 0.0, epsilon = 1e-15);

    let u = uniform().stieltjes(i).unwrap();
    assert_abs_diff_eq!((u - i * PI / 4.0).norm(), 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!((u - quadrature_f0(&uniform(), i)).norm(), 0.0, epsilon = 1e-10);

    let sc = semicircle().stieltjes(i).unwrap();
    let golden = i * (5f64.sqrt() - 1.0) / 2.0;
    assert_abs_diff_eq!((sc - golden).norm(), 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!((sc - quadrature_f0(&semicircle(), i)).norm(), 0.0, epsilon = 1e-8);

    for m in [gaussian(), tabulated()] {
        for z in [C64::new(0.3, 0.05), C64::new(-2.0, 1.0), C64::new(0.1, -0.4)] {
            let f = m.stieltjes(z).unwrap();
            assert_abs_diff_eq!((f - quadrature_f0(&m, z)).norm(), 0.0, epsilon = 1e-8);
        }
    }
}

#[test]
fn real_axis_is_rejected() {
    for m in all() {
        assert!(matches!(
            m.stieltjes(C64::new(0.2, 0.0)),
            Err(Error::RealAxisEvaluation(_))
        ));
    }
}

#[test]
fn boundary_values() {
    let b = uniform().boundary_value(0.0, Side::Above).unwrap();
    assert_abs_diff_eq!((b.value() - C64::new(0.0, PI / 2.0)).norm(), 0.0, epsilon = 1e-14);
    let b = semicircle().boundary_value(0.0, Side::Above).unwrap();
    assert_abs_diff_eq!((b.value() - C64::i()).norm(), 0.0, epsilon = 1e-14);
    let b = uniform().boundary_value(3.0, Side::Above).unwrap();
    // outside the support the transform is an ordinary integral
    let oracle = adaptive_real_pv(&uniform(), 3.0);
    assert_abs_diff_eq!(b.re, 0.5 * (0.5f64).ln(), epsilon = 1e-14);
    assert_abs_diff_eq!(b.re, oracle, epsilon = 1e-10);
    assert_eq!(b.im, 0.0);
    let below = semicircle().boundary_value(0.7, Side::Below).unwrap();
    let above = semicircle().boundary_value(0.7, Side::Above).unwrap();
    assert!(below.im < 0.0 && above.im > 0.0);
    assert_abs_diff_eq!(above.im, PI * semicircle().density(0.7).unwrap(), epsilon = 1e-14);
    assert_eq!(
        atoms().boundary_value(0.3, Side::Above).unwrap_err(),
        Error::AtomicMeasure
    );
}

fn adaptive_real_pv(m: &SpectralMeasure, lambda: f64) -> f64 {
    let (a, b) = m.support();
    gue_relax::quad::adaptive_real(|e| m.density(e).unwrap() / (e - lambda), &[a, b], 1e-13, 1e-15, 2000).0
}

#[test]
fn principal_value_matches_limit_from_the_plane() {
    // Re f0(lambda + i eta) = PV - eta pi nu'' + O(eta^2); one Richardson step removes the linear term
    for m in [semicircle(), gaussian()] {
        for lambda in [-0.9, 0.2, 1.3] {
            let pv = m.principal_value(lambda).unwrap();
            let g = |eta: f64| m.stieltjes(C64::new(lambda, eta)).unwrap().re;
            let near = 2.0 * g(5e-4) - g(1e-3);
            assert_abs_diff_eq!(pv, near, epsilon = 1e-6);
        }
    }
}

#[test]
fn density_recovered_from_the_plane() {
    // Richardson on eta in {1e-2, 1e-3, 1e-4} reaches the analytic density within 1e-4
    for m in [uniform(), semicircle(), gaussian(), tabulated()] {
        for lambda in [-0.3, 0.1, 0.45] {
            let g = |eta: f64| m.stieltjes(C64::new(lambda, eta)).unwrap().im / PI;
            let r1 = (10.0 * g(1e-3) - g(1e-2)) / 9.0;
            let r2 = (10.0 * g(1e-4) - g(1e-3)) / 9.0;
            let r = (100.0 * r2 - r1) / 99.0;
            assert_abs_diff_eq!(r, m.density(lambda).unwrap(), epsilon = 1e-4);
        }
    }
}

#[test]
fn fourier_reference_values() {
    for m in all() {
        assert_abs_diff_eq!((m.fourier(0.0) - C64::new(1.0, 0.0)).norm(), 0.0, epsilon = 1e-10);
    }
    assert_abs_diff_eq!(uniform().fourier(PI).norm(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(
        (gaussian().fourier(1.0) - C64::new((-0.5f64).exp(), 0.0)).norm(),
        0.0,
        epsilon = 1e-10
    );
}

#[test]
fn c0_estimates() {
    let g = gaussian().c0_bound(20.0).unwrap();
    assert_abs_diff_eq!(g.total(), (2.0 * PI).sqrt(), epsilon = 1e-6);
    let sc = semicircle().c0_bound(200.0).unwrap();
    assert!(sc.total().is_finite() && sc.total() > 1.0 && sc.tail < sc.value);
    assert!(matches!(uniform().c0_bound(200.0), Err(Error::DivergentTail { .. })));
}

#[test]
fn quantiles() {
    assert_eq!(uniform().quantile_eigenvalues(2).unwrap(), vec![-0.5, 0.5]);
    let one = SpectralMeasure::new(MeasureSpec::Atoms {
        locations: vec![0.0],
        weights: vec![1.0],
    })
    .unwrap();
    assert_eq!(one.quantile_eigenvalues(3).unwrap(), vec![0.0; 3]);
    let q = semicircle().quantile_eigenvalues(4).unwrap();
    assert_abs_diff_eq!(q[0], -q[3], epsilon = 1e-12);
    assert_abs_diff_eq!(q[1], -q[2], epsilon = 1e-12);
    for (j, x) in q.iter().enumerate() {
        assert_abs_diff_eq!(semicircle().cdf(*x), (j as f64 + 0.5) / 4.0, epsilon = 1e-12);
    }
}

#[test]
fn quantile_empirical_cdf_within_one_over_n() {
    for m in all() {
        for n in [1usize, 7, 50, 333] {
            let q = m.quantile_eigenvalues(n).unwrap();
            assert!(q.windows(2).all(|w| w[0] <= w[1]));
            // both functions are monotone between sample points, so the sup is
            // attained at a sample point from the left or from the right
            for x in &q {
                let right = q.partition_point(|y| y <= x) as f64 / n as f64;
                let left = q.partition_point(|y| y < x) as f64 / n as f64;
                let tol = 1.0 / n as f64 + 1e-12;
                assert!((right - m.cdf(*x)).abs() <= tol, "{:?} n={n}", m.spec());
                assert!((left - m.cdf(x - 1e-12)).abs() <= tol, "{:?} n={n}", m.spec());
            }
        }
    }
}

#[test]
fn constructor_errors() {
    let bad = SpectralMeasure::new(MeasureSpec::Atoms {
        locations: vec![0.0],
        weights: vec![0.0],
    });
    assert_eq!(bad.unwrap_err(), Error::NonNormalizable);
    let bad = SpectralMeasure::new(MeasureSpec::Tabulated {
        energies: vec![0.0, 0.0, 1.0],
        density: vec![1.0; 3],
    });
    assert!(matches!(bad, Err(Error::NonMonotoneGrid(_))));
    let bad = SpectralMeasure::new(MeasureSpec::Tabulated {
        energies: vec![0.0, 1.0],
        density: vec![1.0, -1.0],
    });
    assert!(matches!(bad, Err(Error::NegativeDensity { .. })));
    let flat = SpectralMeasure::new(MeasureSpec::Tabulated {
        energies: vec![-1.0, 0.0, 1.0],
        density: vec![1.0; 3],
    })
    .unwrap();
    assert_abs_diff_eq!(flat.density(0.3).unwrap(), 0.5, epsilon = 1e-15);
}

#[test]
fn spec_round_trips_through_json() {
    let text = r#"{"type":"semicircle","radius":2.0}"#;
    let spec: MeasureSpec = serde_json::from_str(text).unwrap();
    assert_eq!(
        spec,
        MeasureSpec::Semicircle {
            radius: 2.0,
            center: 0.0
        }
    );
    let back: MeasureSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    assert!(serde_json::from_str::<MeasureSpec>(r#"{"type":"semicircle","radius":2.0,"r":1}"#).is_err());
}

fn arb_z() -> impl Strategy<Value = C64> {
    (-4.0f64..4.0, -2.0f64..2.0, any::<bool>()).prop_map(|(x, l, up)| {
        let y = 10f64.powf(l);
        C64::new(x, if up { y } else { -y })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn herglotz_and_resolvent_bound(z in arb_z()) {
        for m in all() {
            let f = m.stieltjes(z).unwrap();
            prop_assert!(f.im * z.im > 0.0, "{:?} at {z}: {f}", m.spec());
            prop_assert!(f.norm() <= 1.0 / z.im.abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn conjugate_symmetry(z in arb_z()) {
        for m in all() {
            let a = m.stieltjes(z).unwrap();
            let b = m.stieltjes(z.conj()).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm()));
        }
    }
}

#[test]
fn decay_along_imaginary_axis() {
    let z = C64::new(0.0, 1e3);
    for m in all() {
        assert!((z * m.stieltjes(z).unwrap() + 1.0).norm() < 1e-2);
    }
}
