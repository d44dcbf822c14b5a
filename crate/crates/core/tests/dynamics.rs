// SPDX-License-Identifier: Apache-2.0

use approx::assert_abs_diff_eq;
use gue_relax::dynamics::*;
use gue_relax::finite::FiniteModel;
use gue_relax::selfconsistent::{default_grid, solve_pair, spectral_densities, DEFAULT_ETA1, DEFAULT_TOL};
use gue_relax::{Level, MeasureSpec, ModelParams, SpectralMeasure, TwoLevelState, C64};
use proptest::prelude::*;

fn uniform(s: f64, v: f64) -> ModelParams {
    ModelParams::new(
        s,
        v,
        SpectralMeasure::new(MeasureSpec::Uniform { a: -1.0, b: 1.0 }).unwrap(),
    )
    .unwrap()
}

fn delta(s: f64, v: f64) -> ModelParams {
    ModelParams::new(
        s,
        v,
        SpectralMeasure::new(MeasureSpec::Atoms {
            locations: vec![0.0],
            weights: vec![1.0],
        })
        .unwrap(),
    )
    .unwrap()
}

fn mixed_state() -> TwoLevelState {
    TwoLevelState::new([
        [C64::new(0.7, 0.0), C64::new(0.3, -0.2)],
        [C64::new(0.3, 0.2), C64::new(0.3, 0.0)],
    ])
    .unwrap()
}

fn pair(p: &ModelParams, z: C64) -> gue_relax::StieltjesPair {
    solve_pair(p, z, 1e-14, None).unwrap()
}

#[test]
fn one_point_resolvent() {
    let p = delta(0.0, 1.0);
    let f = f_e(&p, 0.0, &pair(&p, C64::i()));
    for x in f {
        assert_abs_diff_eq!(
            (x - C64::new(0.0, (5f64.sqrt() - 1.0) / 2.0)).norm(),
            0.0,
            epsilon = 1e-10
        );
    }
    let p = uniform(0.3, 0.6);
    let z = C64::new(0.4, 0.3);
    let up = f_e(&p, 0.2, &pair(&p, z));
    let down = f_e(&p, 0.2, &pair(&p, z.conj()));
    for a in 0..2 {
        assert_abs_diff_eq!((up[a] - down[a].conj()).norm(), 0.0, epsilon = 1e-13);
        assert!(up[a].norm() <= 1.0 / z.im);
    }
}

#[test]
fn two_point_special_cases() {
    let p = delta(0.0, 0.0);
    let (z1, z2) = (C64::new(0.3, 0.5), C64::new(-0.2, -0.7));
    let f = two_point(&p, Level::Plus, Level::Minus, &pair(&p, z1), &pair(&p, z2));
    assert_abs_diff_eq!((f - 1.0 / (z1 * z2)).norm(), 0.0, epsilon = 1e-14);

    let p = uniform(0.25, 0.4);
    let z = C64::new(0.6, 0.2);
    let f = two_point(&p, Level::Minus, Level::Minus, &pair(&p, z), &pair(&p, z.conj()));
    assert!(f.re > 0.0);
    assert!(f.im.abs() <= 1e-12 * f.re);
}

#[test]
fn delta_identity_reference_point() {
    let p = uniform(0.25, 0.4);
    let (z1, z2) = (C64::new(1.0, 0.1), C64::new(1.0, -0.1));
    let (p1, p2) = (pair(&p, z1), pair(&p, z2));
    let v2 = p.v * p.v;
    for a in Level::BOTH {
        let lhs = two_point(&p, a, a, &p1, &p2) * (z1 - z2 + v2 * (p1.get(a.flip()) - p2.get(a.flip())));
        assert_abs_diff_eq!((lhs - (p1.get(a) - p2.get(a))).norm(), 0.0, epsilon = 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn delta_identity(
        x1 in -2.5f64..2.5, y1 in 0.02f64..2.0,
        x2 in -2.5f64..2.5, y2 in 0.02f64..2.0,
        lower in any::<bool>(), plus in any::<bool>(),
    ) {
        let p = uniform(0.25, 0.4);
        let z1 = C64::new(x1, y1);
        let z2 = C64::new(x2, if lower { -y2 } else { y2 });
        let (p1, p2) = (pair(&p, z1), pair(&p, z2));
        let a = if plus { Level::Plus } else { Level::Minus };
        let v2 = p.v * p.v;
        let lhs = two_point(&p, a, a, &p1, &p2) * (z1 - z2 + v2 * (p1.get(a.flip()) - p2.get(a.flip())));
        prop_assert!((lhs - (p1.get(a) - p2.get(a))).norm() <= 1e-9);
    }

    #[test]
    fn closed_two_point_matches_quadrature(
        x1 in -2.0f64..2.0, y1 in 0.05f64..1.0,
        x2 in -2.0f64..2.0, y2 in 0.05f64..1.0,
        b in any::<bool>(), g in any::<bool>(),
    ) {
        let p = uniform(0.3, 0.5);
        let (p1, p2) = (pair(&p, C64::new(x1, y1)), pair(&p, C64::new(x2, -y2)));
        let lv = |b: bool| if b { Level::Plus } else { Level::Minus };
        let q = two_point(&p, lv(b), lv(g), &p1, &p2);
        let c = two_point_closed(&p, lv(b), lv(g), &p1, &p2);
        prop_assert!((q - c).norm() <= 1e-9 * (1.0 + q.norm()));
    }
}

#[test]
fn propagator_limits() {
    let spec = ContourSpec::default();
    let p = uniform(0.25, 0.4);
    let u0 = u_e(&p, 0.1, 0.0, &spec).unwrap();
    for x in u0 {
        assert_abs_diff_eq!((x - 1.0).norm(), 0.0, epsilon = 1e-6);
    }
    for t in [0.5, 2.0, 5.0, 10.0] {
        for x in u_e(&p, 0.1, t, &spec).unwrap() {
            assert!(x.norm() <= 1.0 + spec.tol, "t={t} |U|={}", x.norm());
        }
    }
    let free = uniform(0.25, 0.0);
    let e = 0.1;
    for t in [0.0, 1.0, 7.5] {
        let u = u_e(&free, e, t, &spec).unwrap();
        for a in Level::BOTH {
            let exact = C64::new(0.0, (e + a.sign() * 0.25) * t).exp();
            assert_abs_diff_eq!((u[a.index()] - exact).norm(), 0.0, epsilon = 1e-6);
        }
    }
}

#[test]
fn mean_propagator_free_case() {
    let spec = ContourSpec::default();
    let p = uniform(0.25, 0.0);
    for t in [0.0, 1.5, 4.0] {
        let u = u_mean(&p, t, &spec).unwrap();
        for a in Level::BOTH {
            let exact = C64::new(0.0, a.sign() * 0.25 * t).exp() * p.measure.fourier(-t);
            assert_abs_diff_eq!((u[a.index()] - exact).norm(), 0.0, epsilon = 1e-6);
        }
    }
}

#[test]
fn mean_propagator_is_transform_of_inverted_density() {
    let p = uniform(0.25, 0.5);
    let d = spectral_densities(&p, &default_grid(&p, 0.002), DEFAULT_ETA1, DEFAULT_TOL).unwrap();
    for t in [0.7, 2.0] {
        let u = u_mean(&p, t, &ContourSpec::default()).unwrap();
        for a in Level::BOTH {
            let nu = d.get(a);
            let re: Vec<f64> = d.lambda.iter().zip(nu).map(|(l, n)| n * (l * t).cos()).collect();
            let im: Vec<f64> = d.lambda.iter().zip(nu).map(|(l, n)| n * (l * t).sin()).collect();
            let direct = C64::new(
                gue_relax::quad::trapezoid(&d.lambda, &re),
                gue_relax::quad::trapezoid(&d.lambda, &im),
            );
            assert_abs_diff_eq!((u[a.index()] - direct).norm(), 0.0, epsilon = 1e-3);
        }
    }
}

#[test]
fn semicircle_propagator_against_finite_matrices() {
    // all reservoir levels sit at 0, so every diagonal element of U(t) has the same law;
    // averaging over j of one sample at n = 1000 keeps the fluctuation well below 2e-2
    let p = delta(0.0, 1.0);
    let t = 2.0;
    let limit = u_e(&p, 0.0, t, &ContourSpec::default()).unwrap();
    let fm = FiniteModel::new(p, 1000, 0, 11).unwrap();
    let sp = fm.spectrum(0).unwrap();
    let mut acc = C64::new(0.0, 0.0);
    for m in 0..sp.values.len() {
        let col = sp.column(m);
        let w: f64 = col[..fm.n].iter().map(|x| x.norm_sqr()).sum();
        acc += w * C64::new(0.0, t * sp.values[m]).exp();
    }
    let mc = acc / fm.n as f64;
    assert_abs_diff_eq!((limit[0] - mc).norm(), 0.0, epsilon = 2e-2);
    assert_abs_diff_eq!((limit[1] - mc).norm(), 0.0, epsilon = 2e-2);
}

#[test]
fn zero_coupling_phases() {
    let p = uniform(0.25, 0.0);
    let rho0 = mixed_state();
    let spec = ContourSpec::default();
    for t in [0.0, 0.5, 3.0, 10.0] {
        let r = rho_limit(&p, 0.0, t, &rho0, &spec).unwrap();
        for a in Level::BOTH {
            for d in Level::BOTH {
                let exact = rho0.get(a, d) * C64::new(0.0, -t * 0.25 * (a.sign() - d.sign())).exp();
                assert_abs_diff_eq!((r.get(a, d) - exact).norm(), 0.0, epsilon = 1e-6);
            }
        }
    }
}

#[test]
fn initial_condition_and_structure() {
    let p = uniform(0.25, 0.4);
    let rho0 = mixed_state();
    let spec = ContourSpec::default();
    let r = rho_limit(&p, 0.0, 0.0, &rho0, &spec).unwrap();
    assert!(r.max_abs_diff(&rho0) <= 1e-6);
    let traj = evolve(&p, 0.0, &rho0, &[0.25, 1.0, 3.0, 6.0], &spec).unwrap();
    for (s, d) in traj.states.iter().zip(&traj.diagnostics) {
        assert!(s.trace_error() <= 10.0 * spec.tol);
        assert!(s.hermiticity_error() <= 10.0 * spec.tol);
        assert!(d.min_denominator > MIN_DENOMINATOR);
    }
}

#[test]
fn contour_offsets_do_not_matter() {
    let p = uniform(0.25, 0.4);
    let rho0 = mixed_state();
    let spec = ContourSpec::default();
    for t in [0.5, 2.0, 5.0] {
        let a = rho_limit(&p, 0.1, t, &rho0, &spec).unwrap();
        let e = 2.0 * default_eta(t);
        let wider = ContourSpec {
            eta1: Some(e),
            eta2: Some(e),
            ..spec
        };
        let b = rho_limit(&p, 0.1, t, &rho0, &wider).unwrap();
        assert!(a.max_abs_diff(&b) < 5.0 * spec.tol, "t={t}: {}", a.max_abs_diff(&b));
    }
}

#[test]
fn rejects_bad_inputs() {
    let p = uniform(0.25, 0.4);
    let rho0 = mixed_state();
    let bad = ContourSpec {
        eta1: Some(-1.0),
        ..ContourSpec::default()
    };
    assert!(rho_limit(&p, 0.0, 1.0, &rho0, &bad).is_err());
    assert!(evolve(&p, 0.0, &rho0, &[1.0, 0.5], &ContourSpec::default()).is_err());
    assert!(rho_limit(&p, 0.0, -1.0, &rho0, &ContourSpec::default()).is_err());
}
