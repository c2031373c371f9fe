use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thetaflow::metric::make_builtin;
use thetaflow::quadrature::QuadratureParams;
use thetaflow::renorm::*;
use thetaflow::Error;

fn toy(eps: f64) -> f64 {
    0.5 * eps.powi(-2) + (1.0 / eps).ln() + 0.5 - eps
}

fn sampled<F: Fn(f64) -> f64>(grid: &EpsGrid, f: F) -> Vec<(f64, f64)> {
    grid.points()
        .unwrap()
        .into_iter()
        .map(|e| (e, f(e)))
        .collect()
}

#[test]
fn toy_density_fit() {
    let q = QuadratureParams::default();
    let samples: Vec<(f64, f64)> = EpsGrid::default()
        .points()
        .unwrap()
        .into_iter()
        .map(|e| {
            (
                e,
                collar_volume(|r: f64| r.powi(-3) + 1.0 / r + 1.0, e, 1.0, &q).unwrap(),
            )
        })
        .collect();
    let fit = fit_expansion(&samples, 0, &FitOptions::default()).unwrap();
    assert_eq!(fit.d.len(), 2);
    assert!((fit.d[&-2] - 0.5).abs() < 1e-6);
    assert!(fit.d[&-1].abs() < 1e-6);
    assert!((fit.d0 - 1.0).abs() < 1e-6);
    assert!((fit.finite_part - 0.5).abs() < 1e-6);
    assert!(fit.within_tolerance());
}

#[test]
fn log_plus_constant() {
    let fit = fit_expansion(
        &sampled(&EpsGrid::default(), |e| (1.0 / e).ln() + 2.5),
        1,
        &FitOptions::default(),
    )
    .unwrap();
    assert!((fit.d0 - 1.0).abs() < 1e-8);
    assert!((fit.finite_part - 2.5).abs() < 1e-8);
    assert!(fit.d.values().all(|c| c.abs() < 1e-8));
}

#[test]
fn exact_recovery_from_random_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = EpsGrid {
        count: 24,
        ..Default::default()
    };
    for n in 0..=1usize {
        for _ in 0..10 {
            let k = 2 * n as i32 + 2;
            let d: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (d0, c, t1, t2) = (
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let v = |e: f64| {
                (0..k).map(|i| d[i as usize] * e.powi(-k + i)).sum::<f64>()
                    + d0 * (1.0 / e).ln()
                    + c
                    + t1 * e
                    + t2 * e * e
            };
            let fit = fit_expansion(&sampled(&grid, v), n, &FitOptions::default()).unwrap();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * b.abs().max(1.0);
            for i in 0..k {
                assert!(close(fit.d[&(-k + i)], d[i as usize]), "n={n} j={}", -k + i);
            }
            assert!(close(fit.d0, d0) && close(fit.finite_part, c));
            assert!(close(fit.tail[0], t1) && close(fit.tail[1], t2));
        }
    }
}

#[test]
fn log_is_needed_for_a_log_volume() {
    let samples = sampled(&EpsGrid::default(), toy);
    let with = fit_expansion(&samples, 0, &FitOptions::default()).unwrap();
    assert!(with.within_tolerance());
    let without = fit_expansion(
        &samples,
        0,
        &FitOptions {
            include_log: false,
            ..Default::default()
        },
    );
    match without {
        Ok(fit) => assert!(!fit.within_tolerance()),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn ill_conditioned_grid_rejected() {
    let samples = sampled(&EpsGrid::default(), toy);
    let err = fit_expansion(
        &samples,
        0,
        &FitOptions {
            condition_threshold: 10.0,
            ..Default::default()
        },
    )
    .unwrap_err();
    assert!(matches!(err, Error::IllConditioned { .. }));
}

#[test]
fn cylinder_volume() {
    let spec = make_builtin("cylinder", &json!({"length": 2.0 * PI, "w0": 0.5})).unwrap();
    let closed = QuadratureParams::default();
    let generic = QuadratureParams {
        closed_form: false,
        ..closed
    };
    for eps in [0.5, 0.1, 1e-3] {
        let a = cutoff_volume(&spec, eps, &closed).unwrap();
        let b = cutoff_volume(&spec, eps, &generic).unwrap();
        assert!((a / b - 1.0).abs() < 1e-12, "{a} {b}");
    }
    let r = renormalized_volume(&spec, &RenormParams::default()).unwrap();
    assert!(r.rvol.abs() < 1e-4);
    assert!(r.fit.d[&-1].abs() < 1e-6 && r.fit.d0.abs() < 1e-6);
    // the cross-section carries the neck width w0, so the leading coefficient is w0·L/2
    assert!((r.fit.d[&-2] - 0.25 * 2.0 * PI).abs() < 1e-4);
}

#[test]
fn grid_shift_robustness() {
    // the perturbed density has an infinite power series in ρ, so the tail needs more terms
    for (spec, tail_powers) in [
        (make_builtin("cylinder", &json!({"length": 2.0 * PI, "w0": 0.5})).unwrap(), 2),
        (make_builtin("bergman", &json!({"n": 0})).unwrap(), 2),
        (
            make_builtin(
                "perturbed",
                &json!({"base": {"kind": "model", "n": 0}, "q": [{"coeff": 0.3, "rho_power": 1, "fiber": ["t", "t"]}]}),
            )
            .unwrap(),
            5,
        ),
    ] {
        let base = RenormParams { fit: FitOptions { tail_powers, ..Default::default() }, ..Default::default() };
        let shifted = RenormParams { eps_grid: EpsGrid { start: base.eps_grid.start / 2.0, ..base.eps_grid }, ..base };
        let a = renormalized_volume(&spec, &base).unwrap_or_else(|_| panic!("{}", spec.label())).rvol;
        let b = renormalized_volume(&spec, &shifted).unwrap().rvol;
        assert!((a - b).abs() <= 1e-5, "{}: {a} {b}", spec.label());
    }
}

#[test]
fn model_volume_has_pure_power_divergence() {
    let spec = make_builtin("model", &json!({"n": 1})).unwrap();
    let r = renormalized_volume(&spec, &RenormParams::default()).unwrap();
    let k = 4.0;
    let measure = spec.cross_section_measure();
    assert!((r.fit.d[&-4] / (measure / k) - 1.0).abs() < 1e-8);
    assert!((r.rvol + measure / k).abs() < 1e-6);
    assert_eq!(r.fingerprint, spec.fingerprint());
}
