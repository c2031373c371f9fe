use std::f64::consts::PI;

use serde_json::json;
use thetaflow::flow::*;
use thetaflow::hamiltonian::{FrontFaceField, FrontFacePhasePoint, PhasePoint, ThetaHamiltonField};
use thetaflow::metric::{make_builtin, BasePoint, MetricSpec, ThetaCovector};
use thetaflow::ode::{integrate_adaptive, integrate_fixed, Method, StepControl};
use thetaflow::Error;

fn model(n: usize) -> MetricSpec {
    make_builtin("model", &json!({"n": n})).unwrap()
}

fn radial(n: usize, rho: f64, mu: f64) -> PhasePoint {
    PhasePoint::new(
        BasePoint::new(rho, vec![0.0; 2 * n], 0.0),
        ThetaCovector {
            mu,
            u: vec![0.0; 2 * n],
            t: 0.0,
        },
    )
}

#[test]
fn zero_fiber_is_stationary() {
    let spec = make_builtin("bergman", &json!({"n": 1})).unwrap();
    let q0 = PhasePoint::new(
        BasePoint::new(0.4, vec![0.2, 0.1], 0.3),
        ThetaCovector::zero(1),
    );
    let traj = integrate(&spec, &q0, 5.0, &IntegratorConfig::default()).unwrap();
    assert!(traj.samples.iter().all(|(_, q)| *q == q0));
    assert!(traj.energy.iter().all(|g| *g == 0.0));
    assert_eq!(traj.energy_drift(), 0.0);
}

#[test]
fn radial_orbit_and_drift() {
    let spec = model(1);
    let cfg = IntegratorConfig {
        rho_ceiling: 1e50,
        ..Default::default()
    };
    let traj = integrate(&spec, &radial(1, 1.0, 1.0), 50.0, &cfg).unwrap();
    assert_eq!(traj.termination, Termination::ReachedSMax);
    for s in [1.0, 10.0] {
        let y = traj.interpolate(s).unwrap();
        let tol = if s == 1.0 { 1e-8 } else { 1e-6 };
        assert!((y[0] / (2.0 * s).exp() - 1.0).abs() <= tol);
    }
    assert!(traj.energy_drift() <= 1e-8);
}

#[test]
fn neck_orbit_stays_on_neck() {
    let spec = make_builtin("cylinder", &json!({"length": 2.0 * PI, "w0": 0.5})).unwrap();
    let q0 = PhasePoint::new(
        BasePoint::new(1.0, vec![], 0.0),
        ThetaCovector {
            mu: 0.0,
            u: vec![],
            t: 0.5,
        },
    );
    assert!((spec.dual_metric_g(&q0.base, &q0.fiber).unwrap() - 1.0).abs() < 1e-15);
    let traj = integrate(&spec, &q0, 10.0 * PI / 2.0, &IntegratorConfig::default()).unwrap();
    assert!(traj
        .samples
        .iter()
        .all(|(_, q)| (q.base.rho - 1.0).abs() < 1e-12));
    assert!(traj.energy_drift() <= 1e-8);
    let end = traj.final_point();
    assert!((end.base.z - 20.0 * PI).abs() < 1e-7);
}

#[test]
fn time_reversal() {
    let spec = make_builtin("bergman", &json!({"n": 1})).unwrap();
    let q0 = PhasePoint::new(
        BasePoint::new(0.5, vec![0.1, -0.2], 0.3),
        ThetaCovector {
            mu: 0.2,
            u: vec![0.3, -0.1],
            t: 0.4,
        },
    );
    let cfg = IntegratorConfig::default();
    let there = flow_to(&spec, &q0, 2.0, &cfg).unwrap();
    let back = flow_to(&spec, &there, -2.0, &cfg).unwrap();
    let (a, b) = (q0.to_state(), back.to_state());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0));
    }
}

#[test]
fn fiber_rescaling_reparameterizes_time() {
    let spec = model(1);
    let q0 = PhasePoint::new(
        BasePoint::new(0.5, vec![0.1, -0.2], 0.3),
        ThetaCovector {
            mu: 0.2,
            u: vec![0.3, -0.1],
            t: 0.4,
        },
    );
    let doubled = PhasePoint::new(q0.base.clone(), q0.fiber.scaled(2.0));
    let cfg = IntegratorConfig::default();
    let a = flow_to(&spec, &doubled, 0.7, &cfg).unwrap();
    let b = flow_to(&spec, &q0, 1.4, &cfg).unwrap();
    assert!((a.base.rho / b.base.rho - 1.0).abs() < 1e-8);
    for (x, y) in a.base.w.iter().zip(&b.base.w) {
        assert!((x - y).abs() < 1e-8 * y.abs().max(1.0));
    }
    assert!((a.base.z - b.base.z).abs() < 1e-8 * b.base.z.abs().max(1.0));
}

#[test]
fn nominal_orders_on_the_theta_flow() {
    let spec = make_builtin("bergman", &json!({"n": 1})).unwrap();
    let field = ThetaHamiltonField { spec: &spec };
    let y0 = PhasePoint::new(
        BasePoint::new(0.5, vec![0.1, -0.2], 0.3),
        ThetaCovector {
            mu: 0.2,
            u: vec![0.3, -0.1],
            t: 0.4,
        },
    )
    .to_state();
    for (method, order) in [(Method::AdaptiveRk, 5.0), (Method::ImplicitMidpoint, 2.0)] {
        let reference =
            integrate_fixed(&field, &y0, 1.0 / 2560.0, 2560, Method::AdaptiveRk).unwrap();
        let err = |steps: usize| {
            let y = integrate_fixed(&field, &y0, 1.0 / steps as f64, steps, method).unwrap();
            y.iter()
                .zip(&reference)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let p = (err(20) / err(40)).log2();
        assert!((p - order).abs() <= 0.5, "{method:?}: {p}");
    }
}

#[test]
fn tolerance_refinement_order() {
    let spec = model(1);
    let field = ThetaHamiltonField { spec: &spec };
    let y0 = PhasePoint::new(
        BasePoint::new(0.5, vec![0.1, -0.2], 0.3),
        ThetaCovector {
            mu: 0.2,
            u: vec![0.3, -0.1],
            t: 0.4,
        },
    )
    .to_state();
    let run = |tol: f64| {
        let ctl = StepControl {
            rel_tol: tol,
            abs_tol: tol * 1e-2,
            min_step: 1e-12,
            max_step: 0.5,
        };
        integrate_adaptive(
            &field,
            &y0,
            2.0,
            Method::AdaptiveRk,
            ctl,
            |_, w| w.fill(1.0),
            |_, _, _| true,
        )
        .unwrap()
        .y
    };
    let reference = run(1e-14);
    let err = |tol: f64| {
        run(tol)
            .iter()
            .zip(&reference)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    };
    let (e1, e2) = (err(1e-6), err(1e-8));
    // for an order-p method the global error scales like tol^{p/(p+1)}
    let measured = (e1 / e2).log10() / 2.0;
    assert!(measured > 0.5 && measured < 1.2, "{measured}");
}

#[test]
fn implicit_midpoint_tracks_radial_orbit() {
    let spec = model(0);
    let cfg = IntegratorConfig {
        method: Method::ImplicitMidpoint,
        rel_tol: 1e-9,
        ..Default::default()
    };
    let traj = integrate(&spec, &radial(0, 1.0, 0.5), 2.0, &cfg).unwrap();
    let q = traj.final_point();
    assert!((q.base.rho / 2f64.exp() - 1.0).abs() < 1e-6);
}

#[test]
fn invalid_configs_rejected() {
    let spec = model(0);
    let q0 = radial(0, 1.0, 1.0);
    let bad = IntegratorConfig {
        min_step: 1.0,
        max_step: 0.1,
        ..Default::default()
    };
    assert!(integrate(&spec, &q0, 1.0, &bad).is_err());
    let outside = radial(0, 1e-9, 1.0);
    assert!(integrate(&spec, &outside, 1.0, &IntegratorConfig::default()).is_err());
    let starved = IntegratorConfig {
        min_step: 0.4,
        max_step: 0.5,
        rel_tol: 1e-14,
        abs_tol: 0.0,
        ..Default::default()
    };
    let q1 = PhasePoint::new(
        BasePoint::new(0.5, vec![], 0.0),
        ThetaCovector {
            mu: 0.3,
            u: vec![],
            t: 2.0,
        },
    );
    let traj = integrate(&spec, &q1, 5.0, &starved);
    assert!(
        matches!(traj, Ok(ref t) if t.termination == Termination::StepFailure)
            || matches!(traj, Err(Error::EnergyDrift { .. }))
    );
}

#[test]
fn batch_preserves_order() {
    let spec = model(1);
    let starts: Vec<PhasePoint> = (1..=6).map(|k| radial(1, 1.0, 0.1 * k as f64)).collect();
    let runs = integrate_batch(&spec, &starts, 1.0, &IntegratorConfig::default());
    for (k, r) in runs.iter().enumerate() {
        let rho = r.as_ref().unwrap().final_point().base.rho;
        assert!((rho / (0.2 * (k + 1) as f64).exp() - 1.0).abs() < 1e-9);
    }
}

/// Interior model flow near the boundary, rescaled about the left base point,
/// against the canonical front-face flow.
fn front_face_comparison(c_f: f64, dilated: bool) -> f64 {
    let spec = model(1);
    // z = 0 keeps the vertical blow-up (z - z0) / ρ² free of cancellation
    let left = BasePoint::new(1e-6, vec![0.2, -0.1], 0.0);
    let rho = left.rho;
    let right = PhasePoint::new(
        BasePoint::new(
            1.3 * rho,
            vec![0.2 + 0.4 * rho, -0.1 - 0.3 * rho],
            0.2 * rho * rho,
        ),
        ThetaCovector {
            mu: 0.3,
            u: vec![0.5, -0.4],
            t: c_f * 1.69,
        },
    );
    let start = FrontFacePhasePoint::from_interior(&left, &right);
    let s = 0.8;
    let cfg = IntegratorConfig {
        rel_tol: 1e-12,
        abs_tol: 1e-18,
        rho_floor: 1e-12,
        ..Default::default()
    };
    let interior = flow_to(&spec, &right, s, &cfg).unwrap();
    let expected = FrontFacePhasePoint::from_interior(&left, &interior).to_state();
    let field = FrontFaceField {
        spec: &spec,
        w: left.w.clone(),
        z: left.z,
        dilated,
    };
    let ctl = StepControl {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        min_step: 1e-12,
        max_step: 0.1,
    };
    let got = integrate_adaptive(
        &field,
        &start.to_state(),
        s,
        Method::AdaptiveRk,
        ctl,
        |_, w| w.fill(1.0),
        |_, _, _| true,
    )
    .unwrap()
    .y;
    got.iter()
        .zip(&expected)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / b.abs().max(1.0)))
}

#[test]
fn front_face_flow_is_rescaled_interior_flow() {
    assert!(front_face_comparison(0.0, false) < 1e-8);
    assert!(front_face_comparison(0.0, true) < 1e-8);
    assert!(front_face_comparison(0.6, true) < 1e-8);
    // without the fiber dilation the vertical momentum is transported wrongly
    assert!(front_face_comparison(0.6, false) > 1e-2);
}

#[test]
fn csv_columns_for_n_zero() {
    let traj = integrate(
        &model(0),
        &radial(0, 1.0, 0.5),
        1.0,
        &IntegratorConfig::default(),
    )
    .unwrap();
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("s,rho,z,mu,t,G\n"));
}
