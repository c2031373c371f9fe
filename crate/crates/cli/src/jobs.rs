//! One function per job kind. Jobs compute everything in memory; the caller writes files.

use serde::Serialize;
use serde_json::{json, Value};
use thetaflow::escape::{
    check_collar_orbits, find_closed_geodesics, find_eps0, ClosedSearch, SearchParams,
};
use thetaflow::flow::{integrate_batch, random_unit_starts};
use thetaflow::hamiltonian::PhasePoint;
use thetaflow::laplacian::{
    indicial_polynomial, indicial_roots, radial_consistency_error, ShiftConstant,
};
use thetaflow::metric::{BasePoint, MetricSpec, ThetaCovector};
use thetaflow::renorm::{renormalized_volume, RenormParams, RenormalizedVolume};
use thetaflow::trace::assemble_report;

use crate::config::{JobConfig, JobKind};
use crate::error::CliError;
use crate::json;

/// Result of a job: the `result` section of report.json, extra files and summary lines.
#[derive(Debug, Default)]
pub struct Outcome {
    pub result: Value,
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("result serializes")
}

fn json_file<T: Serialize>(name: &str, v: &T) -> (String, String) {
    (
        name.to_string(),
        json::to_string(v).expect("result serializes"),
    )
}

pub fn run_job(
    job: JobKind,
    cfg: &JobConfig,
    spec: &MetricSpec,
    seed: u64,
) -> Result<Outcome, CliError> {
    match job {
        JobKind::Flow => flow(cfg, spec, seed),
        JobKind::Closed => closed(cfg, spec, seed),
        JobKind::Convexity => convexity(cfg, spec, seed),
        JobKind::Rvol => rvol(cfg, spec),
        JobKind::Indicial => indicial(cfg, spec),
        JobKind::Report => report(cfg, spec, seed),
    }
}

fn starts(cfg: &JobConfig, spec: &MetricSpec, seed: u64) -> Result<Vec<PhasePoint>, CliError> {
    let n = spec.n();
    let mut out = Vec::new();
    for (i, ic) in cfg.flow.initial.iter().enumerate() {
        let field = format!("flow.initial[{i}]");
        let w = if ic.w.is_empty() {
            vec![0.0; 2 * n]
        } else {
            ic.w.clone()
        };
        let u = if ic.u.is_empty() {
            vec![0.0; 2 * n]
        } else {
            ic.u.clone()
        };
        if w.len() != 2 * n || u.len() != 2 * n {
            return Err(CliError::Config {
                field,
                message: format!("w and u need {} entries", 2 * n),
            });
        }
        let base = BasePoint::new(ic.rho, w, ic.z);
        let mut fiber = ThetaCovector {
            mu: ic.mu,
            u,
            t: ic.t,
        };
        if cfg.flow.normalize {
            let g = spec.dual_metric_g(&base, &fiber)?;
            if g.is_nan() || g <= 0.0 {
                return Err(CliError::Config {
                    field,
                    message: "cannot normalize a null covector".into(),
                });
            }
            fiber = fiber.scaled(1.0 / g.sqrt());
        }
        out.push(PhasePoint::new(base, fiber));
    }
    if cfg.flow.random > 0 {
        let [lo, hi] = cfg.flow.rho_range;
        out.extend(random_unit_starts(spec, (lo, hi), cfg.flow.random, seed)?);
    }
    if out.is_empty() {
        return Err(CliError::Config {
            field: "flow".into(),
            message: "no initial conditions (set flow.initial or flow.random)".into(),
        });
    }
    Ok(out)
}

fn flow(cfg: &JobConfig, spec: &MetricSpec, seed: u64) -> Result<Outcome, CliError> {
    let q0s = starts(cfg, spec, seed)?;
    let runs = integrate_batch(spec, &q0s, cfg.flow.s_max, &cfg.integrator);
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    for (i, run) in runs.into_iter().enumerate() {
        let traj = run?;
        let name = format!("trajectories/traj_{i:03}.csv");
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).map_err(|e| CliError::Io {
            path: name.clone().into(),
            source: e,
        })?;
        out.files
            .push((name.clone(), String::from_utf8(buf).expect("csv is ascii")));
        rows.push(json!({
            "index": i,
            "csv": name,
            "termination": traj.termination,
            "s_final": traj.final_time(),
            "initial": q0s[i],
            "final": traj.final_point(),
            "energy_initial": traj.energy[0],
            "energy_drift": traj.energy_drift(),
            "accepted_steps": traj.accepted_steps,
            "rejected_steps": traj.rejected_steps,
        }));
    }
    out.summary.push(format!(
        "{} trajectories integrated to s = {}",
        rows.len(),
        cfg.flow.s_max
    ));
    out.result = json!({ "s_max": cfg.flow.s_max, "trajectories": rows });
    Ok(out)
}

fn search(cfg: &JobConfig, spec: &MetricSpec, seed: u64) -> Result<ClosedSearch, CliError> {
    let params = SearchParams { seed, ..cfg.closed };
    Ok(find_closed_geodesics(spec, &params)?)
}

fn closed(cfg: &JobConfig, spec: &MetricSpec, seed: u64) -> Result<Outcome, CliError> {
    let s = search(cfg, spec, seed)?;
    let lengths: Vec<f64> = s.geodesics.iter().map(|g| g.length).collect();
    let mut out = Outcome::default();
    out.summary.push(format!(
        "{} closed geodesics, lengths {lengths:?}",
        lengths.len()
    ));
    out.result = json!({
        "count": s.geodesics.len(),
        "lengths": lengths,
        "residuals": s.geodesics.iter().map(|g| g.residual).collect::<Vec<_>>(),
        "multiplicity_hints": s.geodesics.iter().map(|g| g.multiplicity_hint).collect::<Vec<_>>(),
        "rho_range": s.rho_range,
        "eps0": s.eps0,
        "seeds": s.seeds,
        "discarded": s.discarded,
    });
    out.files.push(json_file("geodesics.json", &s));
    Ok(out)
}

fn convexity(cfg: &JobConfig, spec: &MetricSpec, seed: u64) -> Result<Outcome, CliError> {
    let job = &cfg.convexity;
    let scan = find_eps0(spec, &thetaflow::escape::ScanGrid { seed, ..job.scan })?;
    let collar = match (scan.eps0, job.orbits) {
        (Some(eps0), k) if k > 0 => Some(check_collar_orbits(
            spec,
            eps0,
            k,
            job.s_max,
            &cfg.integrator,
            seed,
        )?),
        _ => None,
    };
    let mut out = Outcome::default();
    match scan.eps0 {
        Some(e) => out.summary.push(format!("certified eps0 = {e:.6e}")),
        None => out.summary.push("no certified collar on this grid".into()),
    }
    if let Some(c) = &collar {
        out.summary.push(format!(
            "{} orbits, {} turning points, {} violations",
            c.orbits, c.events, c.violations
        ));
    }
    out.result = json!({ "scan": scan, "collar": collar });
    Ok(out)
}

fn renorm(cfg: &JobConfig, spec: &MetricSpec) -> Result<RenormalizedVolume, CliError> {
    let params = RenormParams {
        eps_grid: cfg.eps_grid,
        quadrature: cfg.rvol.quadrature,
        fit: cfg.rvol.fit,
    };
    Ok(renormalized_volume(spec, &params)?)
}

fn rvol(cfg: &JobConfig, spec: &MetricSpec) -> Result<Outcome, CliError> {
    let r = renorm(cfg, spec)?;
    let mut out = Outcome::default();
    out.summary.push(format!(
        "renormalized volume = {:.10e} (condition {:.2e})",
        r.rvol, r.fit.condition_number
    ));
    out.files.push(json_file("fit.json", &r.fit));
    out.result = json!({ "rvol": r.rvol, "fit": r.fit, "samples": r.samples });
    Ok(out)
}

fn indicial(cfg: &JobConfig, spec: &MetricSpec) -> Result<Outcome, CliError> {
    let job = &cfg.indicial;
    let n = job.n.unwrap_or(spec.n());
    let (a, b) = indicial_roots(n);
    let range = (job.log_range[0], job.log_range[1]);
    let errors = [
        radial_consistency_error(n, b, range, job.intervals[0])?,
        radial_consistency_error(n, b, range, job.intervals[1])?,
    ];
    let order =
        (errors[0] / errors[1]).ln() / (job.intervals[1] as f64 / job.intervals[0] as f64).ln();
    let mut out = Outcome::default();
    out.summary.push(format!(
        "n = {n}: roots ({a}, {b}), measured order {order:.3}"
    ));
    out.result = json!({
        "n": n,
        "roots": [a, b],
        "polynomial_at_roots": [indicial_polynomial(n, a), indicial_polynomial(n, b)],
        "shift_constants": {
            "quarter_n_plus_one_squared": ShiftConstant::QuarterNPlusOneSquared.value(n),
            "quarter_n_squared": ShiftConstant::QuarterNSquared.value(n),
        },
        "consistency": { "intervals": job.intervals, "errors": errors, "order": order },
    });
    Ok(out)
}

fn report(cfg: &JobConfig, spec: &MetricSpec, seed: u64) -> Result<Outcome, CliError> {
    let r = renorm(cfg, spec)?;
    let s = search(cfg, spec, seed)?;
    let eps = match &cfg.report.eps_list {
        Some(list) => list.clone(),
        None => cfg.eps_grid.points()?,
    };
    let rep = assemble_report(spec, &r, &s, &eps, cfg.report.k_max, &cfg.rvol.quadrature)?;
    let mut out = Outcome::default();
    out.summary.push(format!(
        "omega0 = {:.10e}, t0 = {:?}, consistency gap {:.2e}",
        rep.omega0, rep.t0, rep.consistency_gap
    ));
    out.files.push(json_file("fit.json", &r.fit));
    out.files.push(json_file("geodesics.json", &s));
    out.result = to_value(&rep);
    Ok(out)
}
