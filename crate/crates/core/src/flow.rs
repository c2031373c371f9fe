//! Integration of the Θ-Hamilton flow of `G`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Layout, PhasePoint, ThetaHamiltonField};
use crate::metric::{BasePoint, MetricSpec, ThetaCovector};
use crate::ode::{self, integrate_adaptive, Method, StepControl, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub rho_floor: f64,
    pub rho_ceiling: f64,
    pub method: Method,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.5,
            min_step: 1e-12,
            rho_floor: 1e-8,
            rho_ceiling: 1e8,
            method: Method::AdaptiveRk,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(pos(self.rel_tol) && self.abs_tol >= 0.0 && pos(self.min_step) && pos(self.max_step)) {
            return Err(Error::invalid(
                "integrator tolerances and step bounds must be positive",
            ));
        }
        if self.min_step > self.max_step {
            return Err(Error::invalid("min_step exceeds max_step"));
        }
        if !(pos(self.rho_floor) && self.rho_ceiling > self.rho_floor) {
            return Err(Error::invalid("need 0 < rho_floor < rho_ceiling"));
        }
        Ok(())
    }

    fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            min_step: self.min_step,
            max_step: self.max_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedSMax,
    RhoFloor,
    RhoCeiling,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub n: usize,
    /// Accepted states `(s, q)` in order of flow time.
    pub samples: Vec<(f64, PhasePoint)>,
    /// `G` at each sample.
    pub energy: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub termination: Termination,
    derivatives: Vec<Vec<f64>>,
}

/// Error weights `(1/ρ, 1/ρ, 1/ρ², 1, 1, 1)`.
pub(crate) fn theta_weights(n: usize) -> impl Fn(&[f64], &mut [f64]) {
    let l = Layout::new(n);
    move |y: &[f64], w: &mut [f64]| {
        let r = 1.0 / y[0].abs().max(1e-300);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = if i == l.z() {
                r * r
            } else if i < l.mu() {
                r
            } else {
                1.0
            };
        }
    }
}

fn check_start(spec: &MetricSpec, q0: &PhasePoint, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    q0.check(spec)?;
    let rho = q0.base.rho;
    if !(rho > 0.0) {
        return Err(Error::Singular { rho });
    }
    if rho < cfg.rho_floor || rho > cfg.rho_ceiling {
        return Err(Error::invalid(format!(
            "initial rho = {rho} outside [{}, {}]",
            cfg.rho_floor, cfg.rho_ceiling
        )));
    }
    Ok(())
}

/// Integrate the flow from `q0` for flow time `s_max` (which may be negative).
///
/// Stops early when `ρ` leaves `[rho_floor, rho_ceiling]`. A step failure is
/// reported through [`Termination::StepFailure`] with the data computed so far.
/// Fails with [`Error::EnergyDrift`] if `|G − G(q0)|` exceeds `100·rel_tol·max(G(q0), 1e-300)`.
pub fn integrate(
    spec: &MetricSpec,
    q0: &PhasePoint,
    s_max: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_start(spec, q0, cfg)?;
    let n = spec.n();
    let field = ThetaHamiltonField { spec };
    let y0 = q0.to_state();
    let mut k0 = vec![0.0; y0.len()];
    field.eval(&y0, &mut k0)?;
    let mut samples = vec![(0.0, q0.clone())];
    let mut derivatives = vec![k0];
    let mut termination = Termination::ReachedSMax;
    let result = integrate_adaptive(
        &field,
        &y0,
        s_max,
        cfg.method,
        cfg.control(),
        theta_weights(n),
        |s, y, k| {
            samples.push((s, PhasePoint::from_state(n, y).expect("dimension")));
            derivatives.push(k.to_vec());
            if y[0] < cfg.rho_floor {
                termination = Termination::RhoFloor;
                return false;
            }
            if y[0] > cfg.rho_ceiling {
                termination = Termination::RhoCeiling;
                return false;
            }
            true
        },
    );
    let (accepted_steps, rejected_steps) = match result {
        Ok(run) => (run.accepted, run.rejected),
        Err(Error::StepFailure { .. }) => {
            termination = Termination::StepFailure;
            (samples.len() - 1, 0)
        }
        Err(e) => return Err(e),
    };
    let energy = samples
        .iter()
        .map(|(_, q)| spec.dual_metric_g(&q.base, &q.fiber))
        .collect::<Result<Vec<_>>>()?;
    let traj = Trajectory {
        n,
        samples,
        energy,
        accepted_steps,
        rejected_steps,
        termination,
        derivatives,
    };
    let bound = 100.0 * cfg.rel_tol * traj.energy[0].abs().max(1e-300);
    let drift = traj.energy_drift();
    if drift > bound {
        return Err(Error::EnergyDrift { drift, bound });
    }
    Ok(traj)
}

/// Integrate many initial conditions in parallel, preserving input order.
pub fn integrate_batch(
    spec: &MetricSpec,
    q0s: &[PhasePoint],
    s_max: f64,
    cfg: &IntegratorConfig,
) -> Vec<Result<Trajectory>> {
    q0s.par_iter()
        .map(|q| integrate(spec, q, s_max, cfg))
        .collect()
}

/// `count` seeded random starts on the unit cosphere `{G = 1}` with `ρ` drawn
/// uniformly from `rho_range` and boundary coordinates from one period cell.
pub fn random_unit_starts(
    spec: &MetricSpec,
    rho_range: (f64, f64),
    count: usize,
    seed: u64,
) -> Result<Vec<PhasePoint>> {
    let (lo, hi) = rho_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(format!(
            "rho range ({lo}, {hi}) must satisfy 0 < lo < hi"
        )));
    }
    let n = spec.n();
    let periods = spec.periods();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let base = BasePoint::new(
            rng.random_range(lo..hi),
            (0..2 * n)
                .map(|i| rng.random_range(-0.5..0.5) * periods[i])
                .collect(),
            rng.random_range(-0.5..0.5) * periods[2 * n],
        );
        let fiber = ThetaCovector {
            mu: rng.random_range(-1.0..1.0),
            u: (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            t: rng.random_range(-1.0..1.0),
        };
        let g = spec.dual_metric_g(&base, &fiber)?;
        if g > 1e-12 {
            out.push(PhasePoint::new(base, fiber.scaled(1.0 / g.sqrt())));
        }
    }
    Ok(out)
}

/// The time-`s` flow map on flat states; fails if `ρ` leaves the configured window.
pub fn flow_state(
    spec: &MetricSpec,
    y0: &[f64],
    s: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    let field = ThetaHamiltonField { spec };
    let mut left = None;
    let run = integrate_adaptive(
        &field,
        y0,
        s,
        cfg.method,
        cfg.control(),
        theta_weights(spec.n()),
        |_, y, _| {
            if y[0] < cfg.rho_floor || y[0] > cfg.rho_ceiling {
                left = Some(y[0]);
                return false;
            }
            true
        },
    )?;
    if let Some(rho) = left {
        return Err(Error::invalid(format!(
            "flow left the collar window at rho = {rho}"
        )));
    }
    Ok(run.y)
}

/// The time-`s` flow map `Φ_s(q0)`.
pub fn flow_to(
    spec: &MetricSpec,
    q0: &PhasePoint,
    s: f64,
    cfg: &IntegratorConfig,
) -> Result<PhasePoint> {
    check_start(spec, q0, cfg)?;
    PhasePoint::from_state(spec.n(), &flow_state(spec, &q0.to_state(), s, cfg)?)
}

impl Trajectory {
    /// `max_s |G(s) − G(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let g0 = self.energy[0];
        self.energy.iter().fold(0.0, |m, g| m.max((g - g0).abs()))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn final_point(&self) -> &PhasePoint {
        &self.samples.last().expect("non-empty").1
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().expect("non-empty").0
    }

    /// `ds/dt` state derivative stored at sample `i`.
    pub fn derivative(&self, i: usize) -> &[f64] {
        &self.derivatives[i]
    }

    /// Cubic Hermite interpolation of the state at flow time `s`.
    pub fn interpolate(&self, s: f64) -> Option<Vec<f64>> {
        let i = self.samples.windows(2).position(|w| {
            let (a, b) = (w[0].0, w[1].0);
            (a <= s && s <= b) || (b <= s && s <= a)
        })?;
        let (s0, q0) = &self.samples[i];
        let (s1, q1) = &self.samples[i + 1];
        Some(ode::hermite(
            *s0,
            &q0.to_state(),
            &self.derivatives[i],
            *s1,
            &q1.to_state(),
            &self.derivatives[i + 1],
            s,
        ))
    }

    /// Write `s, rho, w…, z, mu, u…, t, G` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["s".to_string(), "rho".to_string()];
        header.extend((1..=2 * self.n).map(|j| format!("w{j}")));
        header.extend(["z".to_string(), "mu".to_string()]);
        header.extend((1..=2 * self.n).map(|j| format!("u{j}")));
        header.extend(["t".to_string(), "G".to_string()]);
        writeln!(out, "{}", header.join(","))?;
        for ((s, q), g) in self.samples.iter().zip(&self.energy) {
            let mut row = vec![*s];
            row.extend(q.to_state());
            row.push(*g);
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{BasePoint, MetricKind, ThetaCovector};

    #[test]
    fn radial_orbit_is_exponential() {
        let spec = MetricSpec::new(MetricKind::Model { n: 1 }).unwrap();
        let q0 = PhasePoint::new(
            BasePoint::new(1.0, vec![0.0, 0.0], 0.0),
            ThetaCovector {
                mu: 1.0,
                u: vec![0.0, 0.0],
                t: 0.0,
            },
        );
        let traj = integrate(&spec, &q0, 2.0, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.termination, Termination::ReachedSMax);
        for (s, q) in &traj.samples {
            assert!((q.base.rho / (2.0 * s).exp() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn floor_terminates() {
        let spec = MetricSpec::new(MetricKind::Model { n: 0 }).unwrap();
        let q0 = PhasePoint::new(
            BasePoint::new(1.0, vec![], 0.0),
            ThetaCovector {
                mu: -1.0,
                u: vec![],
                t: 0.0,
            },
        );
        let cfg = IntegratorConfig {
            rho_floor: 1e-3,
            ..Default::default()
        };
        let traj = integrate(&spec, &q0, 100.0, &cfg).unwrap();
        assert_eq!(traj.termination, Termination::RhoFloor);
        assert!(traj.final_time() < 4.0);
    }

    #[test]
    fn csv_layout() {
        let spec = MetricSpec::new(MetricKind::Model { n: 1 }).unwrap();
        let q0 = PhasePoint::new(
            BasePoint::new(1.0, vec![0.0, 0.0], 0.0),
            ThetaCovector {
                mu: 0.3,
                u: vec![0.1, 0.2],
                t: 0.5,
            },
        );
        let traj = integrate(&spec, &q0, 0.5, &IntegratorConfig::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "s,rho,w1,w2,z,mu,u1,u2,t,G");
        assert_eq!(lines.count(), traj.len());
    }
}
