//! Sign of `ρ̈` at radial turning points, and certification of a convex collar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{flow_state, IntegratorConfig, Trajectory};
use crate::hamiltonian::{Layout, PhasePoint, ThetaHamiltonField};
use crate::metric::{BasePoint, MetricSpec, ThetaCovector};
use crate::ode::{hermite, VectorField};

fn require_turning_point(spec: &MetricSpec, q: &PhasePoint) -> Result<()> {
    q.check(spec)?;
    if !(q.base.rho > 0.0) {
        return Err(Error::Singular { rho: q.base.rho });
    }
    let scale = spec.g_bar(&q.base, &q.fiber).abs().sqrt().max(1.0);
    if q.fiber.mu.abs() > 1e-9 * scale {
        return Err(Error::invalid(format!(
            "convexity defect needs mu = 0, got {}",
            q.fiber.mu
        )));
    }
    Ok(())
}

/// `ρ̈` along the flow at a point with `μ = 0`:
/// `−2ρ(ρ ∂_ρḠ + u·∂_uḠ + 2t ∂_tḠ) = −4ρḠ − 2ρ²∂_ρḠ − 2ρt ∂_tḠ`.
pub fn convexity_defect(spec: &MetricSpec, q: &PhasePoint) -> Result<f64> {
    require_turning_point(spec, q)?;
    let rho = q.base.rho;
    let mut at_zero = q.clone();
    at_zero.fiber.mu = 0.0;
    let jet = spec.jet(&at_zero.base, &at_zero.fiber);
    let euler: f64 = q
        .fiber
        .u
        .iter()
        .zip(&jet.d_u)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        + 2.0 * q.fiber.t * jet.d_t;
    Ok(-2.0 * rho * (rho * jet.d_rho + euler))
}

/// `−4ρḠ − 2ρ²∂_ρḠ`. Equals [`convexity_defect`] when `∂_tḠ = 0`.
pub fn homogeneous_defect(spec: &MetricSpec, q: &PhasePoint) -> Result<f64> {
    require_turning_point(spec, q)?;
    let rho = q.base.rho;
    let mut at_zero = q.clone();
    at_zero.fiber.mu = 0.0;
    let jet = spec.jet(&at_zero.base, &at_zero.fiber);
    Ok(-4.0 * rho * jet.g - 2.0 * rho * rho * jet.d_rho)
}

/// Sampling parameters for [`find_eps0`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanGrid {
    pub rho_min: f64,
    pub rho_points: usize,
    pub base_points: usize,
    pub fiber_directions: usize,
    pub margin: f64,
    pub bisect_rel_width: f64,
    pub seed: u64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        Self {
            rho_min: 1e-6,
            rho_points: 49,
            base_points: 8,
            fiber_directions: 16,
            margin: 1e-10,
            bisect_rel_width: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityScan {
    /// Largest certified radius, or `None` when even `rho_min` fails.
    pub eps0: Option<f64>,
    /// Largest defect seen on certified samples (closest to zero).
    pub worst_defect: f64,
    /// Smallest scanned radius at which certification failed.
    pub first_failure: Option<f64>,
    pub samples: usize,
    pub rho_samples: usize,
    pub base_samples: usize,
    pub fiber_samples: usize,
    pub grid: ScanGrid,
}

impl ConvexityScan {
    pub fn certified(&self) -> bool {
        self.eps0.is_some()
    }
}

struct Probe {
    base: Vec<(Vec<f64>, f64)>,
    fibers: Vec<Vec<f64>>,
}

fn probes(spec: &MetricSpec, grid: &ScanGrid) -> Probe {
    let n = spec.n();
    let m = 2 * n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    let periods = spec.periods();
    let mut base = vec![(vec![0.0; 2 * n], 0.0)];
    for k in 1..grid.base_points.max(1) {
        if n == 0 {
            base.push((vec![], periods[0] * k as f64 / grid.base_points as f64));
        } else {
            let w = (0..2 * n)
                .map(|i| rng.random_range(-0.5..0.5) * periods[i])
                .collect();
            base.push((w, rng.random_range(-0.5..0.5) * periods[2 * n]));
        }
    }
    let mut fibers: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        })
        .collect();
    if m > 1 {
        for _ in 0..grid.fiber_directions {
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            fibers.push(v);
        }
    }
    Probe { base, fibers }
}

/// Worst defect over the probe set at radius `rho`; `+∞` if some fiber has `Ḡ ≤ 0`.
fn worst_at(spec: &MetricSpec, probe: &Probe, rho: f64) -> Result<f64> {
    let n = spec.n();
    let mut worst = f64::NEG_INFINITY;
    for (w, z) in &probe.base {
        let base = BasePoint::new(rho, w.clone(), *z);
        for f in &probe.fibers {
            let fiber = ThetaCovector {
                mu: 0.0,
                u: f[..2 * n].to_vec(),
                t: f[2 * n],
            };
            let g = spec.g_bar(&base, &fiber);
            if !(g > 0.0) || !g.is_finite() {
                return Ok(f64::INFINITY);
            }
            let q = PhasePoint::new(base.clone(), fiber.scaled(1.0 / g.sqrt()));
            worst = worst.max(convexity_defect(spec, &q)?);
        }
    }
    Ok(worst)
}

/// Certify the largest collar `ρ ≤ eps0` on which every sampled unit-energy turning
/// point has `ρ̈ < −margin`.
pub fn find_eps0(spec: &MetricSpec, grid: &ScanGrid) -> Result<ConvexityScan> {
    let top = spec.rho_max();
    if !(grid.rho_min > 0.0 && grid.rho_min < top) || grid.rho_points < 2 {
        return Err(Error::invalid(
            "scan grid needs 0 < rho_min < rho_max and at least two radii",
        ));
    }
    if !(grid.bisect_rel_width > 0.0) {
        return Err(Error::invalid("bisect_rel_width must be positive"));
    }
    let probe = probes(spec, grid);
    let per_rho = probe.base.len() * probe.fibers.len();
    let ratio = (top / grid.rho_min).powf(1.0 / (grid.rho_points - 1) as f64);
    let radii: Vec<f64> = (0..grid.rho_points)
        .map(|k| {
            if k + 1 == grid.rho_points {
                top
            } else {
                grid.rho_min * ratio.powi(k as i32)
            }
        })
        .collect();
    let worst: Vec<f64> = radii
        .par_iter()
        .map(|&r| worst_at(spec, &probe, r))
        .collect::<Result<_>>()?;
    let ok = |d: f64| d < -grid.margin;
    let mut samples = radii.len() * per_rho;
    let passing = worst.iter().take_while(|d| ok(**d)).count();
    let mut scan = ConvexityScan {
        eps0: None,
        worst_defect: f64::NEG_INFINITY,
        first_failure: radii.get(passing).copied(),
        samples,
        rho_samples: radii.len(),
        base_samples: probe.base.len(),
        fiber_samples: probe.fibers.len(),
        grid: *grid,
    };
    if passing == 0 {
        scan.worst_defect = worst[0];
        return Ok(scan);
    }
    let mut worst_ok = worst[..passing]
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut lo = radii[passing - 1];
    if passing < radii.len() {
        let mut hi = radii[passing];
        while (hi - lo) > grid.bisect_rel_width * lo {
            let mid = 0.5 * (lo + hi);
            let d = worst_at(spec, &probe, mid)?;
            samples += per_rho;
            scan.rho_samples += 1;
            if ok(d) {
                lo = mid;
                worst_ok = worst_ok.max(d);
            } else {
                hi = mid;
            }
        }
        scan.first_failure = Some(hi);
    }
    scan.eps0 = Some(lo);
    scan.worst_defect = worst_ok;
    scan.samples = samples;
    Ok(scan)
}

/// `ρ̈` at `q` from a five-point stencil of integrated flow values.
pub fn finite_difference_rho_ddot(
    spec: &MetricSpec,
    q: &PhasePoint,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let g = spec.dual_metric_g(&q.base, &q.fiber)?;
    if !(g > 0.0) {
        return Ok(0.0);
    }
    let h = 1e-2 / g.sqrt();
    let tight = IntegratorConfig {
        rel_tol: cfg.rel_tol.min(1e-12),
        abs_tol: cfg.abs_tol.min(1e-15),
        ..*cfg
    };
    let y = q.to_state();
    let rho_at = |s: f64| -> Result<f64> { Ok(flow_state(spec, &y, s, &tight)?[0]) };
    let (p2, p1, m1, m2) = (rho_at(2.0 * h)?, rho_at(h)?, rho_at(-h)?, rho_at(-2.0 * h)?);
    Ok((-p2 + 16.0 * p1 - 30.0 * y[0] + 16.0 * m1 - m2) / (12.0 * h * h))
}

/// A point on a trajectory where `ρ̇ = 2ρμ` changes sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurningPoint {
    pub s: f64,
    pub q: PhasePoint,
}

/// Locate all sign changes of `μ` between accepted samples, refined to `|μ| ≈ 0`
/// by interpolation followed by Newton steps on the exact flow.
pub fn turning_points(
    spec: &MetricSpec,
    traj: &Trajectory,
    cfg: &IntegratorConfig,
) -> Result<Vec<TurningPoint>> {
    let n = spec.n();
    let mu = Layout::new(n).mu();
    let field = ThetaHamiltonField { spec };
    let mut out = Vec::new();
    for i in 0..traj.samples.len().saturating_sub(1) {
        let (s0, q0) = &traj.samples[i];
        let (s1, q1) = &traj.samples[i + 1];
        let (a, b) = (q0.fiber.mu, q1.fiber.mu);
        if !(a != 0.0 && (a * b < 0.0 || b == 0.0)) {
            continue;
        }
        let y0 = q0.to_state();
        let y1 = q1.to_state();
        let (f0, f1) = (traj.derivative(i), traj.derivative(i + 1));
        let (mut lo, mut hi) = (*s0, *s1);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let m = hermite(*s0, &y0, f0, *s1, &y1, f1, mid)[mu];
            if (m < 0.0) == (a < 0.0) && m != 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut s = 0.5 * (lo + hi);
        let mut y = flow_state(spec, &y0, s - s0, cfg)?;
        let mut dy = vec![0.0; y.len()];
        for _ in 0..4 {
            field.eval(&y, &mut dy)?;
            if dy[mu] == 0.0 || y[mu] == 0.0 {
                break;
            }
            let ds = -y[mu] / dy[mu];
            y = flow_state(spec, &y, ds, cfg)?;
            s += ds;
        }
        out.push(TurningPoint {
            s,
            q: PhasePoint::from_state(n, &y)?,
        });
    }
    Ok(out)
}

/// Turning point with both the analytic and finite-difference `ρ̈`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCheck {
    pub s: f64,
    pub rho: f64,
    pub defect: f64,
    pub finite_difference: f64,
}

impl EventCheck {
    pub fn relative_mismatch(&self) -> f64 {
        (self.defect - self.finite_difference).abs() / self.defect.abs().max(1e-300)
    }
}

/// Check every turning point of `traj` inside `{ρ ≤ eps0}`.
pub fn check_turning_points(
    spec: &MetricSpec,
    traj: &Trajectory,
    eps0: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<EventCheck>> {
    turning_points(spec, traj, cfg)?
        .into_iter()
        .filter(|tp| tp.q.base.rho <= eps0)
        .map(|tp| {
            Ok(EventCheck {
                s: tp.s,
                rho: tp.q.base.rho,
                defect: convexity_defect(spec, &tp.q)?,
                finite_difference: finite_difference_rho_ddot(spec, &tp.q, cfg)?,
            })
        })
        .collect()
}

/// Aggregate turning-point statistics over random unit-speed orbits in the collar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollarCheck {
    pub eps0: f64,
    pub orbits: usize,
    pub events: usize,
    /// Events with `ρ̈ ≥ 0` by either the analytic or the finite-difference value.
    pub violations: usize,
    pub max_relative_mismatch: f64,
    /// Largest (closest to zero) `ρ̈` seen at an event.
    pub max_rho_ddot: Option<f64>,
}

/// Integrate `orbits` seeded orbits started in `{ρ < eps0}` up to `s_max`, stopping
/// when they leave the collar, and check every turning point.
pub fn check_collar_orbits(
    spec: &MetricSpec,
    eps0: f64,
    orbits: usize,
    s_max: f64,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<CollarCheck> {
    let starts = crate::flow::random_unit_starts(spec, (0.05 * eps0, eps0), orbits, seed)?;
    let run = IntegratorConfig {
        rho_ceiling: eps0,
        ..*cfg
    };
    let per_orbit = starts
        .par_iter()
        .map(|q| {
            let traj = crate::flow::integrate(spec, q, s_max, &run)?;
            check_turning_points(spec, &traj, eps0, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = CollarCheck {
        eps0,
        orbits,
        events: 0,
        violations: 0,
        max_relative_mismatch: 0.0,
        max_rho_ddot: None,
    };
    for ev in per_orbit.iter().flatten() {
        out.events += 1;
        if ev.defect >= 0.0 || ev.finite_difference >= 0.0 {
            out.violations += 1;
        }
        out.max_relative_mismatch = out.max_relative_mismatch.max(ev.relative_mismatch());
        let worst = ev.defect.max(ev.finite_difference);
        out.max_rho_ddot = Some(out.max_rho_ddot.map_or(worst, |m: f64| m.max(worst)));
    }
    Ok(out)
}
