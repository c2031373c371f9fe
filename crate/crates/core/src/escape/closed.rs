//! Multi-start shooting for periodic orbits of the unit-energy flow.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convexity::{find_eps0, ScanGrid};
use crate::error::{Error, Result};
use crate::flow::{flow_state, integrate, IntegratorConfig};
use crate::hamiltonian::{Layout, PhasePoint};
use crate::metric::{BasePoint, MetricSpec, ThetaCovector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedGeodesic {
    /// Riemannian length `2·T·sqrt(G)` with `T` the flow period.
    pub length: f64,
    pub flow_period: f64,
    pub q0: PhasePoint,
    pub residual: f64,
    /// Number of distinct oriented orbits merged into this geometric orbit.
    pub multiplicity_hint: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    /// Section radii `[lo, hi]`; defaults to the core outside the certified collar.
    pub rho_range: Option<[f64; 2]>,
    pub rho_seeds: usize,
    pub base_seeds: usize,
    pub fiber_seeds: usize,
    /// Flow-time horizon for detecting a first return.
    pub s_max: f64,
    /// Maximal state distance accepted as a near return.
    pub return_tol: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub fd_step: f64,
    /// Orbits with residual above this are discarded.
    pub accept_residual: f64,
    pub seed: u64,
    pub scan: ScanGrid,
    pub integrator: IntegratorConfig,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            rho_range: None,
            rho_seeds: 9,
            base_seeds: 1,
            fiber_seeds: 4,
            s_max: 10.0,
            return_tol: 0.25,
            newton_tol: 1e-11,
            max_newton: 30,
            fd_step: 1e-6,
            accept_residual: 1e-8,
            seed: 0,
            scan: ScanGrid::default(),
            integrator: IntegratorConfig {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                ..IntegratorConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedSearch {
    pub geodesics: Vec<ClosedGeodesic>,
    pub rho_range: [f64; 2],
    pub eps0: Option<f64>,
    pub seeds: usize,
    /// Seeds with a near return whose refinement diverged or missed `accept_residual`.
    pub discarded: usize,
    pub fingerprint: String,
}

/// Periodic wrap of base coordinates when the metric is translation invariant.
struct Wrap {
    periods: Vec<f64>,
    periodic: bool,
    n: usize,
}

impl Wrap {
    fn new(spec: &MetricSpec) -> Self {
        Self {
            periods: spec.periods().to_vec(),
            periodic: spec.is_periodic(),
            n: spec.n(),
        }
    }

    fn diff(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        if self.periodic {
            for k in 0..=2 * self.n {
                let p = self.periods[k];
                d[1 + k] -= p * (d[1 + k] / p).round();
            }
        }
        d
    }

    fn dist(&self, a: &[f64], b: &[f64], upto: usize) -> f64 {
        self.diff(a, b)[..upto]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

fn residual(spec: &MetricSpec, wrap: &Wrap, x: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let dim = spec.phase_dim();
    let (q, period) = (&x[..dim], x[dim]);
    if !(q[0] > 0.0) || !(period > 0.0) {
        return Err(Error::invalid("shooting left the admissible region"));
    }
    let end = flow_state(spec, q, period, cfg)?;
    let mut r = wrap.diff(&end, q);
    let p = PhasePoint::from_state(spec.n(), q)?;
    r.push(p.fiber.mu);
    r.push(spec.dual_metric_g(&p.base, &p.fiber)? - 1.0);
    Ok(r)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Gauss-Newton on `(q, T)` for `Φ_T(q) = q`, `μ(q) = 0`, `G(q) = 1`.
fn refine(
    spec: &MetricSpec,
    wrap: &Wrap,
    q: &[f64],
    period: f64,
    p: &SearchParams,
) -> Result<(Vec<f64>, f64, f64)> {
    let cfg = &p.integrator;
    let mut x: Vec<f64> = q.to_vec();
    x.push(period);
    let mut r = residual(spec, wrap, &x, cfg)?;
    for _ in 0..p.max_newton {
        if norm(&r) <= p.newton_tol {
            break;
        }
        let cols: Vec<Vec<f64>> = (0..x.len())
            .into_par_iter()
            .map(|k| {
                let h = p.fd_step * x[k].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let rp = residual(spec, wrap, &xp, cfg)?;
                let rm = residual(spec, wrap, &xm, cfg)?;
                Ok(rp
                    .iter()
                    .zip(&rm)
                    .map(|(a, b)| (a - b) / (2.0 * h))
                    .collect())
            })
            .collect::<Result<_>>()?;
        let jac = DMatrix::from_fn(r.len(), x.len(), |i, k| cols[k][i]);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&DVector::from_column_slice(&r), 1e-14 * smax)
            .map_err(|e| Error::invalid(format!("shooting solve: {e}")))?;
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..8 {
            let trial: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, d)| a - lambda * d)
                .collect();
            if let Ok(rt) = residual(spec, wrap, &trial, cfg) {
                if norm(&rt) < norm(&r) {
                    x = trial;
                    r = rt;
                    improved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let period = x.pop().expect("period");
    Ok((x, period, norm(&r)))
}

/// Sample `count` states along one period of the orbit through `q`.
fn orbit_samples(
    spec: &MetricSpec,
    q: &[f64],
    period: f64,
    count: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![q.to_vec()];
    let dt = period / count as f64;
    for _ in 1..count {
        let next = flow_state(spec, out.last().expect("non-empty"), dt, cfg)?;
        out.push(next);
    }
    Ok(out)
}

fn hausdorff(wrap: &Wrap, a: &[Vec<f64>], b: &[Vec<f64>], upto: usize) -> f64 {
    let one_sided = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| wrap.dist(p, q, upto))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

fn seeds(spec: &MetricSpec, range: [f64; 2], p: &SearchParams) -> Vec<Vec<f64>> {
    let n = spec.n();
    let m = 2 * n + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let count = p.rho_seeds.max(1);
    let radii: Vec<f64> = if count == 1 || range[0] == range[1] {
        vec![(range[0] * range[1]).sqrt()]
    } else {
        let ratio = (range[1] / range[0]).powf(1.0 / (count - 1) as f64);
        (0..count)
            .map(|k| range[0] * ratio.powi(k as i32))
            .collect()
    };
    let periods = spec.periods();
    let mut bases = vec![(vec![0.0; 2 * n], 0.0)];
    for _ in 1..p.base_seeds.max(1) {
        let w = (0..2 * n)
            .map(|i| rng.random_range(-0.5..0.5) * periods[i])
            .collect();
        bases.push((w, rng.random_range(-0.5..0.5) * periods[2 * n]));
    }
    let mut fibers = vec![];
    for sign in [1.0, -1.0] {
        let mut e = vec![0.0; m];
        e[m - 1] = sign;
        fibers.push(e);
    }
    if m > 1 {
        for _ in 0..p.fiber_seeds {
            fibers.push((0..m).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
    }
    let mut out = Vec::new();
    for &rho in &radii {
        for (w, z) in &bases {
            for f in &fibers {
                let base = BasePoint::new(rho, w.clone(), *z);
                let fiber = ThetaCovector {
                    mu: 0.0,
                    u: f[..2 * n].to_vec(),
                    t: f[2 * n],
                };
                let g = spec.g_bar(&base, &fiber);
                if g > 0.0 && g.is_finite() {
                    out.push(PhasePoint::new(base, fiber.scaled(1.0 / g.sqrt())).to_state());
                }
            }
        }
    }
    out
}

/// Flow time of the first near return of the orbit through `y0` within the horizon.
fn first_return(spec: &MetricSpec, wrap: &Wrap, y0: &[f64], p: &SearchParams) -> Option<f64> {
    let q0 = PhasePoint::from_state(spec.n(), y0).ok()?;
    let traj = integrate(spec, &q0, p.s_max, &p.integrator).ok()?;
    let end = traj.final_time();
    let dt = (p.return_tol / 20.0).min(end / 8.0);
    let times: Vec<f64> = (0..)
        .map(|k| k as f64 * dt)
        .take_while(|s| *s <= end)
        .collect();
    let dist: Vec<f64> = times
        .iter()
        .map(|&s| {
            traj.interpolate(s)
                .map_or(f64::INFINITY, |y| wrap.dist(&y, y0, y0.len()))
        })
        .collect();
    let left = dist.iter().position(|d| *d > 2.0 * p.return_tol)?;
    for i in left.max(1)..dist.len().saturating_sub(1) {
        if dist[i] <= p.return_tol && dist[i] <= dist[i - 1] && dist[i] <= dist[i + 1] {
            let (d0, d1, d2) = (dist[i - 1], dist[i], dist[i + 1]);
            let curv = d0 - 2.0 * d1 + d2;
            let shift = if curv > 0.0 {
                (0.5 * (d0 - d2) / curv).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            return Some(times[i] + shift * dt);
        }
    }
    None
}

struct Candidate {
    q: Vec<f64>,
    period: f64,
    residual: f64,
    orbit: Vec<Vec<f64>>,
}

/// Find closed orbits of the unit-energy flow meeting `{μ = 0}` with `ρ` in the search range.
pub fn find_closed_geodesics(spec: &MetricSpec, params: &SearchParams) -> Result<ClosedSearch> {
    params.integrator.validate()?;
    let (range, eps0) = match params.rho_range {
        Some(r) => {
            if !(r[0] > 0.0 && r[1] >= r[0]) {
                return Err(Error::invalid("rho_range must satisfy 0 < lo <= hi"));
            }
            (r, None)
        }
        None => {
            let scan = find_eps0(spec, &params.scan)?;
            let lo = scan.eps0.unwrap_or(params.scan.rho_min);
            let hi = if spec.ends() == 2 {
                1.0 / lo
            } else {
                spec.rho_max()
            };
            ([lo, hi.max(lo)], scan.eps0)
        }
    };
    let wrap = Wrap::new(spec);
    let starts = seeds(spec, range, params);
    let dim = spec.phase_dim();
    let attempts: Vec<Option<Result<Candidate>>> = starts
        .par_iter()
        .map(|y0| {
            let period = first_return(spec, &wrap, y0, params)?;
            Some((|| {
                let (q, period, res) = refine(spec, &wrap, y0, period, params)?;
                if !(res <= params.accept_residual) || !(period > 1e-6) {
                    return Err(Error::invalid(format!(
                        "refinement stalled at residual {res:e}"
                    )));
                }
                let orbit = orbit_samples(spec, &q, period, 64, &params.integrator)?;
                Ok(Candidate {
                    q,
                    period,
                    residual: res,
                    orbit,
                })
            })())
        })
        .collect();
    let mut discarded = 0;
    let mut found: Vec<Candidate> = Vec::new();
    for a in attempts.into_iter().flatten() {
        match a {
            Ok(c) => found.push(c),
            Err(_) => discarded += 1,
        }
    }
    found.sort_by(|a, b| {
        a.period
            .total_cmp(&b.period)
            .then_with(|| a.q.partial_cmp(&b.q).unwrap_or(std::cmp::Ordering::Equal))
    });
    let base_dim = 2 * spec.n() + 2;
    let mut geodesics: Vec<(Candidate, Vec<Vec<Vec<f64>>>)> = Vec::new();
    'outer: for c in found {
        for (g, oriented) in geodesics.iter_mut() {
            let ratio = c.period / g.period;
            let k = ratio.round();
            if k < 1.0 || (c.period - k * g.period).abs() > 0.5e-6 * k {
                continue;
            }
            if hausdorff(&wrap, &c.orbit, &g.orbit, base_dim) > 1e-4 {
                continue;
            }
            if k == 1.0
                && oriented
                    .iter()
                    .all(|o| hausdorff(&wrap, &c.orbit, o, dim) > 1e-4)
            {
                oriented.push(c.orbit.clone());
            }
            continue 'outer;
        }
        let orbit = c.orbit.clone();
        geodesics.push((c, vec![orbit]));
    }
    let n = spec.n();
    let geodesics = geodesics
        .into_iter()
        .map(|(c, oriented)| {
            let g = spec.dual_metric_g(
                &PhasePoint::from_state(n, &c.q)?.base,
                &PhasePoint::from_state(n, &c.q)?.fiber,
            )?;
            Ok(ClosedGeodesic {
                length: 2.0 * c.period * g.sqrt(),
                flow_period: c.period,
                q0: PhasePoint::from_state(n, &c.q)?,
                residual: c.residual,
                multiplicity_hint: oriented.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClosedSearch {
        geodesics,
        rho_range: range,
        eps0,
        seeds: starts.len(),
        discarded,
        fingerprint: spec.fingerprint(),
    })
}

/// `|Φ_T(q0) − q0|` (max norm, periodic base coordinates wrapped) for a reported orbit.
pub fn return_mismatch(
    spec: &MetricSpec,
    g: &ClosedGeodesic,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let wrap = Wrap::new(spec);
    let y = g.q0.to_state();
    let end = flow_state(spec, &y, g.flow_period, cfg)?;
    Ok(norm(&wrap.diff(&end, &y)[..Layout::new(spec.n()).dim()]))
}
