//! Explicit and symplectic one-step integrators with adaptive step control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Autonomous right-hand side `y' = f(y)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dormand-Prince 5(4) with embedded error estimate.
    #[default]
    AdaptiveRk,
    /// Implicit midpoint rule, error estimated by step doubling.
    ImplicitMidpoint,
}

impl Method {
    pub fn order(self) -> u32 {
        match self {
            Method::AdaptiveRk => 5,
            Method::ImplicitMidpoint => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub min_step: f64,
    pub max_step: f64,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo(y: &[f64], h: f64, terms: &[(f64, &[f64])], out: &mut [f64]) {
    for i in 0..y.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = y[i] + h * acc;
    }
}

/// One Dormand-Prince step. `k1 = f(y)`; returns `(y_new, error, f(y_new))`.
pub fn dopri_step<F: VectorField + ?Sized>(
    f: &F,
    y: &[f64],
    k1: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = y.len();
    let mut tmp = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    combo(y, h, &[(A21, k1)], &mut tmp);
    f.eval(&tmp, &mut k2)?;
    combo(y, h, &[(A31, k1), (A32, &k2)], &mut tmp);
    f.eval(&tmp, &mut k3)?;
    combo(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)], &mut tmp);
    f.eval(&tmp, &mut k4)?;
    combo(
        y,
        h,
        &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)],
        &mut tmp,
    );
    f.eval(&tmp, &mut k5)?;
    combo(
        y,
        h,
        &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        &mut tmp,
    );
    f.eval(&tmp, &mut k6)?;
    let mut y_new = vec![0.0; n];
    combo(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        &mut y_new,
    );
    f.eval(&y_new, &mut k7)?;
    let err = (0..n)
        .map(|i| h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]))
        .collect();
    Ok((y_new, err, k7))
}

/// One implicit midpoint step `Y = y + h f((y + Y)/2)`, solved by fixed-point iteration.
pub fn midpoint_step<F: VectorField + ?Sized>(
    f: &F,
    y: &[f64],
    k1: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    let n = y.len();
    let mut next: Vec<f64> = (0..n).map(|i| y[i] + h * k1[i]).collect();
    let mut mid = vec![0.0; n];
    let mut k = vec![0.0; n];
    for _ in 0..100 {
        for i in 0..n {
            mid[i] = 0.5 * (y[i] + next[i]);
        }
        f.eval(&mid, &mut k)?;
        let mut change = 0.0f64;
        for i in 0..n {
            let v = y[i] + h * k[i];
            let scale = 1.0 + v.abs().max(y[i].abs());
            change = change.max((v - next[i]).abs() / scale);
            next[i] = v;
        }
        if !change.is_finite() {
            break;
        }
        if change <= 4.0 * f64::EPSILON {
            return Ok(next);
        }
    }
    Err(Error::StepFailure {
        s: f64::NAN,
        min_step: h.abs(),
    })
}

/// Integrate with a fixed step, returning the final state.
pub fn integrate_fixed<F: VectorField + ?Sized>(
    f: &F,
    y0: &[f64],
    h: f64,
    steps: usize,
    method: Method,
) -> Result<Vec<f64>> {
    let mut y = y0.to_vec();
    let mut k = vec![0.0; y.len()];
    f.eval(&y, &mut k)?;
    for _ in 0..steps {
        match method {
            Method::AdaptiveRk => {
                let (yn, _, kn) = dopri_step(f, &y, &k, h)?;
                y = yn;
                k = kn;
            }
            Method::ImplicitMidpoint => {
                y = midpoint_step(f, &y, &k, h)?;
                f.eval(&y, &mut k)?;
            }
        }
    }
    Ok(y)
}

/// Summary of an adaptive run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRun {
    pub s: f64,
    pub y: Vec<f64>,
    pub accepted: usize,
    pub rejected: usize,
    /// `true` when the callback asked to stop before `s_end`.
    pub halted: bool,
}

/// Adaptive integration from `s = 0` to `s_end` (either sign).
///
/// `weights(y, w)` fills per-component error weights. After every accepted step
/// `on_step(s, y, f(y))` is called; returning `false` halts the run.
pub fn integrate_adaptive<F, W, C>(
    f: &F,
    y0: &[f64],
    s_end: f64,
    method: Method,
    ctl: StepControl,
    weights: W,
    mut on_step: C,
) -> Result<AdaptiveRun>
where
    F: VectorField + ?Sized,
    W: Fn(&[f64], &mut [f64]),
    C: FnMut(f64, &[f64], &[f64]) -> bool,
{
    let n = y0.len();
    if n != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            got: n,
        });
    }
    if !(ctl.rel_tol > 0.0
        && ctl.abs_tol >= 0.0
        && ctl.min_step > 0.0
        && ctl.max_step >= ctl.min_step)
    {
        return Err(Error::invalid("inconsistent step control parameters"));
    }
    let dir = if s_end >= 0.0 { 1.0 } else { -1.0 };
    let total = s_end.abs();
    let mut s = 0.0f64;
    let mut y = y0.to_vec();
    let mut k = vec![0.0; n];
    f.eval(&y, &mut k)?;
    let mut wy = vec![0.0; n];
    let mut wn = vec![0.0; n];
    let mut h = ctl.max_step.min(0.01).max(ctl.min_step);
    let (mut accepted, mut rejected) = (0, 0);
    let order = method.order() as f64;
    while s < total {
        let last = total - s <= h * (1.0 + 1e-12);
        let step = if last { total - s } else { h };
        let attempt = match method {
            Method::AdaptiveRk => {
                dopri_step(f, &y, &k, dir * step).map(|(yn, e, kn)| (yn, e, Some(kn)))
            }
            Method::ImplicitMidpoint => (|| {
                let one = midpoint_step(f, &y, &k, dir * step)?;
                let half = midpoint_step(f, &y, &k, 0.5 * dir * step)?;
                let mut kh = vec![0.0; n];
                f.eval(&half, &mut kh)?;
                let two = midpoint_step(f, &half, &kh, 0.5 * dir * step)?;
                let e = two.iter().zip(&one).map(|(a, b)| (a - b) / 3.0).collect();
                Ok((two, e, None))
            })(),
        };
        let err_norm = match &attempt {
            Ok((yn, e, _)) => {
                weights(&y, &mut wy);
                weights(yn, &mut wn);
                let mut m = 0.0f64;
                for i in 0..n {
                    let w = wy[i].max(wn[i]);
                    let scale =
                        ctl.abs_tol + ctl.rel_tol * (y[i].abs() * wy[i]).max(yn[i].abs() * wn[i]);
                    let r = (e[i] * w).abs() / scale;
                    m = m.max(if r.is_nan() { f64::INFINITY } else { r });
                }
                m
            }
            Err(Error::StepFailure { .. }) | Err(Error::Singular { .. }) => f64::INFINITY,
            Err(e) => return Err(e.clone()),
        };
        if err_norm <= 1.0 {
            let (yn, _, kn) = attempt.expect("checked");
            s = if last { total } else { s + step };
            y = yn;
            match kn {
                Some(kn) => k = kn,
                None => f.eval(&y, &mut k)?,
            }
            accepted += 1;
            let grow = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-1.0 / (order + 1.0))).clamp(0.2, 5.0)
            };
            if !last || grow < 1.0 {
                h = (step * grow).clamp(ctl.min_step, ctl.max_step);
            }
            if !on_step(dir * s, &y, &k) {
                return Ok(AdaptiveRun {
                    s: dir * s,
                    y,
                    accepted,
                    rejected,
                    halted: true,
                });
            }
        } else {
            rejected += 1;
            if step <= ctl.min_step * (1.0 + 1e-12) {
                return Err(Error::StepFailure {
                    s: dir * s,
                    min_step: ctl.min_step,
                });
            }
            let shrink = if err_norm.is_finite() {
                (0.9 * err_norm.powf(-1.0 / (order + 1.0))).clamp(0.1, 0.9)
            } else {
                0.25
            };
            h = (step * shrink).max(ctl.min_step);
        }
    }
    Ok(AdaptiveRun {
        s: dir * s,
        y,
        accepted,
        rejected,
        halted: false,
    })
}

/// Cubic Hermite interpolation between `(y0, f0)` at `s0` and `(y1, f1)` at `s1`.
pub fn hermite(
    s0: f64,
    y0: &[f64],
    f0: &[f64],
    s1: f64,
    y1: &[f64],
    f1: &[f64],
    s: f64,
) -> Vec<f64> {
    let h = s1 - s0;
    let th = (s - s0) / h;
    let h00 = (1.0 + 2.0 * th) * (1.0 - th) * (1.0 - th);
    let h10 = th * (1.0 - th) * (1.0 - th);
    let h01 = th * th * (3.0 - 2.0 * th);
    let h11 = th * th * (th - 1.0);
    (0..y0.len())
        .map(|i| h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] + h11 * h * f1[i])
        .collect()
}
