//! Adaptive Gauss-Kronrod quadrature and the periodic trapezoidal rule.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss-Kronrod 7/15 rule on `[a, b]`: `(kronrod, |kronrod − gauss|)`.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
    /// Points per periodic direction for non-product densities.
    pub cross_section_points: usize,
    /// Use an analytic antiderivative when the metric provides one.
    pub closed_form: bool,
}

impl Default for QuadratureParams {
    fn default() -> Self {
        Self {
            rel_tol: 1e-13,
            abs_tol: 0.0,
            max_intervals: 2000,
            cross_section_points: 16,
            closed_form: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive quadrature starting from the given breakpoints.
pub fn integrate_panels<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    p: &QuadratureParams,
) -> Result<QuadResult> {
    if breaks.len() < 2 || p.max_intervals < breaks.len() {
        return Err(Error::invalid(
            "quadrature needs at least one panel within the interval budget",
        ));
    }
    let mut heap = BinaryHeap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        let (v, e) = gk15(f, w[0], w[1]);
        total += v;
        err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    let mut intervals = heap.len();
    loop {
        let target = p.abs_tol.max(p.rel_tol * total.abs());
        if !total.is_finite() {
            return Err(Error::Quadrature {
                achieved: f64::INFINITY,
                requested: target,
            });
        }
        if err <= target {
            break;
        }
        if intervals >= p.max_intervals {
            // accept if the remaining error is at roundoff level
            if err <= 50.0 * f64::EPSILON * total.abs() * (intervals as f64).sqrt() {
                break;
            }
            return Err(Error::Quadrature {
                achieved: err / total.abs().max(1e-300),
                requested: p.rel_tol,
            });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(f, worst.a, mid);
        let (v2, e2) = gk15(f, mid, worst.b);
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        intervals += 1;
    }
    // re-sum to shed accumulated cancellation in the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Ok(QuadResult {
        value,
        error,
        intervals,
    })
}

/// `∫_a^b f` over geometric panels `a, 2a, 4a, …, b`, suited to power-law growth at `a → 0`.
pub fn integrate_geometric<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    p: &QuadratureParams,
) -> Result<QuadResult> {
    if !(a > 0.0 && b > a) {
        return Err(Error::invalid(format!(
            "geometric panels need 0 < a < b, got [{a}, {b}]"
        )));
    }
    let mut breaks = vec![a];
    let mut x = a;
    while 2.0 * x < b {
        x *= 2.0;
        breaks.push(x);
    }
    breaks.push(b);
    integrate_panels(f, &breaks, p)
}

/// Mean of a function over a box torus by the tensor trapezoidal rule.
pub fn periodic_mean<F: Fn(&[f64]) -> f64>(f: &F, periods: &[f64], points: usize) -> f64 {
    let d = periods.len();
    let total = points.pow(d as u32);
    let mut x = vec![0.0; d];
    let mut sum = 0.0;
    for idx in 0..total {
        let mut r = idx;
        for k in 0..d {
            x[k] = periods[k] * ((r % points) as f64 / points as f64 - 0.5);
            r /= points;
        }
        sum += f(&x);
    }
    sum / total as f64
}
