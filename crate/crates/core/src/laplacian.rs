//! The model (normal-operator) Laplacian at a boundary point and its indicial roots.
//!
//! `N(Δ) = −¼(ρ∂_ρ)² + ((n+1)/2) ρ∂_ρ + ρ²Δ_H − ρ⁴Z²` with `Δ_H = −Σ X_k²`
//! built from frozen horizontal fields on the `(w, z)` torus.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `−¼s² + ((n+1)/2)s`.
pub fn indicial_polynomial(n: usize, s: f64) -> f64 {
    -0.25 * s * s + 0.5 * (n as f64 + 1.0) * s
}

/// Roots `(0, 2(n+1))` of [`indicial_polynomial`].
pub fn indicial_roots(n: usize) -> (f64, f64) {
    (0.0, 2.0 * (n as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShiftConstant {
    /// `(n+1)²/4`, the midpoint of the indicial roots.
    #[default]
    QuarterNPlusOneSquared,
    /// `n²/4`.
    QuarterNSquared,
}

impl ShiftConstant {
    pub fn value(self, n: usize) -> f64 {
        match self {
            ShiftConstant::QuarterNPlusOneSquared => 0.25 * (n as f64 + 1.0).powi(2),
            ShiftConstant::QuarterNSquared => 0.25 * (n as f64).powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelLaplacian {
    pub n: usize,
    /// Horizontal fields `X_1, …, X_2n` as components on `(∂w_1, …, ∂w_2n, ∂z)`.
    pub frame: Vec<Vec<f64>>,
    /// The vertical field `Z`.
    pub vertical: Vec<f64>,
    pub shift: ShiftConstant,
}

impl ModelLaplacian {
    /// Left-invariant frame `X_j = ∂x_j − y_j ∂z`, `Y_j = ∂y_j + x_j ∂z`, `Z = ∂z`
    /// frozen at `p̂ = (x, y)`.
    pub fn heisenberg(n: usize, p_hat: &[f64]) -> Result<Self> {
        if p_hat.len() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: p_hat.len(),
            });
        }
        let mut frame = Vec::with_capacity(2 * n);
        for j in 0..n {
            let mut x = vec![0.0; 2 * n + 1];
            x[j] = 1.0;
            x[2 * n] = -p_hat[n + j];
            frame.push(x);
        }
        for j in 0..n {
            let mut y = vec![0.0; 2 * n + 1];
            y[n + j] = 1.0;
            y[2 * n] = p_hat[j];
            frame.push(y);
        }
        let mut vertical = vec![0.0; 2 * n + 1];
        vertical[2 * n] = 1.0;
        Ok(Self {
            n,
            frame,
            vertical,
            shift: ShiftConstant::default(),
        })
    }

    pub fn with_shift(mut self, shift: ShiftConstant) -> Self {
        self.shift = shift;
        self
    }

    pub fn shift_value(&self) -> f64 {
        self.shift.value(self.n)
    }

    /// `Σ_k X_k X_kᵀ`, so that `Δ_H = −Σ_ab A_ab ∂_a∂_b`.
    pub fn horizontal_coefficients(&self) -> DMatrix<f64> {
        let m = 2 * self.n + 1;
        DMatrix::from_fn(m, m, |a, b| self.frame.iter().map(|x| x[a] * x[b]).sum())
    }

    fn vertical_coefficients(&self) -> DMatrix<f64> {
        let m = 2 * self.n + 1;
        DMatrix::from_fn(m, m, |a, b| self.vertical[a] * self.vertical[b])
    }
}

/// Log-uniform radial grid `ρ_i = exp(log_start + i·log_step)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoGrid {
    pub log_start: f64,
    pub log_step: f64,
    pub count: usize,
}

impl RhoGrid {
    pub fn rho(&self, i: usize) -> f64 {
        (self.log_start + i as f64 * self.log_step).exp()
    }
}

/// Values on `RhoGrid × torus`, radial index slowest and `w_1` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub n: usize,
    pub rho: RhoGrid,
    pub periods: Vec<f64>,
    pub points: Vec<usize>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn sample<F: Fn(f64, &[f64]) -> f64>(
        n: usize,
        rho: RhoGrid,
        periods: Vec<f64>,
        points: Vec<usize>,
        f: F,
    ) -> Result<Self> {
        let m = 2 * n + 1;
        if periods.len() != m || points.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: periods.len().min(points.len()),
            });
        }
        if rho.count == 0
            || points.contains(&0)
            || !(rho.log_step > 0.0)
            || periods.iter().any(|p| !(*p > 0.0))
        {
            return Err(Error::invalid("grid sizes and spacings must be positive"));
        }
        let cross: usize = points.iter().product();
        let mut values = Vec::with_capacity(rho.count * cross);
        let mut x = vec![0.0; m];
        for i in 0..rho.count {
            let r = rho.rho(i);
            for c in 0..cross {
                let mut rem = c;
                for d in 0..m {
                    x[d] = periods[d] * (rem % points[d]) as f64 / points[d] as f64;
                    rem /= points[d];
                }
                values.push(f(r, &x));
            }
        }
        Ok(Self {
            n,
            rho,
            periods,
            points,
            values,
        })
    }

    pub fn cross_size(&self) -> usize {
        self.points.iter().product()
    }

    pub fn at(&self, i_rho: usize, c: usize) -> f64 {
        self.values[i_rho * self.cross_size() + c]
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }
}

/// Neighbor of cross-section index `c` shifted by `delta` along direction `d`, periodically.
fn shifted(points: &[usize], c: usize, d: usize, delta: isize) -> usize {
    let stride: usize = points[..d].iter().product();
    let k = (c / stride) % points[d];
    let nk = (k as isize + delta).rem_euclid(points[d] as isize) as usize;
    c - k * stride + nk * stride
}

/// `Σ_ab C_ab ∂_a∂_b u` at cross index `c` using compact/centered second differences.
fn second_order_term(coef: &DMatrix<f64>, points: &[usize], h: &[f64], u: &[f64], c: usize) -> f64 {
    let m = points.len();
    let mut acc = 0.0;
    for a in 0..m {
        for b in a..m {
            let cab = coef[(a, b)];
            if cab == 0.0 {
                continue;
            }
            if a == b {
                let d2 = (u[shifted(points, c, a, 1)] - 2.0 * u[c] + u[shifted(points, c, a, -1)])
                    / (h[a] * h[a]);
                acc += cab * d2;
            } else {
                let pp = u[shifted(points, shifted(points, c, a, 1), b, 1)];
                let pm = u[shifted(points, shifted(points, c, a, 1), b, -1)];
                let mp = u[shifted(points, shifted(points, c, a, -1), b, 1)];
                let mm = u[shifted(points, shifted(points, c, a, -1), b, -1)];
                acc += 2.0 * cab * (pp - pm - mp + mm) / (4.0 * h[a] * h[b]);
            }
        }
    }
    acc
}

fn check_grid(l: &ModelLaplacian, f: &GridFunction) -> Result<()> {
    if f.n != l.n || f.points.len() != 2 * l.n + 1 || f.values.len() != f.rho.count * f.cross_size()
    {
        return Err(Error::invalid(
            "grid function does not match the operator dimension",
        ));
    }
    if f.rho.count < 5 || f.points.iter().any(|p| *p < 5) {
        return Err(Error::invalid(
            "stencil needs at least 5 grid points in every direction",
        ));
    }
    Ok(())
}

/// Finite-difference `N(Δ) f`.
pub fn apply_model_laplacian(l: &ModelLaplacian, f: &GridFunction) -> Result<GridFunction> {
    check_grid(l, f)?;
    let cross = f.cross_size();
    let nr = f.rho.count;
    let hx = f.rho.log_step;
    let h: Vec<f64> = f
        .periods
        .iter()
        .zip(&f.points)
        .map(|(p, k)| p / *k as f64)
        .collect();
    let horiz = l.horizontal_coefficients();
    let vert = l.vertical_coefficients();
    let half = 0.5 * (l.n as f64 + 1.0);
    let mut out = vec![0.0; f.values.len()];
    for i in 0..nr {
        let rho = f.rho.rho(i);
        let slice = &f.values[i * cross..(i + 1) * cross];
        for c in 0..cross {
            let v = |k: usize| f.values[k * cross + c];
            let (d1, d2) = if i == 0 {
                (
                    (-3.0 * v(0) + 4.0 * v(1) - v(2)) / (2.0 * hx),
                    (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) / (hx * hx),
                )
            } else if i == nr - 1 {
                let k = nr - 1;
                (
                    (3.0 * v(k) - 4.0 * v(k - 1) + v(k - 2)) / (2.0 * hx),
                    (2.0 * v(k) - 5.0 * v(k - 1) + 4.0 * v(k - 2) - v(k - 3)) / (hx * hx),
                )
            } else {
                (
                    (v(i + 1) - v(i - 1)) / (2.0 * hx),
                    (v(i + 1) - 2.0 * v(i) + v(i - 1)) / (hx * hx),
                )
            };
            let delta_h = -second_order_term(&horiz, &f.points, &h, slice, c);
            let z2 = second_order_term(&vert, &f.points, &h, slice, c);
            out[i * cross + c] = -0.25 * d2 + half * d1 + rho * rho * delta_h - rho.powi(4) * z2;
        }
    }
    Ok(f.with_values(out))
}

/// `(N(Δ) − c) f` with `c` the operator's shift constant.
pub fn apply_shifted(l: &ModelLaplacian, f: &GridFunction) -> Result<GridFunction> {
    let mut g = apply_model_laplacian(l, f)?;
    let c = l.shift_value();
    for (gv, fv) in g.values.iter_mut().zip(&f.values) {
        *gv -= c * fv;
    }
    Ok(g)
}

/// Matrix of the discrete `Δ_H` on the cross-section torus.
pub fn horizontal_matrix(
    l: &ModelLaplacian,
    periods: &[f64],
    points: &[usize],
) -> Result<DMatrix<f64>> {
    if periods.len() != 2 * l.n + 1 || points.len() != 2 * l.n + 1 || points.iter().any(|p| *p < 5)
    {
        return Err(Error::invalid(
            "cross-section grid needs 2n+1 directions with at least 5 points",
        ));
    }
    let h: Vec<f64> = periods
        .iter()
        .zip(points)
        .map(|(p, k)| p / *k as f64)
        .collect();
    let coef = l.horizontal_coefficients();
    let size: usize = points.iter().product();
    let mut mat = DMatrix::zeros(size, size);
    let mut e = vec![0.0; size];
    for j in 0..size {
        e[j] = 1.0;
        for i in 0..size {
            mat[(i, j)] = -second_order_term(&coef, points, &h, &e, i);
        }
        e[j] = 0.0;
    }
    Ok(mat)
}

/// Largest relative deviation `|N(Δ)ρ^s − P(s)ρ^s| / ρ^s` over interior radii, for
/// `f = ρ^s` constant on a minimal torus grid; `P` is the indicial polynomial.
pub fn radial_consistency_error(
    n: usize,
    s: f64,
    log_range: (f64, f64),
    intervals: usize,
) -> Result<f64> {
    let l = ModelLaplacian::heisenberg(n, &vec![0.0; 2 * n])?;
    let rho = RhoGrid {
        log_start: log_range.0,
        log_step: (log_range.1 - log_range.0) / intervals as f64,
        count: intervals + 1,
    };
    let f = GridFunction::sample(n, rho, vec![1.0; 2 * n + 1], vec![5; 2 * n + 1], |r, _| {
        r.powf(s)
    })?;
    let g = apply_model_laplacian(&l, &f)?;
    let p = indicial_polynomial(n, s);
    let mut worst = 0.0f64;
    for i in 1..rho.count - 1 {
        let r = rho.rho(i);
        worst = worst.max((g.at(i, 0) - p * r.powf(s)).abs() / r.powf(s));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_values() {
        assert_eq!(indicial_polynomial(3, 0.0), 0.0);
        assert_eq!(indicial_polynomial(1, 1.0), 0.75);
        for n in 0..6 {
            let (a, b) = indicial_roots(n);
            assert_eq!(indicial_polynomial(n, a), 0.0);
            assert_eq!(indicial_polynomial(n, b), 0.0);
        }
        assert_eq!(indicial_roots(0), (0.0, 2.0));
        assert_eq!(indicial_roots(1), (0.0, 4.0));
    }

    #[test]
    fn shift_bookkeeping() {
        for n in 0..4 {
            let m = n as f64 + 1.0;
            for shift in [
                ShiftConstant::QuarterNPlusOneSquared,
                ShiftConstant::QuarterNSquared,
            ] {
                let c = shift.value(n);
                assert_eq!(
                    indicial_polynomial(n, m) - c,
                    -0.25 * m * m + 0.5 * m * m - c
                );
            }
            assert_eq!(
                indicial_polynomial(n, m) - ShiftConstant::QuarterNPlusOneSquared.value(n),
                0.0
            );
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let l = ModelLaplacian::heisenberg(1, &[0.3, -0.7]).unwrap();
        let rho = RhoGrid {
            log_start: -2.0,
            log_step: 0.1,
            count: 8,
        };
        let f = GridFunction::sample(1, rho, vec![2.0 * PI; 3], vec![5, 6, 7], |_, _| 1.0).unwrap();
        let g = apply_model_laplacian(&l, &f).unwrap();
        assert!(g.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn coarse_grid_rejected() {
        let l = ModelLaplacian::heisenberg(0, &[]).unwrap();
        let rho = RhoGrid {
            log_start: -2.0,
            log_step: 0.1,
            count: 8,
        };
        let f = GridFunction::sample(0, rho, vec![1.0], vec![4], |_, _| 1.0).unwrap();
        assert!(apply_model_laplacian(&l, &f).is_err());
    }

    #[test]
    fn vertical_mode() {
        for n in [0usize, 1] {
            let l = ModelLaplacian::heisenberg(n, &vec![0.0; 2 * n]).unwrap();
            let m = 2.0;
            let pts = 64;
            let rho = RhoGrid {
                log_start: -1.0,
                log_step: 0.01,
                count: 201,
            };
            let mut points = vec![5; 2 * n + 1];
            points[2 * n] = pts;
            let f =
                GridFunction::sample(n, rho, vec![2.0 * PI; 2 * n + 1], points.clone(), |r, x| {
                    r * (m * x[2 * n]).cos()
                })
                .unwrap();
            let g = apply_model_laplacian(&l, &f).unwrap();
            let cross: usize = points.iter().product();
            let hz = 2.0 * PI / pts as f64;
            for i in 1..rho.count - 1 {
                let r = rho.rho(i);
                for c in 0..cross {
                    let z =
                        2.0 * PI * ((c / points[..2 * n].iter().product::<usize>()) % pts) as f64
                            / pts as f64;
                    let exact =
                        (indicial_polynomial(n, 1.0) * r + m * m * r.powi(5)) * (m * z).cos();
                    let tol = 1.05 * m.powi(4) * hz * hz / 12.0 * r.powi(5) + 1e-4 * r;
                    assert!((g.at(i, c) - exact).abs() <= tol, "n={n}");
                }
            }
        }
    }

    #[test]
    fn horizontal_block_symmetric_and_positive() {
        let l = ModelLaplacian::heisenberg(1, &[0.4, -0.2]).unwrap();
        let a = l.horizontal_coefficients();
        let w = a.view((0, 0), (2, 2)).into_owned();
        assert!(w.clone().cholesky().is_some());
        let m = horizontal_matrix(&l, &[2.0 * PI; 3], &[5, 5, 5]).unwrap();
        assert!((&m - m.transpose()).amax() < 1e-12);
    }

    #[test]
    fn second_order_in_log_spacing() {
        for s in [1.0, 3.0] {
            let e1 = radial_consistency_error(1, s, (-2.0, 0.0), 40).unwrap();
            let e2 = radial_consistency_error(1, s, (-2.0, 0.0), 80).unwrap();
            let order = (e1 / e2).log2();
            assert!((order - 2.0).abs() < 0.2, "s={s} order={order}");
        }
    }
}
