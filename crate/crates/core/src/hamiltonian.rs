//! The Θ-symplectic form on the rescaled cotangent bundle and Hamilton vector fields.
//!
//! Phase points are stored as flat state vectors in the order
//! `(ρ, w_1..w_2n, z, μ, u_1..u_2n, t)`; [`PhasePoint`] is the structured view.
//! The form is
//!
//! ```text
//! Θω = (1/ρ) dμ∧dρ + (1/ρ) du∧dw + (1/ρ²)(dt∧dz − dρ∧(u·dw)) − (2/ρ³) dρ∧(t dz)
//! ```
//!
//! and the Hamilton field `H` of `p` is defined by `Θω(·, H) = dp`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{BasePoint, DualMetricJet, MetricSpec, ThetaCovector};
use crate::ode::VectorField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub base: BasePoint,
    pub fiber: ThetaCovector,
}

/// Offsets of the coordinate blocks inside a flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
}

impl Layout {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
    pub fn dim(self) -> usize {
        4 * self.n + 4
    }
    pub fn rho(self) -> usize {
        0
    }
    pub fn w(self, j: usize) -> usize {
        1 + j
    }
    pub fn z(self) -> usize {
        2 * self.n + 1
    }
    pub fn mu(self) -> usize {
        2 * self.n + 2
    }
    pub fn u(self, j: usize) -> usize {
        2 * self.n + 3 + j
    }
    pub fn t(self) -> usize {
        4 * self.n + 3
    }
}

impl PhasePoint {
    pub fn new(base: BasePoint, fiber: ThetaCovector) -> Self {
        Self { base, fiber }
    }

    pub fn n(&self) -> usize {
        self.base.w.len() / 2
    }

    pub fn to_state(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.n() + 4);
        v.push(self.base.rho);
        v.extend_from_slice(&self.base.w);
        v.push(self.base.z);
        v.push(self.fiber.mu);
        v.extend_from_slice(&self.fiber.u);
        v.push(self.fiber.t);
        v
    }

    pub fn from_state(n: usize, y: &[f64]) -> Result<Self> {
        let l = Layout::new(n);
        if y.len() != l.dim() {
            return Err(Error::DimensionMismatch {
                expected: l.dim(),
                got: y.len(),
            });
        }
        Ok(Self {
            base: BasePoint {
                rho: y[0],
                w: y[1..l.z()].to_vec(),
                z: y[l.z()],
            },
            fiber: ThetaCovector {
                mu: y[l.mu()],
                u: y[l.u(0)..l.t()].to_vec(),
                t: y[l.t()],
            },
        })
    }

    pub(crate) fn check(&self, spec: &MetricSpec) -> Result<()> {
        spec.check_base(&self.base)?;
        spec.check_fiber(&self.fiber)
    }
}

/// A tangent vector to phase space in the same coordinates as [`PhasePoint`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTangent {
    pub d_rho: f64,
    pub d_w: Vec<f64>,
    pub d_z: f64,
    pub d_mu: f64,
    pub d_u: Vec<f64>,
    pub d_t: f64,
}

impl PhaseTangent {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.d_rho];
        v.extend_from_slice(&self.d_w);
        v.push(self.d_z);
        v.push(self.d_mu);
        v.extend_from_slice(&self.d_u);
        v.push(self.d_t);
        v
    }

    pub fn from_vec(n: usize, v: &[f64]) -> Self {
        let l = Layout::new(n);
        Self {
            d_rho: v[0],
            d_w: v[1..l.z()].to_vec(),
            d_z: v[l.z()],
            d_mu: v[l.mu()],
            d_u: v[l.u(0)..l.t()].to_vec(),
            d_t: v[l.t()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn jet_vector(jet: &DualMetricJet) -> Vec<f64> {
    let mut v = vec![jet.d_rho];
    v.extend_from_slice(&jet.d_w);
    v.push(jet.d_z);
    v.push(jet.d_mu);
    v.extend_from_slice(&jet.d_u);
    v.push(jet.d_t);
    v
}

/// `dG` at `q` as a coordinate covector on phase space.
pub fn dual_metric_differential(spec: &MetricSpec, q: &PhasePoint) -> Vec<f64> {
    jet_vector(&spec.jet(&q.base, &q.fiber))
}

/// Coordinate matrix `M_ab = Θω(e_a, e_b)` in the basis `(ρ, w, z, μ, u, t)`.
pub fn symplectic_matrix(q: &PhasePoint) -> Result<DMatrix<f64>> {
    let rho = q.base.rho;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Singular { rho });
    }
    let n = q.n();
    let l = Layout::new(n);
    let mut m = DMatrix::zeros(l.dim(), l.dim());
    let mut wedge = |a: usize, b: usize, c: f64| {
        m[(a, b)] += c;
        m[(b, a)] -= c;
    };
    let (r1, r2, r3) = (1.0 / rho, 1.0 / (rho * rho), 1.0 / (rho * rho * rho));
    wedge(l.mu(), l.rho(), r1);
    for j in 0..2 * n {
        wedge(l.u(j), l.w(j), r1);
        wedge(l.rho(), l.w(j), -q.fiber.u[j] * r2);
    }
    wedge(l.t(), l.z(), r2);
    wedge(l.rho(), l.z(), -2.0 * q.fiber.t * r3);
    Ok(m)
}

/// Θ-frame scaling `diag(ρ, ρ, …, ρ², 1, …, 1)`.
fn frame_scale(n: usize, rho: f64) -> Vec<f64> {
    let l = Layout::new(n);
    (0..l.dim())
        .map(|i| {
            if i == l.z() {
                rho * rho
            } else if i < l.mu() {
                rho
            } else {
                1.0
            }
        })
        .collect()
}

/// Solve `M H = dG` for the Hamilton field of an arbitrary differential `dp` at `q`.
///
/// The system is solved in the Θ-frame `(ρ∂ρ, ρ∂w, ρ²∂z, ∂μ, ∂u, ∂t)`, where the
/// form has ρ-independent entries, and mapped back to coordinates.
pub fn hamilton_field_of(q: &PhasePoint, dp: &[f64]) -> Result<Vec<f64>> {
    let m = symplectic_matrix(q)?;
    let n = q.n();
    let d = frame_scale(n, q.base.rho);
    let dim = d.len();
    if dp.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: dp.len(),
        });
    }
    let scaled = DMatrix::from_fn(dim, dim, |i, j| d[i] * m[(i, j)] * d[j]);
    let rhs = DVector::from_fn(dim, |i, _| d[i] * dp[i]);
    let h = scaled
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular { rho: q.base.rho })?;
    Ok((0..dim).map(|i| d[i] * h[i]).collect())
}

/// The Θ-Hamilton vector field of the dual metric `G`.
pub fn hamilton_field(spec: &MetricSpec, q: &PhasePoint) -> Result<PhaseTangent> {
    q.check(spec)?;
    let dg = dual_metric_differential(spec, q);
    Ok(PhaseTangent::from_vec(q.n(), &hamilton_field_of(q, &dg)?))
}

/// Which closed-form expression to use in [`display_field`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisplayVariant {
    /// `∂μ` coefficient `−(ρ ∂_ρ p + u·∂_u p + 2t ∂_t p)`.
    Corrected,
    /// `∂μ` coefficient `−(ρ ∂_ρ p + w·∂_w p + 2t ∂_t p)`.
    AsPrinted,
}

/// Closed-form Hamilton field of `G`, used as an independent cross-check of
/// [`hamilton_field`].
pub fn display_field(
    spec: &MetricSpec,
    q: &PhasePoint,
    variant: DisplayVariant,
) -> Result<PhaseTangent> {
    q.check(spec)?;
    let rho = q.base.rho;
    if !(rho > 0.0) {
        return Err(Error::Singular { rho });
    }
    let jet = spec.jet(&q.base, &q.fiber);
    let u = &q.fiber.u;
    let t = q.fiber.t;
    let euler: f64 = match variant {
        DisplayVariant::Corrected => u.iter().zip(&jet.d_u).map(|(a, b)| a * b).sum(),
        DisplayVariant::AsPrinted => q.base.w.iter().zip(&jet.d_w).map(|(a, b)| a * b).sum(),
    };
    Ok(PhaseTangent {
        d_rho: rho * jet.d_mu,
        d_w: jet.d_u.iter().map(|g| rho * g).collect(),
        d_z: rho * rho * jet.d_t,
        d_mu: -(rho * jet.d_rho + euler + 2.0 * t * jet.d_t),
        d_u: jet
            .d_w
            .iter()
            .zip(u)
            .map(|(gw, uj)| -(rho * gw - uj * jet.d_mu))
            .collect(),
        d_t: -(rho * rho * jet.d_z - 2.0 * t * jet.d_mu),
    })
}

/// `Θω(a, b)` for two tangent vectors.
pub fn symplectic_pairing(q: &PhasePoint, a: &[f64], b: &[f64]) -> Result<f64> {
    let m = symplectic_matrix(q)?;
    let va = DVector::from_column_slice(a);
    let vb = DVector::from_column_slice(b);
    Ok(va.dot(&(&m * vb)))
}

/// The Θ-Hamilton field of `G` as an ODE right-hand side on flat state vectors.
#[derive(Debug, Clone, Copy)]
pub struct ThetaHamiltonField<'a> {
    pub spec: &'a MetricSpec,
}

impl VectorField for ThetaHamiltonField<'_> {
    fn dim(&self) -> usize {
        self.spec.phase_dim()
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let q = PhasePoint::from_state(self.spec.n(), y)?;
        let dg = dual_metric_differential(self.spec, &q);
        let h = hamilton_field_of(&q, &dg)?;
        dy.copy_from_slice(&h);
        Ok(())
    }
}

/// A point of `T*F` over the front face, anchored at a boundary point `(w, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontFacePhasePoint {
    pub v: f64,
    pub big_w: Vec<f64>,
    pub big_z: f64,
    pub a_f: f64,
    pub b_f: Vec<f64>,
    pub c_f: f64,
}

impl FrontFacePhasePoint {
    /// Projective front-face coordinates of a right point `q'` relative to a left base point:
    /// `V = ρ'/ρ`, `W = (w' − w)/ρ`, `Z = (z' − z)/ρ²`, `a = μ'/V`, `b = u'/V`, `c = t'/V²`.
    pub fn from_interior(left: &BasePoint, right: &PhasePoint) -> Self {
        let rho = left.rho;
        let v = right.base.rho / rho;
        Self {
            v,
            big_w: right
                .base
                .w
                .iter()
                .zip(&left.w)
                .map(|(a, b)| (a - b) / rho)
                .collect(),
            big_z: (right.base.z - left.z) / (rho * rho),
            a_f: right.fiber.mu / v,
            b_f: right.fiber.u.iter().map(|u| u / v).collect(),
            c_f: right.fiber.t / (v * v),
        }
    }

    pub fn to_state(&self) -> Vec<f64> {
        let mut s = vec![self.v];
        s.extend_from_slice(&self.big_w);
        s.push(self.big_z);
        s.push(self.a_f);
        s.extend_from_slice(&self.b_f);
        s.push(self.c_f);
        s
    }

    pub fn from_state(n: usize, y: &[f64]) -> Self {
        let l = Layout::new(n);
        Self {
            v: y[0],
            big_w: y[1..l.z()].to_vec(),
            big_z: y[l.z()],
            a_f: y[l.mu()],
            b_f: y[l.u(0)..l.t()].to_vec(),
            c_f: y[l.t()],
        }
    }

    fn fiber(&self) -> ThetaCovector {
        ThetaCovector {
            mu: 0.0,
            u: self.b_f.clone(),
            t: self.c_f,
        }
    }
}

/// `G_Θ = V²(a_f² + h_Θ(w, z, b_f, c_f))`.
pub fn front_face_hamiltonian(
    spec: &MetricSpec,
    boundary: (&[f64], f64),
    f: &FrontFacePhasePoint,
) -> f64 {
    let h = spec.h_theta(boundary.0, boundary.1, &f.fiber());
    f.v * f.v * (f.a_f * f.a_f + h)
}

/// The front-face restriction with the fiber dilated by `V`:
/// `V² a_f² + h_Θ(w, z, V b_f, V² c_f)`. Agrees with [`front_face_hamiltonian`]
/// when `c_f = 0`.
pub fn dilated_front_face_hamiltonian(
    spec: &MetricSpec,
    boundary: (&[f64], f64),
    f: &FrontFacePhasePoint,
) -> f64 {
    let v = f.v;
    let fib = ThetaCovector {
        mu: 0.0,
        u: f.b_f.iter().map(|b| v * b).collect(),
        t: v * v * f.c_f,
    };
    v * v * f.a_f * f.a_f + spec.h_theta(boundary.0, boundary.1, &fib)
}

/// Canonical Hamilton field of a front-face Hamiltonian in `(V, W, Z; a_f, b_f, c_f)`.
#[derive(Debug, Clone)]
pub struct FrontFaceField<'a> {
    pub spec: &'a MetricSpec,
    pub w: Vec<f64>,
    pub z: f64,
    /// Use [`dilated_front_face_hamiltonian`] instead of [`front_face_hamiltonian`].
    pub dilated: bool,
}

impl VectorField for FrontFaceField<'_> {
    fn dim(&self) -> usize {
        self.spec.phase_dim()
    }

    fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let n = self.spec.n();
        let l = Layout::new(n);
        let f = FrontFacePhasePoint::from_state(n, y);
        let a = self.spec.h_theta_form(&self.w, self.z).a;
        let v = f.v;
        // fiber weights: (V, …, V, V²) for the dilated lift, (1, …, 1) otherwise
        let m = 2 * n + 1;
        let fib = f.fiber().fiber_vector();
        let weight = |i: usize| {
            if !self.dilated {
                1.0
            } else if i == m - 1 {
                v * v
            } else {
                v
            }
        };
        let scaled: Vec<f64> = (0..m).map(|i| weight(i) * fib[i]).collect();
        let grad_scaled: Vec<f64> = (0..m)
            .map(|i| 2.0 * (0..m).map(|j| a[(i, j)] * scaled[j]).sum::<f64>())
            .collect();
        let h: f64 = (0..m).map(|i| 0.5 * scaled[i] * grad_scaled[i]).sum();
        let (pref, dpref) = if self.dilated {
            (1.0, 0.0)
        } else {
            (v * v, 2.0 * v)
        };
        // ∂/∂V
        let dh_dv = if self.dilated {
            (0..m)
                .map(|i| {
                    let dw = if i == m - 1 { 2.0 * v } else { 1.0 };
                    grad_scaled[i] * dw * fib[i]
                })
                .sum::<f64>()
        } else {
            0.0
        };
        let d_v = 2.0 * v * f.a_f * f.a_f + dpref * h + pref * dh_dv;
        dy[0] = 2.0 * v * v * f.a_f;
        for i in 0..m {
            let g_b = pref * grad_scaled[i] * weight(i);
            if i == m - 1 {
                dy[l.z()] = g_b;
                dy[l.t()] = 0.0;
            } else {
                dy[l.w(i)] = g_b;
                dy[l.u(i)] = 0.0;
            }
        }
        dy[l.mu()] = -d_v;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{make_builtin, MetricKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use serde_json::json;

    fn model(n: usize) -> MetricSpec {
        MetricSpec::new(MetricKind::Model { n }).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng, n: usize) -> PhasePoint {
        PhasePoint::new(
            BasePoint::new(
                rng.random_range(0.05..2.0),
                (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                rng.random_range(-1.0..1.0),
            ),
            ThetaCovector {
                mu: rng.random_range(-1.0..1.0),
                u: (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect(),
                t: rng.random_range(-1.0..1.0),
            },
        )
    }

    #[test]
    fn unit_pairings_at_rho_one() {
        let q = PhasePoint::new(
            BasePoint::new(1.0, vec![0.0, 0.0], 0.0),
            ThetaCovector::zero(1),
        );
        let m = symplectic_matrix(&q).unwrap();
        let l = Layout::new(1);
        let mut expected = DMatrix::zeros(8, 8);
        for (a, b) in [
            (l.mu(), l.rho()),
            (l.u(0), l.w(0)),
            (l.u(1), l.w(1)),
            (l.t(), l.z()),
        ] {
            expected[(a, b)] = 1.0;
            expected[(b, a)] = -1.0;
        }
        assert_eq!(m, expected);
    }

    #[test]
    fn matrix_antisymmetric_and_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let q = random_point(&mut rng, 1);
            let m = symplectic_matrix(&q).unwrap();
            assert_eq!(&m + m.transpose(), DMatrix::zeros(8, 8));
            assert!(m.determinant().abs() > 0.0);
        }
        let q = PhasePoint::new(BasePoint::new(0.0, vec![], 0.0), ThetaCovector::zero(0));
        assert!(matches!(symplectic_matrix(&q), Err(Error::Singular { .. })));
    }

    #[test]
    fn zero_fiber_gives_zero_field() {
        let s = make_builtin("bergman", &json!({"n": 1})).unwrap();
        let q = PhasePoint::new(
            BasePoint::new(0.3, vec![0.5, -0.2], 1.0),
            ThetaCovector::zero(1),
        );
        assert_eq!(hamilton_field(&s, &q).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn radial_model_field() {
        let q = PhasePoint::new(
            BasePoint::new(1.0, vec![0.0, 0.0], 0.0),
            ThetaCovector {
                mu: 1.0,
                u: vec![0.0, 0.0],
                t: 0.0,
            },
        );
        let h = hamilton_field(&model(1), &q).unwrap();
        assert!((h.d_rho - 2.0).abs() < 1e-15);
        let mut rest = h.clone();
        rest.d_rho = 0.0;
        assert!(rest.max_abs() < 1e-15);
    }

    #[test]
    fn defining_relation_and_energy_invariance() {
        let spec = make_builtin(
            "perturbed",
            &json!({"base": {"kind": "bergman", "n": 1}, "q": [
                {"coeff": 0.4, "rho_power": 1, "fiber": ["u1", "t"], "modulation": {"coord": "w2", "freq": 1.5}}
            ]}),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let q = random_point(&mut rng, 1);
            let h = hamilton_field(&spec, &q).unwrap().to_vec();
            let dg = dual_metric_differential(&spec, &q);
            let tangent: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = symplectic_pairing(&q, &tangent, &h).unwrap();
            let rhs: f64 = tangent.iter().zip(&dg).map(|(a, b)| a * b).sum();
            let scale = dg.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
            assert!((lhs - rhs).abs() / scale <= 1e-10, "{lhs} vs {rhs}");
            let dgh: f64 = h.iter().zip(&dg).map(|(a, b)| a * b).sum();
            assert!(dgh.abs() / scale <= 1e-12);
        }
    }

    #[test]
    fn corrected_display_agrees_and_printed_one_does_not() {
        let spec = model(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let q = random_point(&mut rng, 1);
            let a = hamilton_field(&spec, &q).unwrap().to_vec();
            let b = display_field(&spec, &q, DisplayVariant::Corrected)
                .unwrap()
                .to_vec();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()));
            }
        }
        let q = PhasePoint::new(
            BasePoint::new(0.5, vec![0.0, 0.0], 0.0),
            ThetaCovector {
                mu: 0.0,
                u: vec![1.0, 0.0],
                t: 0.0,
            },
        );
        let a = hamilton_field(&spec, &q).unwrap();
        let b = display_field(&spec, &q, DisplayVariant::AsPrinted).unwrap();
        assert!((a.d_mu - b.d_mu).abs() > 1.0);
    }

    #[test]
    fn base_components_vanish_at_boundary() {
        let spec = make_builtin("perturbed", &json!({"base": {"kind": "model", "n": 1}, "q": [{"coeff": 1.0, "fiber": ["u1", "u1"]}]}))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for rho in [1e-2, 1e-3, 1e-4] {
            for _ in 0..50 {
                let mut q = random_point(&mut rng, 1);
                q.base.rho = rho;
                let g = spec.dual_metric_g(&q.base, &q.fiber).unwrap().sqrt();
                q.fiber = q.fiber.scaled(1.0 / g);
                let h = hamilton_field(&spec, &q).unwrap();
                assert!(h.d_rho.abs() <= 4.0 * rho);
                assert!(h.d_w.iter().all(|v| v.abs() <= 4.0 * rho));
                assert!(h.d_z.abs() <= 4.0 * rho * rho);
            }
        }
    }

    #[test]
    fn front_face_values() {
        let spec = model(1);
        let zero = FrontFacePhasePoint {
            v: 2.0,
            big_w: vec![0.1, 0.2],
            big_z: 0.3,
            a_f: 0.0,
            b_f: vec![0.0, 0.0],
            c_f: 0.0,
        };
        assert_eq!(
            front_face_hamiltonian(&spec, (&[0.0, 0.0], 0.0), &zero),
            0.0
        );
        let one = FrontFacePhasePoint {
            v: 1.0,
            a_f: 1.0,
            ..zero.clone()
        };
        assert_eq!(front_face_hamiltonian(&spec, (&[0.0, 0.0], 0.0), &one), 1.0);
        let f = FrontFacePhasePoint {
            v: 1.3,
            big_w: vec![0.0; 2],
            big_z: 0.0,
            a_f: 0.4,
            b_f: vec![0.3, -0.2],
            c_f: 0.9,
        };
        let base = front_face_hamiltonian(&spec, (&[0.0, 0.0], 0.0), &f);
        let scaled = front_face_hamiltonian(
            &spec,
            (&[0.0, 0.0], 0.0),
            &FrontFacePhasePoint {
                v: 3.0 * 1.3,
                ..f.clone()
            },
        );
        assert!((scaled - 9.0 * base).abs() < 1e-12);
        let no_vertical = FrontFacePhasePoint { c_f: 0.0, ..f };
        assert!(
            (dilated_front_face_hamiltonian(&spec, (&[0.0, 0.0], 0.0), &no_vertical)
                - front_face_hamiltonian(&spec, (&[0.0, 0.0], 0.0), &no_vertical))
            .abs()
                < 1e-15
        );
    }

    #[test]
    fn front_face_fields_match_finite_differences() {
        let spec = make_builtin("bergman", &json!({"n": 1})).unwrap();
        let f = FrontFacePhasePoint {
            v: 1.2,
            big_w: vec![0.1, 0.2],
            big_z: -0.3,
            a_f: 0.4,
            b_f: vec![0.3, -0.2],
            c_f: 0.7,
        };
        for dilated in [false, true] {
            let field = FrontFaceField {
                spec: &spec,
                w: vec![0.0, 0.0],
                z: 0.0,
                dilated,
            };
            let ham = |y: &[f64]| {
                let p = FrontFacePhasePoint::from_state(1, y);
                if dilated {
                    dilated_front_face_hamiltonian(&spec, (&[0.0, 0.0], 0.0), &p)
                } else {
                    front_face_hamiltonian(&spec, (&[0.0, 0.0], 0.0), &p)
                }
            };
            let y = f.to_state();
            let mut dy = vec![0.0; 8];
            field.eval(&y, &mut dy).unwrap();
            let grad: Vec<f64> = (0..8)
                .map(|k| {
                    let mut p = y.clone();
                    let mut m = y.clone();
                    p[k] += 1e-6;
                    m[k] -= 1e-6;
                    (ham(&p) - ham(&m)) / 2e-6
                })
                .collect();
            // canonical: q̇ = ∂H/∂p, ṗ = −∂H/∂q with q = (V, W, Z), p = (a, b, c)
            for k in 0..4 {
                assert!(
                    (dy[k] - grad[k + 4]).abs() < 1e-7,
                    "dilated={dilated} k={k}"
                );
                assert!(
                    (dy[k + 4] + grad[k]).abs() < 1e-7,
                    "dilated={dilated} k={k}"
                );
            }
        }
    }
}
