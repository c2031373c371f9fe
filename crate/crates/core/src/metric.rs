//! Metric specifications in the rescaled collar form
//!
//! ```text
//! g = (dρ² + h(ρ, w, z; dw, dz)) / ρ²,      G = μ² + h_Θ(w, z; u, t) + ρ Q(ρ, w, z; u, t)
//! ```
//!
//! where `(μ, u, t) = (ρξ, ρη_H, ρ²η_V)` are the Θ-rescaled fiber coordinates.
//!
//! Every built-in is fiber-quadratic: at a base point the non-radial part of `G`
//! is `fᵀ A(ρ, w, z) f` for the fiber vector `f = (u_1, …, u_2n, t)`. A
//! [`FiberForm`] carries `A` together with its analytic base derivatives, which
//! is all the Hamiltonian machinery needs.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePoint {
    pub rho: f64,
    pub w: Vec<f64>,
    pub z: f64,
}

impl BasePoint {
    pub fn new(rho: f64, w: Vec<f64>, z: f64) -> Self {
        Self { rho, w, z }
    }
}

/// A covector `ξ dρ + η_H·dw + η_V dz` in coordinate components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector {
    pub xi: f64,
    pub eta_h: Vec<f64>,
    pub eta_v: f64,
}

/// Θ-rescaled fiber coordinates `(μ, u, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCovector {
    pub mu: f64,
    pub u: Vec<f64>,
    pub t: f64,
}

impl ThetaCovector {
    pub fn zero(n: usize) -> Self {
        Self {
            mu: 0.0,
            u: vec![0.0; 2 * n],
            t: 0.0,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            mu: s * self.mu,
            u: self.u.iter().map(|v| s * v).collect(),
            t: s * self.t,
        }
    }

    /// The non-radial fiber vector `(u_1, …, u_2n, t)`.
    pub fn fiber_vector(&self) -> Vec<f64> {
        let mut f = self.u.clone();
        f.push(self.t);
        f
    }
}

/// `(ξ, η_H, η_V) ↦ (ρξ, ρη_H, ρ²η_V)`.
pub fn to_theta(p: &BasePoint, c: &Covector) -> ThetaCovector {
    let r = p.rho;
    ThetaCovector {
        mu: r * c.xi,
        u: c.eta_h.iter().map(|v| r * v).collect(),
        t: r * r * c.eta_v,
    }
}

pub fn from_theta(p: &BasePoint, zeta: &ThetaCovector) -> Result<Covector> {
    let r = p.rho;
    if r == 0.0 || !r.is_finite() {
        return Err(Error::Singular { rho: r });
    }
    Ok(Covector {
        xi: zeta.mu / r,
        eta_h: zeta.u.iter().map(|v| v / r).collect(),
        eta_v: zeta.t / (r * r),
    })
}

/// Index into the fiber vector `(u_1, …, u_2n, t)`; written `"u1"`, …, `"t"` in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberIndex {
    U(usize),
    T,
}

impl FiberIndex {
    fn position(self, n: usize) -> usize {
        match self {
            FiberIndex::U(j) => j,
            FiberIndex::T => 2 * n,
        }
    }

    fn in_range(self, n: usize) -> bool {
        match self {
            FiberIndex::U(j) => j < 2 * n,
            _ => true,
        }
    }
}

impl fmt::Display for FiberIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiberIndex::U(j) => write!(f, "u{}", j + 1),
            FiberIndex::T => write!(f, "t"),
        }
    }
}

impl std::str::FromStr for FiberIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "t" {
            return Ok(FiberIndex::T);
        }
        match s.strip_prefix('u').and_then(|d| d.parse::<usize>().ok()) {
            Some(j) if j >= 1 => Ok(FiberIndex::U(j - 1)),
            _ => Err(Error::invalid(format!(
                "fiber index must be u1, u2, … or t, got {s:?}"
            ))),
        }
    }
}

/// Index into the boundary coordinates `(w_1, …, w_2n, z)`; written `"w1"`, …, `"z"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseIndex {
    W(usize),
    Z,
}

impl BaseIndex {
    fn position(self, n: usize) -> usize {
        match self {
            BaseIndex::W(j) => j,
            BaseIndex::Z => 2 * n,
        }
    }

    fn in_range(self, n: usize) -> bool {
        match self {
            BaseIndex::W(j) => j < 2 * n,
            _ => true,
        }
    }
}

impl fmt::Display for BaseIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseIndex::W(j) => write!(f, "w{}", j + 1),
            BaseIndex::Z => write!(f, "z"),
        }
    }
}

impl std::str::FromStr for BaseIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "z" {
            return Ok(BaseIndex::Z);
        }
        match s.strip_prefix('w').and_then(|d| d.parse::<usize>().ok()) {
            Some(j) if j >= 1 => Ok(BaseIndex::W(j - 1)),
            _ => Err(Error::invalid(format!(
                "base index must be w1, w2, … or z, got {s:?}"
            ))),
        }
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_string())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(FiberIndex);
string_serde!(BaseIndex);

/// `cos(freq·x + phase)` in one boundary coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    pub coord: BaseIndex,
    pub freq: f64,
    #[serde(default)]
    pub phase: f64,
}

/// One entry of a perturbation table: `Q ⊇ coeff · ρ^rho_power · m(w, z) · f_i f_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QTerm {
    pub coeff: f64,
    #[serde(default)]
    pub rho_power: u32,
    pub fiber: [FiberIndex; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<Modulation>,
}

/// Serializable description of a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MetricKind {
    /// Flat-boundary model: `h_Θ = |u|² + t²`, `Q = 0`.
    Model { n: usize },
    /// Complex hyperbolic space (Siegel domain), scaled by 1/4 into the `dρ²/ρ²` normalization.
    Bergman { n: usize },
    /// Two-ended surface `dr² + w(r)² dz²`, `w(r) = w0·cosh(2r)`, `z ∈ R/LZ`, charted by `ρ = e^{−r}`.
    Cylinder { length: f64, w0: f64 },
    /// A base metric plus a fiber-quadratic table added to `Q`.
    Perturbed {
        base: Box<MetricKind>,
        q: Vec<QTerm>,
    },
}

/// `A`, `∂_ρ A` and `∂_{w_i} A, ∂_z A` at one base point.
#[derive(Debug, Clone)]
pub struct FiberForm {
    pub a: DMatrix<f64>,
    pub d_rho: DMatrix<f64>,
    pub d_base: Vec<DMatrix<f64>>,
}

impl FiberForm {
    fn zeros(m: usize) -> Self {
        Self {
            a: DMatrix::zeros(m, m),
            d_rho: DMatrix::zeros(m, m),
            d_base: vec![DMatrix::zeros(m, m); m],
        }
    }
}

fn quad(a: &DMatrix<f64>, f: &[f64]) -> f64 {
    let m = f.len();
    let mut s = 0.0;
    for i in 0..m {
        let mut row = 0.0;
        for j in 0..m {
            row += a[(i, j)] * f[j];
        }
        s += f[i] * row;
    }
    s
}

/// Value and analytic partial derivatives of `G` at a phase point.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMetricJet {
    pub g: f64,
    pub d_rho: f64,
    pub d_w: Vec<f64>,
    pub d_z: f64,
    pub d_mu: f64,
    pub d_u: Vec<f64>,
    pub d_t: f64,
}

/// An immutable, validated metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    kind: MetricKind,
    n: usize,
    /// Periods of `(w_1, …, w_2n, z)` for the cross-section used in volume integrals.
    periods: Vec<f64>,
    /// Whether translations by `periods` are isometries (so the boundary may be treated as a torus).
    periodic: bool,
    /// Top of each end's collar `ρ ∈ (0, rho_max]`.
    rho_max: f64,
    ends: usize,
}

impl Serialize for MetricSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.kind.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let kind = MetricKind::deserialize(d)?;
        MetricSpec::new(kind).map_err(serde::de::Error::custom)
    }
}

impl MetricSpec {
    pub fn new(kind: MetricKind) -> Result<Self> {
        let (n, periods, periodic, ends) = Self::validate(&kind)?;
        Ok(Self {
            kind,
            n,
            periods,
            periodic,
            rho_max: 1.0,
            ends,
        })
    }

    fn validate(kind: &MetricKind) -> Result<(usize, Vec<f64>, bool, usize)> {
        match kind {
            MetricKind::Model { n } => Ok((*n, vec![2.0 * PI; 2 * n + 1], true, 1)),
            MetricKind::Bergman { n } => Ok((*n, vec![2.0 * PI; 2 * n + 1], false, 1)),
            MetricKind::Cylinder { length, w0 } => {
                if !(*length > 0.0 && length.is_finite()) {
                    return Err(Error::invalid(format!(
                        "cylinder length must be positive, got {length}"
                    )));
                }
                if !(*w0 > 0.0 && w0.is_finite()) {
                    return Err(Error::invalid(format!(
                        "cylinder w0 must be positive, got {w0}"
                    )));
                }
                Ok((0, vec![*length], true, 2))
            }
            MetricKind::Perturbed { base, q } => {
                let (n, periods, periodic, ends) = Self::validate(base)?;
                for term in q {
                    for f in term.fiber {
                        if !f.in_range(n) {
                            return Err(Error::invalid(format!(
                                "fiber index {f} out of range for n = {n}"
                            )));
                        }
                    }
                    if !term.coeff.is_finite() {
                        return Err(Error::invalid("perturbation coefficient must be finite"));
                    }
                    if let Some(m) = &term.modulation {
                        if !m.coord.in_range(n) {
                            return Err(Error::invalid(format!(
                                "base index {} out of range for n = {n}",
                                m.coord
                            )));
                        }
                    }
                }
                Ok((n, periods, periodic, ends))
            }
        }
    }

    pub fn kind(&self) -> &MetricKind {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Length of the fiber vector `(u, t)`, which is also the number of boundary coordinates.
    pub fn fiber_dim(&self) -> usize {
        2 * self.n + 1
    }

    /// Dimension of phase space, `4n + 4`.
    pub fn phase_dim(&self) -> usize {
        4 * self.n + 4
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Number of ACH ends sharing the collar description.
    pub fn ends(&self) -> usize {
        self.ends
    }

    /// Lebesgue measure of the boundary cross-section.
    pub fn cross_section_measure(&self) -> f64 {
        self.periods.iter().product()
    }

    /// SHA-256 of the canonical JSON form; used to tie derived results to their metric.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(&self.kind).expect("metric serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn label(&self) -> String {
        match &self.kind {
            MetricKind::Model { n } => format!("model({n})"),
            MetricKind::Bergman { n } => format!("bergman({n})"),
            MetricKind::Cylinder { length, w0 } => format!("cylinder(L={length}, w0={w0})"),
            MetricKind::Perturbed { base, q } => {
                let b = MetricSpec::new((**base).clone())
                    .map(|s| s.label())
                    .unwrap_or_default();
                format!("perturbed({b}, {} terms)", q.len())
            }
        }
    }

    pub(crate) fn check_base(&self, p: &BasePoint) -> Result<()> {
        if p.w.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n,
                got: p.w.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_fiber(&self, zeta: &ThetaCovector) -> Result<()> {
        if zeta.u.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: 2 * self.n,
                got: zeta.u.len(),
            });
        }
        Ok(())
    }

    /// The boundary form `h_Θ(w, z)` and its base derivatives.
    #[allow(clippy::only_used_in_recursion)]
    pub fn h_theta_form(&self, w: &[f64], z: f64) -> FiberForm {
        let m = self.fiber_dim();
        let mut form = FiberForm::zeros(m);
        match &self.kind {
            MetricKind::Model { .. } => form.a.fill_with_identity(),
            MetricKind::Bergman { n } => {
                for i in 0..2 * n {
                    form.a[(i, i)] = 2.0;
                }
                form.a[(2 * n, 2 * n)] = 4.0;
            }
            MetricKind::Cylinder { w0, .. } => form.a[(0, 0)] = 4.0 / (w0 * w0),
            MetricKind::Perturbed { base, .. } => {
                let base = MetricSpec::new((**base).clone()).expect("validated");
                return base.h_theta_form(w, z);
            }
        }
        form
    }

    /// The full fiber form `A = h_Θ + ρQ` with analytic derivatives.
    pub fn fiber_form(&self, rho: f64, w: &[f64], z: f64) -> FiberForm {
        let m = self.fiber_dim();
        match &self.kind {
            MetricKind::Model { .. } => self.h_theta_form(w, z),
            MetricKind::Bergman { n } => bergman_form(*n, rho, w),
            MetricKind::Cylinder { w0, .. } => {
                let mut form = FiberForm::zeros(m);
                let s = 1.0 + rho.powi(4);
                let c = 4.0 / (w0 * w0);
                form.a[(0, 0)] = c / (s * s);
                form.d_rho[(0, 0)] = -8.0 * c * rho.powi(3) / (s * s * s);
                form
            }
            MetricKind::Perturbed { base, q } => {
                let base = MetricSpec::new((**base).clone()).expect("validated");
                let mut form = base.fiber_form(rho, w, z);
                for term in q {
                    add_q_term(&mut form, term, self.n, rho, w, z);
                }
                form
            }
        }
    }

    /// `h_Θ(w, z, u, t)`.
    pub fn h_theta(&self, w: &[f64], z: f64, zeta: &ThetaCovector) -> f64 {
        quad(&self.h_theta_form(w, z).a, &zeta.fiber_vector())
    }

    /// `Q(ρ, w, z, u, t)`, recovered as `(Ḡ − h_Θ)/ρ`.
    pub fn q_value(&self, p: &BasePoint, zeta: &ThetaCovector) -> f64 {
        let f = zeta.fiber_vector();
        let full = quad(&self.fiber_form(p.rho, &p.w, p.z).a, &f);
        let h = quad(&self.h_theta_form(&p.w, p.z).a, &f);
        (full - h) / p.rho
    }

    /// `Ḡ = h_Θ + ρQ`, the non-radial part of `G`.
    pub fn g_bar(&self, p: &BasePoint, zeta: &ThetaCovector) -> f64 {
        quad(&self.fiber_form(p.rho, &p.w, p.z).a, &zeta.fiber_vector())
    }

    /// `G = μ² + h_Θ + ρQ`.
    pub fn dual_metric_g(&self, p: &BasePoint, zeta: &ThetaCovector) -> Result<f64> {
        self.check_base(p)?;
        self.check_fiber(zeta)?;
        if p.rho == 0.0 {
            return Ok(zeta.mu * zeta.mu + self.h_theta(&p.w, p.z, zeta));
        }
        Ok(zeta.mu * zeta.mu + self.g_bar(p, zeta))
    }

    /// `G` with all first partial derivatives, from the analytic fiber form.
    pub fn jet(&self, p: &BasePoint, zeta: &ThetaCovector) -> DualMetricJet {
        let form = self.fiber_form(p.rho, &p.w, p.z);
        let f = zeta.fiber_vector();
        let m = f.len();
        let af = &form.a * nalgebra::DVector::from_column_slice(&f);
        let grad_f: Vec<f64> = af.iter().map(|v| 2.0 * v).collect();
        let d_base: Vec<f64> = form.d_base.iter().map(|d| quad(d, &f)).collect();
        DualMetricJet {
            g: zeta.mu * zeta.mu + quad(&form.a, &f),
            d_rho: quad(&form.d_rho, &f),
            d_w: d_base[..m - 1].to_vec(),
            d_z: d_base[m - 1],
            d_mu: 2.0 * zeta.mu,
            d_u: grad_f[..m - 1].to_vec(),
            d_t: grad_f[m - 1],
        }
    }

    /// Coordinate inverse metric `g^{-1}` in the basis `(dρ, dw, dz)`.
    pub fn inverse_metric(&self, p: &BasePoint) -> Result<DMatrix<f64>> {
        self.check_base(p)?;
        if !(p.rho > 0.0) {
            return Err(Error::Singular { rho: p.rho });
        }
        let m = self.fiber_dim();
        let a = self.fiber_form(p.rho, &p.w, p.z).a;
        let mut full = DMatrix::zeros(m + 1, m + 1);
        full[(0, 0)] = 1.0;
        full.view_mut((1, 1), (m, m)).copy_from(&a);
        let scale: Vec<f64> = (0..=m)
            .map(|i| if i == m { p.rho * p.rho } else { p.rho })
            .collect();
        for i in 0..=m {
            for j in 0..=m {
                full[(i, j)] *= scale[i] * scale[j];
            }
        }
        Ok(full)
    }

    /// Coordinate metric `g` in the basis `(dρ, dw, dz)`.
    pub fn metric(&self, p: &BasePoint) -> Result<DMatrix<f64>> {
        let inv = self.inverse_metric(p)?;
        inv.try_inverse().ok_or(Error::Singular { rho: p.rho })
    }

    /// Riemannian volume density `sqrt(det g)` in the coordinates `(ρ, w, z)`.
    pub fn volume_density(&self, p: &BasePoint) -> Result<f64> {
        self.check_base(p)?;
        let rho = p.rho;
        if !(rho > 0.0) {
            return Err(Error::invalid(format!(
                "volume density needs rho > 0, got {rho}"
            )));
        }
        let leading = rho.powi(-(2 * self.n as i32 + 3));
        Ok(match &self.kind {
            MetricKind::Model { .. } => leading,
            MetricKind::Bergman { n } => leading * 0.5f64.powi(*n as i32 + 1),
            MetricKind::Cylinder { w0, .. } => 0.5 * w0 * (1.0 + rho.powi(4)) * leading,
            MetricKind::Perturbed { .. } => {
                let det = self.fiber_form(rho, &p.w, p.z).a.determinant();
                if !(det > 0.0) {
                    return Err(Error::invalid(format!(
                        "fiber form not positive definite at rho = {rho}"
                    )));
                }
                leading / det.sqrt()
            }
        })
    }

    /// `true` when the density factors as `f(ρ)` times the cross-section measure.
    pub fn density_is_product(&self) -> bool {
        match &self.kind {
            MetricKind::Perturbed { q, .. } => q.iter().all(|t| t.modulation.is_none()),
            _ => true,
        }
    }

    /// Closed-form `∫_{ρ>ε} dVol` over all ends when an antiderivative is known.
    pub fn cutoff_volume_closed_form(&self, eps: f64) -> Option<f64> {
        let top = self.rho_max;
        match &self.kind {
            MetricKind::Model { n } | MetricKind::Bergman { n } => {
                let k = 2 * (*n as i32) + 2;
                let c = if matches!(self.kind, MetricKind::Bergman { .. }) {
                    0.5f64.powi(*n as i32 + 1)
                } else {
                    1.0
                };
                Some(c * self.cross_section_measure() * (eps.powi(-k) - top.powi(-k)) / k as f64)
            }
            MetricKind::Cylinder { length, w0 } => {
                // each end: ∫_ε^1 (w0/2)(ρ^{-3} + ρ) dρ · L = (w0 L / 4)(ε^{-2} − ε²)
                Some(self.ends as f64 * 0.25 * w0 * length * (eps.powi(-2) - eps * eps))
            }
            MetricKind::Perturbed { .. } => None,
        }
    }
}

fn bergman_form(n: usize, rho: f64, w: &[f64]) -> FiberForm {
    let m = 2 * n + 1;
    let ti = 2 * n;
    let mut form = FiberForm::zeros(m);
    // J w = (−y, x) for w = (x_1..x_n, y_1..y_n)
    let jw: Vec<f64> = (0..2 * n)
        .map(|j| if j < n { -w[n + j] } else { w[j - n] })
        .collect();
    let w2: f64 = w.iter().map(|v| v * v).sum();
    for i in 0..2 * n {
        form.a[(i, i)] = 2.0;
        form.a[(i, ti)] = 2.0 * jw[i] / rho;
        form.a[(ti, i)] = form.a[(i, ti)];
        form.d_rho[(i, ti)] = -2.0 * jw[i] / (rho * rho);
        form.d_rho[(ti, i)] = form.d_rho[(i, ti)];
    }
    form.a[(ti, ti)] = 4.0 + 2.0 * w2 / (rho * rho);
    form.d_rho[(ti, ti)] = -4.0 * w2 / rho.powi(3);
    for k in 0..2 * n {
        let d = &mut form.d_base[k];
        // ∂(Jw)/∂x_k = e_{n+k},  ∂(Jw)/∂y_k = −e_k
        let (idx, sign) = if k < n { (n + k, 1.0) } else { (k - n, -1.0) };
        d[(idx, ti)] = 2.0 * sign / rho;
        d[(ti, idx)] = d[(idx, ti)];
        d[(ti, ti)] = 4.0 * w[k] / (rho * rho);
    }
    form
}

fn add_q_term(form: &mut FiberForm, term: &QTerm, n: usize, rho: f64, w: &[f64], z: f64) {
    let i = term.fiber[0].position(n);
    let j = term.fiber[1].position(n);
    let (m, dm, k) = match &term.modulation {
        None => (1.0, 0.0, None),
        Some(md) => {
            let k = md.coord.position(n);
            let x = if k == 2 * n { z } else { w[k] };
            let arg = md.freq * x + md.phase;
            (arg.cos(), -md.freq * arg.sin(), Some(k))
        }
    };
    let p = term.rho_power as i32;
    // ρQ contributes coeff ρ^{p+1} m f_i f_j
    let val = term.coeff * rho.powi(p + 1);
    let dval = term.coeff * (p + 1) as f64 * rho.powi(p);
    let (wi, wj) = if i == j { (1.0, 0.0) } else { (0.5, 0.5) };
    let put = |mat: &mut DMatrix<f64>, v: f64| {
        if i == j {
            mat[(i, i)] += wi * v;
        } else {
            mat[(i, j)] += wi * v;
            mat[(j, i)] += wj * v;
        }
    };
    put(&mut form.a, val * m);
    put(&mut form.d_rho, dval * m);
    if let Some(k) = k {
        put(&mut form.d_base[k], val * dm);
    }
}

/// Build a metric from a label and a parameter record, e.g.
/// `make_builtin("cylinder", &json!({"length": 6.28, "w0": 0.5}))`.
pub fn make_builtin(name: &str, params: &serde_json::Value) -> Result<MetricSpec> {
    let mut obj = match params {
        serde_json::Value::Object(o) => o.clone(),
        serde_json::Value::Null => serde_json::Map::new(),
        _ => return Err(Error::invalid("builtin parameters must be a record")),
    };
    obj.insert("kind".into(), serde_json::Value::String(name.to_string()));
    let kind: MetricKind = serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| Error::invalid(format!("metric: {e}")))?;
    MetricSpec::new(kind)
}
