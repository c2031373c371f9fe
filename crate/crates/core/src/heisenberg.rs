//! The Heisenberg group `H_n`, its Lie algebra, parabolic dilations and the
//! semidirect product `R+ ⋉ H_n` modelling complex hyperbolic space.
//!
//! Points are `(x, y, z)` with `x, y ∈ R^n`, identified with `w = x + iy ∈ C^n`.
//! The product is
//!
//! ```text
//! (x, y, z)·(x', y', z') = (x + x', y + y', z + z' + Im⟨w, w'⟩),   ⟨w, w'⟩ = Σ w_j conj(w'_j)
//! ```
//!
//! so that `Im⟨w, w'⟩ = Σ (y_j x'_j − x_j y'_j)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergElement {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: f64,
}

impl HeisenbergElement {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(Self { x, y, z })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n],
            z: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `Im⟨w, w'⟩` for the Hermitian pairing.
    fn im_pairing(&self, other: &Self) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .zip(other.x.iter().zip(&other.y))
            .map(|((x, y), (xp, yp))| y * xp - x * yp)
            .sum()
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let dz = (self.z - other.z).abs();
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.y.iter().zip(&other.y))
            .map(|(a, b)| (a - b).abs())
            .fold(dz, f64::max)
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

pub fn h_mul(a: &HeisenbergElement, b: &HeisenbergElement) -> Result<HeisenbergElement> {
    a.check_same_dim(b)?;
    Ok(HeisenbergElement {
        x: a.x.iter().zip(&b.x).map(|(p, q)| p + q).collect(),
        y: a.y.iter().zip(&b.y).map(|(p, q)| p + q).collect(),
        z: a.z + b.z + a.im_pairing(b),
    })
}

pub fn h_inverse(a: &HeisenbergElement) -> HeisenbergElement {
    HeisenbergElement {
        x: a.x.iter().map(|v| -v).collect(),
        y: a.y.iter().map(|v| -v).collect(),
        z: -a.z,
    }
}

/// Parabolic dilation `(x, y, z) ↦ (δx, δy, δ²z)`.
pub fn dilate(delta: f64, a: &HeisenbergElement) -> Result<HeisenbergElement> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!(
            "dilation factor must be positive, got {delta}"
        )));
    }
    Ok(HeisenbergElement {
        x: a.x.iter().map(|v| delta * v).collect(),
        y: a.y.iter().map(|v| delta * v).collect(),
        z: delta * delta * a.z,
    })
}

/// A point `(ρ, W)` of `R+ ⋉ H_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CHPoint {
    pub rho: f64,
    pub w: HeisenbergElement,
}

impl CHPoint {
    pub fn new(rho: f64, w: HeisenbergElement) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { rho, w })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rho: 1.0,
            w: HeisenbergElement::identity(n),
        }
    }
}

/// `(ρ, W)·(ρ', W') = (ρρ', W · D_ρ(W'))`.
pub fn chc_mul(p: &CHPoint, q: &CHPoint) -> Result<CHPoint> {
    let w = h_mul(&p.w, &dilate(p.rho, &q.w)?)?;
    Ok(CHPoint {
        rho: p.rho * q.rho,
        w,
    })
}

/// Coefficients on the basis `X_1..X_n, Y_1..Y_n, Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieAlgebraVector {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl LieAlgebraVector {
    pub fn zero(n: usize) -> Self {
        Self {
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: 0.0,
        }
    }

    pub fn x(n: usize, j: usize) -> Self {
        let mut v = Self::zero(n);
        v.a[j] = 1.0;
        v
    }

    pub fn y(n: usize, j: usize) -> Self {
        let mut v = Self::zero(n);
        v.b[j] = 1.0;
        v
    }

    pub fn z(n: usize) -> Self {
        Self {
            c: 1.0,
            ..Self::zero(n)
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            a: self.a.iter().map(|v| s * v).collect(),
            b: self.b.iter().map(|v| s * v).collect(),
            c: s * self.c,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(Self {
            a: self.a.iter().zip(&other.a).map(|(p, q)| p + q).collect(),
            b: self.b.iter().zip(&other.b).map(|(p, q)| p + q).collect(),
            c: self.c + other.c,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.a
            .iter()
            .chain(&self.b)
            .map(|v| v.abs())
            .fold(self.c.abs(), f64::max)
    }
}

/// Lie bracket: the only nonzero structure constants are `[X_j, Y_j] = Z`.
pub fn bracket(v: &LieAlgebraVector, u: &LieAlgebraVector) -> Result<LieAlgebraVector> {
    if v.dim() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: u.dim(),
        });
    }
    let c =
        v.a.iter()
            .zip(&v.b)
            .zip(u.a.iter().zip(&u.b))
            .map(|((a, b), (ap, bp))| a * bp - b * ap)
            .sum();
    Ok(LieAlgebraVector {
        c,
        ..LieAlgebraVector::zero(v.dim())
    })
}
