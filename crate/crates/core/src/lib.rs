//! Numerical engine for asymptotically complex hyperbolic (ACH) geometry.
//!
//! The crate is organized bottom-up:
//!
//! * [`heisenberg`]: group law, Lie bracket and parabolic dilations of the
//!   Heisenberg group and the semidirect product with `R+`.
//! * [`metric`]: metric specifications in the rescaled form
//!   `g = (dρ² + h)/ρ²`, their dual metric `G = μ² + h_Θ + ρQ` and volume density.
//! * [`hamiltonian`]: the Θ-symplectic form and the Hamilton vector field of `G`.
//! * [`ode`] and [`flow`]: adaptive integration of the Θ-Hamiltonian flow.
//! * [`escape`]: convexity at infinity and closed-geodesic search.
//! * [`quadrature`] and [`renorm`]: cutoff volumes and Hadamard-regularized volume.
//! * [`laplacian`]: the model Laplacian at a boundary point and its indicial roots.
//! * [`trace`]: the assembled wave-trace predictions.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod escape;
pub mod flow;
pub mod hamiltonian;
pub mod heisenberg;
pub mod laplacian;
pub mod metric;
pub mod ode;
pub mod quadrature;
pub mod renorm;
pub mod trace;

pub use error::{Error, Result};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
