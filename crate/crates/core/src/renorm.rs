//! Cutoff volumes `Vol{ρ > ε}` and their Hadamard finite part.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{BasePoint, MetricSpec};
use crate::quadrature::{integrate_geometric, periodic_mean, QuadratureParams};

/// Geometric cutoff grid `start·ratio^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpsGrid {
    pub start: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for EpsGrid {
    fn default() -> Self {
        Self {
            start: 0.5,
            ratio: 0.68,
            count: 20,
        }
    }
}

impl EpsGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.start > 0.0 && self.ratio > 0.0 && self.ratio < 1.0 && self.count >= 2) {
            return Err(Error::invalid(
                "eps grid needs start > 0, 0 < ratio < 1 and count >= 2",
            ));
        }
        Ok((0..self.count)
            .map(|k| self.start * self.ratio.powi(k as i32))
            .collect())
    }

    pub fn decades(&self) -> f64 {
        -(self.count.saturating_sub(1) as f64) * self.ratio.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub include_log: bool,
    /// Number of positive powers `ε, ε², …` absorbing the vanishing remainder.
    pub tail_powers: usize,
    pub condition_threshold: f64,
    /// Bound on the max relative residual `|fit − V| / max(|V|, 1)`.
    pub residual_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            include_log: true,
            tail_powers: 2,
            condition_threshold: 1e12,
            residual_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    /// Coefficients of `ε^j`, `j = −2n−2, …, −1`.
    pub d: BTreeMap<i32, f64>,
    /// Coefficient of `log(1/ε)`.
    pub d0: f64,
    pub finite_part: f64,
    /// Coefficients of `ε, ε², …`.
    pub tail: Vec<f64>,
    pub condition_number: f64,
    pub residual_norm: f64,
    pub residual_tol: f64,
    pub eps_grid: Vec<f64>,
}

impl ExpansionFit {
    pub fn within_tolerance(&self) -> bool {
        self.residual_norm <= self.residual_tol
    }

    /// `Σ d_j ε^j + d0 log(1/ε)`.
    pub fn divergent_part(&self, eps: f64) -> f64 {
        self.d.iter().map(|(j, c)| c * eps.powi(*j)).sum::<f64>() + self.d0 * (1.0 / eps).ln()
    }

    /// The full fitted model at `eps`.
    pub fn evaluate(&self, eps: f64) -> f64 {
        let tail: f64 = self
            .tail
            .iter()
            .enumerate()
            .map(|(k, c)| c * eps.powi(k as i32 + 1))
            .sum();
        self.divergent_part(eps) + self.finite_part + tail
    }
}

/// `∫_eps^top density(ρ) dρ`.
pub fn collar_volume<F: Fn(f64) -> f64>(
    density: F,
    eps: f64,
    top: f64,
    quad: &QuadratureParams,
) -> Result<f64> {
    Ok(integrate_geometric(&density, eps, top, quad)?.value)
}

/// Volume integrated over the cross-section at fixed `ρ`.
pub fn radial_profile(spec: &MetricSpec, rho: f64, quad: &QuadratureParams) -> Result<f64> {
    let n = spec.n();
    let measure = spec.cross_section_measure();
    if spec.density_is_product() {
        return Ok(measure * spec.volume_density(&BasePoint::new(rho, vec![0.0; 2 * n], 0.0))?);
    }
    let failure = std::sync::Mutex::new(None);
    let mean = periodic_mean(
        &|x: &[f64]| match spec.volume_density(&BasePoint::new(rho, x[..2 * n].to_vec(), x[2 * n]))
        {
            Ok(v) => v,
            Err(e) => {
                *failure.lock().expect("poisoned") = Some(e);
                f64::NAN
            }
        },
        spec.periods(),
        quad.cross_section_points.max(1),
    );
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(measure * mean)
}

/// `Vol{ρ > eps}` summed over all ends.
///
/// Two-ended metrics are charted by one global `ρ ∈ (0, ∞)` whose second end has
/// defining function `1/ρ`; the region is then `eps < ρ < 1/eps`.
pub fn cutoff_volume(spec: &MetricSpec, eps: f64, quad: &QuadratureParams) -> Result<f64> {
    let top = spec.rho_max();
    if !(eps > 0.0 && eps < top) {
        return Err(Error::invalid(format!(
            "cutoff eps = {eps} must lie in (0, {top})"
        )));
    }
    if quad.closed_form {
        if let Some(v) = spec.cutoff_volume_closed_form(eps) {
            return Ok(v);
        }
    }
    let upper = if spec.ends() == 2 { 1.0 / eps } else { top };
    let failure = std::sync::Mutex::new(None);
    let profile = |rho: f64| match radial_profile(spec, rho, quad) {
        Ok(v) => v,
        Err(e) => {
            *failure.lock().expect("poisoned") = Some(e);
            f64::NAN
        }
    };
    let result = integrate_geometric(&profile, eps, upper, quad);
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(result?.value)
}

/// Least-squares fit of `V(ε)` by `Σ d_j ε^j + d0 log(1/ε) + c + Σ a_k ε^k`.
pub fn fit_expansion(samples: &[(f64, f64)], n: usize, opts: &FitOptions) -> Result<ExpansionFit> {
    let mut samples = samples.to_vec();
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    if samples.windows(2).any(|w| !(w[0].0 > w[1].0))
        || samples.iter().any(|s| !(s.0 > 0.0) || !s.1.is_finite())
    {
        return Err(Error::invalid(
            "fit needs distinct positive eps values and finite volumes",
        ));
    }
    let k_max = 2 * n as i32 + 2;
    let min_samples = 2 * n + 6;
    if samples.len() < min_samples {
        return Err(Error::invalid(format!(
            "fit needs at least {min_samples} samples, got {}",
            samples.len()
        )));
    }
    let span = (samples[0].0 / samples[samples.len() - 1].0).log10();
    if span < 3.0 - 1e-9 {
        return Err(Error::invalid(format!(
            "eps grid spans {span:.2} decades; at least 3 are required"
        )));
    }
    let mut basis: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();
    for k in (1..=k_max).rev() {
        basis.push(Box::new(move |e: f64| e.powi(-k)));
    }
    if opts.include_log {
        basis.push(Box::new(|e: f64| (1.0 / e).ln()));
    }
    basis.push(Box::new(|_| 1.0));
    for k in 1..=opts.tail_powers as i32 {
        basis.push(Box::new(move |e: f64| e.powi(k)));
    }
    let (rows, cols) = (samples.len(), basis.len());
    let weights: Vec<f64> = samples.iter().map(|s| 1.0 / s.1.abs().max(1.0)).collect();
    let mut x = DMatrix::from_fn(rows, cols, |i, j| weights[i] * basis[j](samples[i].0));
    let scale: Vec<f64> = (0..cols).map(|j| 1.0 / x.column(j).norm()).collect();
    for j in 0..cols {
        x.column_mut(j).scale_mut(scale[j]);
    }
    let rhs = DVector::from_fn(rows, |i, _| weights[i] * samples[i].1);
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition_number = sv.max() / sv.min();
    if !(condition_number <= opts.condition_threshold) {
        return Err(Error::IllConditioned {
            condition: condition_number,
            threshold: opts.condition_threshold,
        });
    }
    let y = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::invalid(format!("fit solve: {e}")))?;
    let coef: Vec<f64> = (0..cols).map(|j| y[j] * scale[j]).collect();
    let residual_norm = (&x * &y - &rhs).amax();
    let mut d = BTreeMap::new();
    for (idx, k) in (1..=k_max).rev().enumerate() {
        d.insert(-k, coef[idx]);
    }
    let mut at = k_max as usize;
    let d0 = if opts.include_log {
        at += 1;
        coef[at - 1]
    } else {
        0.0
    };
    let finite_part = coef[at];
    let tail = coef[at + 1..].to_vec();
    Ok(ExpansionFit {
        d,
        d0,
        finite_part,
        tail,
        condition_number,
        residual_norm,
        residual_tol: opts.residual_tol,
        eps_grid: samples.iter().map(|s| s.0).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormParams {
    pub eps_grid: EpsGrid,
    pub quadrature: QuadratureParams,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedVolume {
    pub rvol: f64,
    pub fit: ExpansionFit,
    /// `(ε, Vol{ρ > ε})` in grid order.
    pub samples: Vec<(f64, f64)>,
    pub fingerprint: String,
}

/// Cutoff volumes on the grid, fitted; the renormalized volume is the finite part.
pub fn renormalized_volume(spec: &MetricSpec, params: &RenormParams) -> Result<RenormalizedVolume> {
    let eps = params.eps_grid.points()?;
    let values: Vec<f64> = eps
        .par_iter()
        .map(|&e| cutoff_volume(spec, e, &params.quadrature))
        .collect::<Result<_>>()?;
    let samples: Vec<(f64, f64)> = eps.into_iter().zip(values).collect();
    let fit = fit_expansion(&samples, spec.n(), &params.fit)?;
    if !fit.within_tolerance() {
        return Err(Error::invalid(format!(
            "expansion residual {:e} exceeds tolerance {:e}; move the grid toward the boundary or add tail powers",
            fit.residual_norm, fit.residual_tol
        )));
    }
    Ok(RenormalizedVolume {
        rvol: fit.finite_part,
        fit,
        samples,
        fingerprint: spec.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(eps: f64) -> f64 {
        0.5 * eps.powi(-2) + (1.0 / eps).ln() + 0.5 - eps
    }

    #[test]
    fn grid_points_and_span() {
        let g = EpsGrid::default();
        let p = g.points().unwrap();
        assert_eq!(p.len(), 20);
        assert!(g.decades() >= 3.0);
        assert!(p.windows(2).all(|w| w[0] > w[1]));
        assert!(EpsGrid { ratio: 1.5, ..g }.points().is_err());
    }

    #[test]
    fn constant_volume() {
        let samples: Vec<(f64, f64)> = EpsGrid::default()
            .points()
            .unwrap()
            .into_iter()
            .map(|e| (e, 7.0))
            .collect();
        let fit = fit_expansion(&samples, 0, &FitOptions::default()).unwrap();
        assert!(fit.d.values().all(|v| v.abs() < 1e-10));
        assert!(fit.d0.abs() < 1e-10);
        assert!((fit.finite_part - 7.0).abs() < 1e-10);
    }

    #[test]
    fn toy_antiderivative() {
        let q = QuadratureParams::default();
        for eps in [0.5, 1e-2, 1e-4] {
            let v = collar_volume(|r: f64| r.powi(-3) + 1.0 / r + 1.0, eps, 1.0, &q).unwrap();
            assert!((v / toy(eps) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_short_or_narrow_grids() {
        let few: Vec<(f64, f64)> = (0..4).map(|k| (0.1f64.powi(k), 1.0)).collect();
        assert!(fit_expansion(&few, 0, &FitOptions::default()).is_err());
        let narrow: Vec<(f64, f64)> = (0..10).map(|k| (0.5 * 0.9f64.powi(k), 1.0)).collect();
        assert!(fit_expansion(&narrow, 0, &FitOptions::default()).is_err());
    }

    #[test]
    fn compact_support_is_eps_independent() {
        let q = QuadratureParams::default();
        let bump = |r: f64| if r > 0.4 { (r - 0.4) * (1.0 - r) } else { 0.0 };
        let a = collar_volume(bump, 1e-3, 1.0, &q).unwrap();
        let b = collar_volume(bump, 0.2, 1.0, &q).unwrap();
        assert!((a - b).abs() < 1e-12);
        let samples: Vec<(f64, f64)> = EpsGrid {
            start: 0.3,
            ..Default::default()
        }
        .points()
        .unwrap()
        .into_iter()
        .map(|e| (e, a))
        .collect();
        let fit = fit_expansion(&samples, 0, &FitOptions::default()).unwrap();
        assert!((fit.finite_part - 0.036).abs() < 1e-12);
    }
}
