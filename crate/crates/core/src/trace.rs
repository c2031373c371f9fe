//! Trace-level predictions assembled from closed geodesics and the renormalized volume.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::{ClosedGeodesic, ClosedSearch};
use crate::metric::MetricSpec;
use crate::quadrature::QuadratureParams;
use crate::renorm::{cutoff_volume, RenormalizedVolume};

pub const SCHEMA_VERSION: u32 = 1;

/// `{0} ∪ {±k ℓ : 1 ≤ k ≤ k_max}` sorted, with entries closer than `1e-9` merged.
pub fn singular_support_from_lengths(lengths: &[f64], k_max: usize) -> Result<Vec<f64>> {
    if k_max < 1 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let mut pts = vec![0.0];
    for &l in lengths {
        for k in 1..=k_max {
            pts.push(k as f64 * l);
            pts.push(-(k as f64) * l);
        }
    }
    pts.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_none_or(|q| p - q > 1e-9) {
            out.push(p);
        }
    }
    // keep exact symmetry after merging
    let positive: Vec<f64> = out.iter().copied().filter(|p| *p > 0.0).collect();
    let mut sym: Vec<f64> = positive.iter().rev().map(|p| -p).collect();
    sym.push(0.0);
    sym.extend(positive);
    Ok(sym)
}

pub fn predicted_singular_support(geodesics: &[ClosedGeodesic], k_max: usize) -> Result<Vec<f64>> {
    let lengths: Vec<f64> = geodesics.iter().map(|g| g.length).collect();
    singular_support_from_lengths(&lengths, k_max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffSample {
    pub eps: f64,
    pub volume: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HigherCoefficient {
    pub k: usize,
    pub value: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub schema_version: u32,
    pub metric: String,
    pub fingerprint: String,
    pub singular_support: Vec<f64>,
    pub k_max: usize,
    pub closed_geodesic_lengths: Vec<f64>,
    pub omega0: f64,
    pub higher_coefficients: Vec<HigherCoefficient>,
    /// `Vol{ρ > ε}` by increasing `ε`.
    pub cutoff_w0: Vec<CutoffSample>,
    /// Shortest positive period, if any.
    pub t0: Option<f64>,
    /// Admissible cutoff support radius `2 t0 / 3`.
    pub cutoff_window: Option<f64>,
    /// `|Vol{ρ > ε} − divergent part − ω0| / max(1, |ω0|)` at the smallest `ε`.
    pub consistency_gap: f64,
    pub provenance: BTreeMap<String, String>,
}

/// Combine results computed for the same metric into a report.
pub fn assemble_report(
    spec: &MetricSpec,
    rvol: &RenormalizedVolume,
    geodesics: &ClosedSearch,
    eps_list: &[f64],
    k_max: usize,
    quad: &QuadratureParams,
) -> Result<TraceReport> {
    let fp = spec.fingerprint();
    for got in [&rvol.fingerprint, &geodesics.fingerprint] {
        if *got != fp {
            return Err(Error::FingerprintMismatch {
                expected: fp.clone(),
                got: got.clone(),
            });
        }
    }
    if eps_list.is_empty() {
        return Err(Error::invalid("eps_list must not be empty"));
    }
    let singular_support = predicted_singular_support(&geodesics.geodesics, k_max)?;
    let t0 = singular_support.iter().copied().find(|t| *t > 0.0);
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let cutoff_w0 = eps
        .iter()
        .map(|&e| {
            Ok(CutoffSample {
                eps: e,
                volume: cutoff_volume(spec, e, quad)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let omega0 = rvol.fit.finite_part;
    let first = &cutoff_w0[0];
    let consistency_gap =
        (first.volume - rvol.fit.divergent_part(first.eps) - omega0).abs() / omega0.abs().max(1.0);
    let provenance = [
        (
            "singular_support",
            "closed geodesic search, iterates up to k_max",
        ),
        ("omega0", "finite part of the cutoff-volume expansion fit"),
        ("cutoff_w0", "cutoff volume quadrature"),
        ("t0", "smallest positive entry of singular_support"),
        ("cutoff_window", "2 t0 / 3"),
        (
            "consistency_gap",
            "cutoff volume minus fitted divergent part, at the smallest eps",
        ),
        ("higher_coefficients", "not computed"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    Ok(TraceReport {
        schema_version: SCHEMA_VERSION,
        metric: spec.label(),
        fingerprint: fp,
        singular_support,
        k_max,
        closed_geodesic_lengths: geodesics.geodesics.iter().map(|g| g.length).collect(),
        omega0,
        higher_coefficients: (1..=3)
            .map(|k| HigherCoefficient {
                k,
                value: None,
                status: "not computed".into(),
            })
            .collect(),
        cutoff_w0,
        t0,
        cutoff_window: t0.map(|t| 2.0 * t / 3.0),
        consistency_gap,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn support_examples() {
        assert_eq!(singular_support_from_lengths(&[], 3).unwrap(), vec![0.0]);
        let s = singular_support_from_lengths(&[PI], 3).unwrap();
        let expected = [-3.0 * PI, -2.0 * PI, -PI, 0.0, PI, 2.0 * PI, 3.0 * PI];
        assert_eq!(s.len(), 7);
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(
            singular_support_from_lengths(&[1.0, 2.0], 2).unwrap(),
            vec![-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0]
        );
        assert!(singular_support_from_lengths(&[1.0], 0).is_err());
    }
}
