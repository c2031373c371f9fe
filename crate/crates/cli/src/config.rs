//! Job configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thetaflow::escape::{ScanGrid, SearchParams};
use thetaflow::flow::IntegratorConfig;
use thetaflow::metric::{MetricKind, MetricSpec};
use thetaflow::quadrature::QuadratureParams;
use thetaflow::renorm::{EpsGrid, FitOptions};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Flow,
    Closed,
    Convexity,
    Rvol,
    Indicial,
    Report,
}

impl JobKind {
    pub fn name(self) -> &'static str {
        match self {
            JobKind::Flow => "flow",
            JobKind::Closed => "closed",
            JobKind::Convexity => "convexity",
            JobKind::Rvol => "rvol",
            JobKind::Indicial => "indicial",
            JobKind::Report => "report",
        }
    }

    /// Whether the job draws random numbers and therefore needs a seed.
    pub fn needs_seed(self, cfg: &JobConfig) -> bool {
        match self {
            JobKind::Flow => cfg.flow.random > 0,
            JobKind::Closed | JobKind::Convexity | JobKind::Report => true,
            JobKind::Rvol | JobKind::Indicial => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<JobKind>,
    pub metric: MetricKind,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub eps_grid: EpsGrid,
    /// Not part of the fingerprint.
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub flow: FlowJob,
    #[serde(default)]
    pub closed: SearchParams,
    #[serde(default)]
    pub convexity: ConvexityJob,
    #[serde(default)]
    pub rvol: RvolJob,
    #[serde(default)]
    pub indicial: IndicialJob,
    #[serde(default)]
    pub report: ReportJob,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialCondition {
    pub rho: f64,
    #[serde(default)]
    pub w: Vec<f64>,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub u: Vec<f64>,
    #[serde(default)]
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowJob {
    pub s_max: f64,
    pub initial: Vec<InitialCondition>,
    /// Extra seeded starts on `{G = 1}`.
    pub random: usize,
    pub rho_range: [f64; 2],
    /// Rescale explicit initial fibers to `G = 1`.
    pub normalize: bool,
}

impl Default for FlowJob {
    fn default() -> Self {
        Self {
            s_max: 10.0,
            initial: Vec::new(),
            random: 0,
            rho_range: [0.05, 0.95],
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvexityJob {
    pub scan: ScanGrid,
    /// Random collar orbits whose turning points are checked after the scan.
    pub orbits: usize,
    pub s_max: f64,
}

impl Default for ConvexityJob {
    fn default() -> Self {
        Self {
            scan: ScanGrid::default(),
            orbits: 0,
            s_max: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RvolJob {
    pub quadrature: QuadratureParams,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndicialJob {
    /// Defaults to the metric's `n`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub log_range: [f64; 2],
    /// Two radial interval counts used to measure the convergence order.
    pub intervals: [usize; 2],
}

impl Default for IndicialJob {
    fn default() -> Self {
        Self {
            n: None,
            log_range: [-2.0, 0.0],
            intervals: [20, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportJob {
    pub k_max: usize,
    /// Defaults to the `eps_grid` points.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
}

impl Default for ReportJob {
    fn default() -> Self {
        Self {
            k_max: 3,
            eps_list: None,
        }
    }
}

impl JobConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config {
            field: String::new(),
            message: e.to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            CliError::Config {
                field: if field == "." { String::new() } else { field },
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml(&text)
    }

    pub fn spec(&self) -> Result<MetricSpec, CliError> {
        MetricSpec::new(self.metric.clone()).map_err(|e| CliError::Config {
            field: "metric".into(),
            message: e.to_string(),
        })
    }

    /// Checks that do not need the metric to be evaluated.
    pub fn validate(&self, job: JobKind) -> Result<(), CliError> {
        let bad = |field: &str, message: String| {
            Err(CliError::Config {
                field: field.into(),
                message,
            })
        };
        if let Some(declared) = self.job {
            if declared != job {
                return bad(
                    "job",
                    format!(
                        "config declares job `{}` but `{}` was requested",
                        declared.name(),
                        job.name()
                    ),
                );
            }
        }
        if let Err(e) = self.integrator.validate() {
            return bad("integrator", e.to_string());
        }
        if let Err(e) = self.eps_grid.points() {
            return bad("eps_grid", e.to_string());
        }
        if job.needs_seed(self) && self.seed.is_none() {
            return bad(
                "seed",
                format!(
                    "job `{}` is randomized and needs an explicit seed",
                    job.name()
                ),
            );
        }
        if !(self.flow.s_max.is_finite() && self.flow.s_max != 0.0) {
            return bad("flow.s_max", "must be finite and nonzero".into());
        }
        if self.report.k_max < 1 {
            return bad("report.k_max", "must be at least 1".into());
        }
        if self.indicial.intervals[0] < 4
            || self.indicial.intervals[1] <= self.indicial.intervals[0]
        {
            return bad("indicial.intervals", "need 4 <= first < second".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn fingerprint(&self) -> String {
        let json = crate::json::to_canonical(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[metric]\nkind = \"model\"\nn = 1\n";

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = JobConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.metric, MetricKind::Model { n: 1 });
        assert_eq!(cfg.integrator, IntegratorConfig::default());
        assert_eq!(cfg.report.k_max, 3);
    }

    #[test]
    fn unknown_keys_name_the_field() {
        let err = JobConfig::from_toml(&format!(
            "{MINIMAL}[integrator]\nrel_tol = 1e-9\nbogus = 1\n"
        ))
        .unwrap_err();
        match err {
            CliError::Config { field, message } => {
                assert_eq!(field, "integrator.bogus");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = JobConfig::from_toml("[metric]\nkind = \"sphere\"\n").unwrap_err();
        assert!(
            matches!(err, CliError::Config { ref field, .. } if field.starts_with("metric")),
            "{err:?}"
        );
    }

    #[test]
    fn seed_required_for_randomized_jobs() {
        let cfg = JobConfig::from_toml(MINIMAL).unwrap();
        assert!(cfg.validate(JobKind::Rvol).is_ok());
        assert!(
            matches!(cfg.validate(JobKind::Closed), Err(CliError::Config { ref field, .. }) if field == "seed")
        );
    }

    #[test]
    fn fingerprint_ignores_output() {
        let a = JobConfig::from_toml(MINIMAL).unwrap();
        let b = JobConfig {
            output: Some("elsewhere".into()),
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = JobConfig {
            seed: Some(1),
            ..a.clone()
        };
        assert_ne!(a.fingerprint(), c.fingerprint());
    }
}
