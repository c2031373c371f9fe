//! Batch front-end for the `thetaflow` engine: reads a TOML job config, runs one
//! job and writes `report.json` plus job-specific artifacts into an output directory.

pub mod config;
pub mod error;
pub mod jobs;
pub mod json;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

pub use config::{JobConfig, JobKind};
pub use error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "THETA_FLOW_THREADS";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub job: JobKind,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    job: &'static str,
    version: &'static str,
    config_fingerprint: String,
    metric: String,
    metric_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    result: &'a Value,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out: PathBuf,
    pub lines: Vec<String>,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(&path, contents).map_err(|e| CliError::Io { path, source: e })
}

/// Output directory: `--out`, else `output` in the config, else `./out`.
pub fn output_dir(opts: &RunOptions, cfg: Option<&JobConfig>) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(opts: &RunOptions, cfg: &mut JobConfig) -> Result<RunSummary, CliError> {
    if let Some(seed) = opts.seed {
        cfg.seed = Some(seed);
    }
    cfg.validate(opts.job)?;
    let spec = cfg.spec()?;
    let seed = cfg.seed.unwrap_or(0);
    let threads = opts.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config {
            field: "threads".into(),
            message: e.to_string(),
        })?;
    let outcome = pool.install(|| jobs::run_job(opts.job, cfg, &spec, seed))?;

    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        job: opts.job.name(),
        version: thetaflow::VERSION,
        config_fingerprint: cfg.fingerprint(),
        metric: spec.label(),
        metric_fingerprint: spec.fingerprint(),
        seed: cfg.seed,
        result: &outcome.result,
    };
    let out = output_dir(opts, Some(cfg));
    fs::create_dir_all(&out).map_err(|e| CliError::Io {
        path: out.clone(),
        source: e,
    })?;
    for (name, body) in &outcome.files {
        write(&out, name, body)?;
    }
    write(
        &out,
        "report.json",
        &json::to_string(&envelope).expect("report serializes"),
    )?;
    let _ = fs::remove_file(out.join("error.json"));
    let mut lines = vec![format!("{} on {}", opts.job.name(), spec.label())];
    lines.extend(outcome.summary);
    lines.push(format!("wrote {}", out.join("report.json").display()));
    Ok(RunSummary { out, lines })
}

/// Run one job. On failure an `error.json` record is also written to the output
/// directory when it can be created.
pub fn run(opts: &RunOptions) -> Result<RunSummary, CliError> {
    let loaded = JobConfig::load(&opts.config);
    let result = match loaded {
        Ok(mut cfg) => execute(opts, &mut cfg).map_err(|e| (e, output_dir(opts, Some(&cfg)))),
        Err(e) => Err((e, output_dir(opts, None))),
    };
    result.map_err(|(e, out)| {
        if fs::create_dir_all(&out).is_ok() {
            let _ = fs::write(
                out.join("error.json"),
                json::to_string(&e.record()).expect("record serializes"),
            );
        }
        e
    })
}

/// `--threads`, else the environment fallback, else rayon's default.
pub fn resolve_threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| CliError::Config {
            field: THREADS_ENV.into(),
            message: format!("not a thread count: {v:?}"),
        }),
        Err(_) => Ok(None),
    }
}
