use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thetaflow_cli::{resolve_threads, run, CliError, JobKind, RunOptions};

#[derive(Parser, Debug)]
#[command(
    name = "theta-flow",
    version,
    about = "Theta-Hamiltonian flow, closed geodesics and renormalized volumes"
)]
struct Cli {
    #[command(subcommand)]
    job: Job,
}

#[derive(Subcommand, Debug)]
enum Job {
    /// Integrate trajectories and write them as CSV
    Flow(Common),
    /// Search for closed geodesics
    Closed(Common),
    /// Certify the convex collar and check turning points
    Convexity(Common),
    /// Renormalized volume and expansion fit
    Rvol(Common),
    /// Indicial roots of the model Laplacian
    Indicial(Common),
    /// Full trace report
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML job config
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `output` from the config, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to THETA_FLOW_THREADS
    #[arg(long)]
    threads: Option<usize>,
}

fn fail(e: &CliError) -> ExitCode {
    let record = thetaflow_cli::json::to_string(&e.record()).expect("record serializes");
    eprint!("{record}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (job, c) = match cli.job {
        Job::Flow(c) => (JobKind::Flow, c),
        Job::Closed(c) => (JobKind::Closed, c),
        Job::Convexity(c) => (JobKind::Convexity, c),
        Job::Rvol(c) => (JobKind::Rvol, c),
        Job::Indicial(c) => (JobKind::Indicial, c),
        Job::Report(c) => (JobKind::Report, c),
    };
    let threads = match resolve_threads(c.threads) {
        Ok(t) => t,
        Err(e) => return fail(&e),
    };
    let opts = RunOptions {
        job,
        config: c.config,
        out: c.out,
        seed: c.seed,
        threads,
    };
    match run(&opts) {
        Ok(summary) => {
            for line in summary.lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}
