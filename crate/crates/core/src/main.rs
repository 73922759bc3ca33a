use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dvr::cli::{run_scenario, run_sweep, Overrides};
use dvr::policy::Policy;

/// Simulate multi-vehicle routing under Poisson demand.
#[derive(Debug, Parser)]
#[command(name = "dvr", version)]
struct Args {
    /// Scenario file (`key = value` lines).
    #[arg(long)]
    scenario: PathBuf,
    /// Run this single seed instead of the file's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Control policy: nc or sb.
    #[arg(long)]
    policy: Option<Policy>,
    /// Arrival rate.
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of agents.
    #[arg(long)]
    agents: Option<usize>,
    /// Simulated time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Decision step.
    #[arg(long)]
    dt: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the scenario's sweep grid and write sweep.csv.
    #[arg(long)]
    sweep: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        policy: args.policy,
        lambda: args.lambda,
        agents: args.agents,
        horizon: args.horizon,
        dt: args.dt,
        out: args.out,
    };
    let code = if args.sweep {
        run_sweep(&args.scenario, &overrides)
    } else {
        run_scenario(&args.scenario, &overrides)
    };
    ExitCode::from(code as u8)
}
