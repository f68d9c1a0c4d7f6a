use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use noma_cluster::experiment::{emit_gain_dumps, emit_outputs, run_experiment};
use noma_cluster::verify::run_core_properties;
use noma_cluster::{Execution, ExperimentConfig, Policy};

#[derive(Parser)]
#[command(
    name = "noma-sim",
    version,
    about = "Downlink NOMA clustering simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write summary, CDF and manifest files.
    Run(RunArgs),
    /// Run the rate-model property suites.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    drops: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated: oma, mup, amup, near_far, aup2-approx.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<Policy>>,
    #[arg(long, value_delimiter = ',')]
    g_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    beta_values: Option<Vec<f64>>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run drops on the current thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 10_000)]
    cases: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    sequential: bool,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut config = ExperimentConfig::from_json_file(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    if let Some(d) = args.drops {
        config.drops = d;
    }
    if let Some(s) = args.seed {
        config.radio.seed = s;
    }
    if let Some(p) = args.policies {
        config.policies = p;
    }
    if let Some(g) = args.g_values {
        config.g_values = g;
    }
    if let Some(b) = args.beta_values {
        config.beta_values = b;
    }
    if let Some(o) = args.out {
        config.output_dir = Some(o);
    }
    let Some(dir) = config.output_dir.clone() else {
        bail!("no output directory: pass --out or set output_dir in the config");
    };
    config.validate()?;

    let started = Instant::now();
    let table = run_experiment(&config, execution(args.sequential))?;
    let mut files = emit_outputs(&table, &config, &dir)?;
    files.extend(emit_gain_dumps(&config, &dir)?);

    for a in &table.aggregates {
        println!(
            "{:<12} G={:<3} beta={:<6} mean_cse={:.4} samples={}",
            a.policy.name(),
            a.g,
            a.beta,
            a.mean_cse,
            a.cdf.len()
        );
    }
    let d = &table.diagnostics;
    eprintln!(
        "{} drops, {} cells ({} skipped), {} feasibility checks, {} allocation failures in {:.2?}",
        d.drops,
        d.cells_measured,
        d.cells_skipped,
        d.feasibility_checks,
        d.allocation_failures,
        started.elapsed()
    );
    eprintln!("wrote {} files to {}", files.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> ExitCode {
    let outcomes = run_core_properties(args.cases, args.seed, execution(args.sequential));
    let mut ok = true;
    for o in &outcomes {
        let status = if o.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {} ({} cases, {} violations)",
            o.name, o.cases, o.violations
        );
        if let Some(e) = &o.example {
            println!("     first counterexample: {e}");
        }
        ok &= o.passed();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Verify(args) => Ok(verify(args)),
    }
}
