mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;

use config::{Experiment, ExperimentConfig, Plan};

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Run a line-level key-exchange experiment and write CSV reports plus a
/// PASS/FAIL summary.
#[derive(Debug, Parser)]
#[command(name = "kljn-lab", version)]
struct Args {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `experiment` in the config.
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
}

fn load(args: &Args) -> Result<(ExperimentConfig, Plan)> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out.clone();
    }
    if args.experiment.is_some() {
        cfg.experiment = args.experiment;
    }
    cfg.resolve()
}

fn execute(resolved: &ExperimentConfig, plan: &Plan) -> Result<bool> {
    std::fs::create_dir_all(&plan.output_dir).with_context(|| format!("creating {}", plan.output_dir.display()))?;
    std::fs::write(plan.output_dir.join("effective_config.toml"), resolved.to_toml()?)?;
    let report = experiments::run(plan)?;
    experiments::write_summary(&plan.output_dir.join("summary.txt"), plan, &report)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(report.pass())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (resolved, plan) = match load(&args) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("usage error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match execute(&resolved, &plan) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed; see {}", plan.output_dir.join("summary.txt").display());
            ExitCode::from(EXIT_CHECK_FAILED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CHECK_FAILED)
        }
    }
}
