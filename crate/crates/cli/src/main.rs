use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sctf::config::{ExperimentConfig, ExperimentKind};

/// Runs one semi-classical time-frequency experiment from a TOML config.
#[derive(Debug, Parser)]
#[command(name = "sctf", version)]
struct Args {
    /// Experiment kind; must match `experiment` in the config.
    experiment: ExperimentKind,
    /// Path of the TOML configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = ExperimentConfig::load(&args.config)
        .and_then(|cfg| sctf::run(&cfg, args.experiment, args.out.as_deref()));
    match result {
        Ok(report) => {
            for c in &report.checks {
                println!("{}", c.line());
            }
            for f in &report.failures {
                println!("[FAIL] sub-run: {f}");
            }
            println!(
                "{} {} in {:.1} s",
                report.experiment,
                if report.passed { "passed" } else { "failed" },
                report.wall_clock_seconds
            );
            ExitCode::from(if report.passed { 0 } else { 1 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
