//! Batch runner for the semi-classical time-frequency experiments.
//!
//! A run reads a TOML [`config::ExperimentConfig`], validates it in full,
//! executes the named experiment and writes its CSV tables, SVG plots, a
//! `checks.csv` with every pass/fail flag, the configuration echo
//! `config.toml` and a `report.toml` summary into the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use config::{validate, ExperimentConfig, ExperimentKind};
use error::CliError;
use output::{Check, RunReport, Table};

/// Resolves the output directory: the command-line value wins over the
/// configuration's `output`.
pub fn output_dir(cfg: &ExperimentConfig, cli: Option<&Path>) -> Option<PathBuf> {
    cli.map(Path::to_path_buf).or_else(|| cfg.output.as_ref().map(PathBuf::from))
}

/// Validates `cfg` for `requested`, runs it and writes all artifacts into
/// `out`. Nothing is written when validation fails.
pub fn run(cfg: &ExperimentConfig, requested: ExperimentKind, out: Option<&Path>) -> Result<RunReport, CliError> {
    let mut errors = validate(cfg, requested);
    let dir = output_dir(cfg, out);
    if dir.is_none() {
        errors.push("no output directory: pass --out or set `output`".into());
    }
    if let Some(d) = &dir {
        if d.exists() && !d.is_dir() {
            errors.push(format!("output path {} is not a directory", d.display()));
        }
    }
    if !errors.is_empty() {
        return Err(CliError::Validation(errors));
    }
    let dir = dir.expect("checked above");
    let start = Instant::now();
    let outcome = experiments::execute(cfg)?;
    std::fs::create_dir_all(&dir)?;
    let mut csv = Vec::new();
    for table in &outcome.tables {
        table.write(&dir)?;
        csv.push(table.file_name());
    }
    let mut checks = Table::new("checks", &Check::CSV_HEADER);
    for c in &outcome.checks {
        checks.push(c.cells());
    }
    checks.write(&dir)?;
    csv.push(checks.file_name());
    let mut svg = Vec::new();
    for spec in &outcome.plots {
        let text = plot::emit_plot(&dir.join(format!("{}.csv", spec.table)), spec)?;
        std::fs::write(dir.join(&spec.file), text)?;
        svg.push(spec.file.clone());
    }
    let echo = cfg.to_toml();
    std::fs::write(dir.join("config.toml"), &echo)?;
    let report = RunReport {
        experiment: cfg.experiment.to_string(),
        passed: outcome.passed(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config: echo,
        csv,
        svg,
        failures: outcome.failures,
        checks: outcome.checks,
    };
    std::fs::write(dir.join("report.toml"), report.to_toml())?;
    Ok(report)
}
