//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, Stage};
use crate::error::CliResult;
use crate::{pipeline, report};

#[derive(Debug, Parser)]
#[command(name = "divfield", version, about = "Weighted divergence solves on rasterized planar domains")]
pub struct Args {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to DIVFIELD_THREADS, then the configuration.
    #[arg(long, global = true, env = "DIVFIELD_THREADS")]
    pub threads: Option<usize>,
    /// Resolutions in cells per unit, overriding the configuration.
    #[arg(long, global = true, value_delimiter = ',')]
    pub resolution: Vec<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Rasterize the domain and compute distances.
    Rasterize,
    /// Build and check the Whitney decomposition.
    Whitney,
    /// Build and check the path family.
    Paths,
    /// Compute the weight.
    Weight,
    /// Solve the divergence equation for f = x1 minus its mean.
    Solve,
    /// Atomic decomposition and the Sobolev solve.
    Sobolev,
    /// Poincare constants, duality and bootstrap checks.
    Poincare,
    /// Every stage, then the report.
    Run,
    /// Summarize an existing output directory.
    Report,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Rasterize => Stage::Rasterize,
            Command::Whitney => Stage::Whitney,
            Command::Paths => Stage::Paths,
            Command::Weight => Stage::Weight,
            Command::Solve => Stage::Solve,
            Command::Sobolev => Stage::Sobolev,
            Command::Poincare | Command::Run => Stage::Poincare,
            Command::Report => return None,
        })
    }
}

/// Configuration after applying command-line overrides.
pub fn resolve_config(args: &Args) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if !args.resolution.is_empty() {
        cfg.resolutions = args.resolution.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(stage) = args.command.stage() {
        cfg.stage = stage;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command; `Ok(false)` means a hard check failed.
pub fn execute(args: Args) -> CliResult<bool> {
    let cfg = resolve_config(&args)?;
    if matches!(args.command, Command::Report) {
        for f in report::write_report(&cfg.out)? {
            println!("{}", f.display());
        }
        return Ok(true);
    }
    let outcome = pipeline::run(&cfg)?;
    if matches!(args.command, Command::Run) {
        report::write_report(&outcome.out)?;
    }
    for f in &outcome.failures {
        eprintln!("FAIL {f}");
    }
    println!("{} files in {}", outcome.files.len(), outcome.out.display());
    Ok(outcome.passed())
}
