use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use platefit::Result;

mod commands;
mod config;
mod manifest;

use commands::Context;
use config::Loaded;

/// Concentrated-load placement and strain-direction analysis for sandwich plates.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "platefit.toml")]
    config: PathBuf,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    /// Seeds coordinate-descent restarts and target noise
    seed: Option<u64>,
    /// Outer search: exhaustive or coordinate-descent.
    #[arg(long, global = true)]
    strategy: Option<String>,
    #[arg(long, global = true, value_enum)]
    solver: Option<Solver>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Solver {
    Exact,
    Simplex,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the model under the configured loads; write displacements and strains.
    Solve,
    /// Compute the compliance matrix of all candidate nodes.
    Sweep,
    /// Choose three loads that best reproduce the target field.
    Optimize,
    /// Direction field, trajectories and comparison report under the optimized loads.
    Analyze,
    /// Compare two field files.
    Compare,
    /// Write a synthetic target field.
    GenerateTarget,
}

fn context(cli: &Cli) -> Result<Context> {
    let mut loaded = Loaded::read(&cli.config)?;
    let mut overrides = BTreeMap::new();
    let c = &mut loaded.config;
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    if let Some(s) = cli.seed {
        c.seed = Some(s);
        overrides.insert("seed".into(), s.to_string());
    }
    if let Some(s) = &cli.strategy {
        c.optimize.strategy = s.clone();
        overrides.insert("strategy".into(), s.clone());
    }
    if let Some(s) = cli.solver {
        let name = match s {
            Solver::Exact => "exact",
            Solver::Simplex => "simplex",
        };
        c.optimize.solver = name.into();
        overrides.insert("solver".into(), name.into());
    }
    let out = match &cli.out {
        Some(o) => o.clone(),
        None => loaded.resolve(&loaded.config.out),
    };
    Ok(Context { loaded, out, overrides })
}

fn run(cli: &Cli) -> Result<()> {
    let ctx = context(cli)?;
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Sweep => commands::sweep(&ctx),
        Command::Optimize => commands::optimize(&ctx),
        Command::Analyze => commands::analyze(&ctx),
        Command::Compare => commands::compare_fields(&ctx),
        Command::GenerateTarget => commands::generate_target(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
