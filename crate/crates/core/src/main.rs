use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use convdiff::app;
use convdiff::config::{parse_config, RunConfig, DEFAULT_SEED};
use convdiff::Result;

#[derive(Parser)]
#[command(name = "convdiff", version, about = "2D convection-diffusion solver with rho-stable time schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides output.dir from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the configured problem and write norms.csv and snapshots.
    Run { config: PathBuf },
    /// Run the built-in operator, solver and envelope checks.
    Check,
    /// Run the [experiment] section of a config and write report.csv.
    Sweep { config: PathBuf },
}

fn load(cli: &Cli, path: &PathBuf) -> Result<(RunConfig, PathBuf)> {
    let mut config = parse_config(&std::fs::read_to_string(path)?)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let dir = cli.output_dir.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    Ok((config, dir))
}

fn execute(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Run { config } => {
            let (config, dir) = load(cli, config)?;
            let summary = app::run(&config, &dir)?;
            if !cli.quiet {
                let r = &summary.report;
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
                println!(
                    "{} sigma={} tau={} steps={} max_ratio={} violations={} blown_up={}",
                    r.kind.name(),
                    r.sigma,
                    r.tau,
                    r.steps_completed,
                    r.max_ratio(),
                    r.violations,
                    r.blown_up
                );
                println!("wrote {} files to {}", summary.files.len(), dir.display());
            }
            Ok(true)
        }
        Command::Sweep { config } => {
            let (config, dir) = load(cli, config)?;
            let path = app::sweep(&config, &dir)?;
            if !cli.quiet {
                println!("wrote {}", path.display());
            }
            Ok(true)
        }
        Command::Check => {
            let outcomes = app::check(cli.seed.unwrap_or(DEFAULT_SEED))?;
            let ok = outcomes.iter().all(|c| c.passed);
            if !cli.quiet {
                for c in &outcomes {
                    println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                }
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
