//! `symlind`: command-line front end for quadratic Lindblad dynamics in
//! phase space. JSON config in, CSV/JSON artifacts out.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::PositivityFlags;
use config::RunConfig;
use failure::Failure;
use output::Output;

#[derive(Parser)]
#[command(name = "symlind", version, about = "Exact phase-space evolution of quadratic open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (written atomically); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Regime, α, σ and timescales of a system.
    Classify,
    /// Positivity threshold of a system, or the uniform-field sweep.
    Positivity {
        /// Tabulate thresholds over the D″ sweep instead.
        #[arg(long)]
        sweep: bool,
        /// Exit with status 3 when the threshold is not reached.
        #[arg(long)]
        require_reached: bool,
        /// Uniform-field and photon-bath threshold tables as one CSV.
        #[arg(long = "paper-table", conflicts_with = "sweep")]
        threshold_table: bool,
    },
    /// Wigner function (or chord function) of an evolved state on a grid.
    Evolve,
    /// Purity and linear entropy over time.
    Entropy,
    /// Euler–Maruyama ensemble and its comparison with the exact moments.
    Langevin,
    /// Recover the initial chord function from an evolved one.
    Reconstruct,
    /// Distances between the exact propagator and the reference solvers.
    OracleCompare,
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => serde_json::from_str("{}").map_err(|e| Failure::Config(e.to_string()))?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli)?;
    let out = Output::new(cfg.out.clone());
    match &cli.command {
        Command::Classify => commands::classify(&cfg, &out),
        Command::Positivity {
            sweep,
            require_reached,
            threshold_table,
        } => {
            let flags = PositivityFlags {
                sweep: *sweep,
                require_reached: *require_reached,
                threshold_table: *threshold_table,
            };
            commands::positivity(&cfg, &flags, &out)
        }
        Command::Evolve => commands::evolve(&cfg, &out),
        Command::Entropy => commands::entropy(&cfg, &out),
        Command::Langevin => commands::langevin(&cfg, &out),
        Command::Reconstruct => commands::reconstruct_cmd(&cfg, &out),
        Command::OracleCompare => commands::oracle_compare(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("symlind: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
