//! Command-line front end; see `polymer-lab --help`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polymer_lab::experiment::{run, write_outputs, Command, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(name = "polymer-lab", version, about = "Directed polymers in random environment on finite Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// p_n(β), overlap, derivative and martingale mean over a β grid
    FreeEnergy(Flags),
    /// c(f) by cycle root, Perron root and Varadhan integral; c(β, f)
    Lyapunov(Flags),
    /// Integration-by-parts residuals of the environment law
    IbpCheck(Flags),
    /// Monotonicity of p_n, derivative sandwich and small-β bound
    DisorderScan(Flags),
    /// Decay rate of E log Z_n over horizons
    DecayFit(Flags),
    /// c(f) against log Perron root for several potentials
    OracleCompare(Flags),
}

#[derive(Args)]
struct Flags {
    /// Experiment configuration (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the configuration
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    workers: Option<usize>,
    /// Also write SVG plots
    #[arg(long)]
    plot: bool,
}

fn execute(command: Command, flags: &Flags) -> Result<(), ExperimentError> {
    let mut config = ExperimentConfig::from_path(&flags.config)?;
    if let Some(seed) = flags.seed {
        config.seed = seed;
    }
    if flags.workers.is_some() {
        config.workers = flags.workers;
    }
    let output = run(command, &config)?;
    let written = write_outputs(&output, &flags.out, flags.plot)?;
    for e in &written.plot_errors {
        eprintln!("warning: {e}");
    }
    println!("{}", written.table.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        CliCommand::FreeEnergy(f) => (Command::FreeEnergy, f),
        CliCommand::Lyapunov(f) => (Command::Lyapunov, f),
        CliCommand::IbpCheck(f) => (Command::IbpCheck, f),
        CliCommand::DisorderScan(f) => (Command::DisorderScan, f),
        CliCommand::DecayFit(f) => (Command::DecayFit, f),
        CliCommand::OracleCompare(f) => (Command::OracleCompare, f),
    };
    match execute(command, flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polymer-lab {command}: {e}");
            ExitCode::FAILURE
        }
    }
}
