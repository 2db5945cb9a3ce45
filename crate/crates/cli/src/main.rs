//! Command-line harness for the spectrum-measurement twin.

use std::path::PathBuf;
use std::process::ExitCode;

use bmsm_cli::commands;
use bmsm_cli::config::{self, Config};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bmsm",
    version,
    about = "Broadband microwave spectrum measurement by optical undersampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the optical frequency comb and report its flatness
    Comb(CommonArgs),
    /// Run the full capture and sparse reconstruction
    Simulate(CommonArgs),
    /// Compare the greedy solver against the exhaustive reference on random
    /// sparse instances
    Oracle(CommonArgs),
    /// Sweep a single tone across SNR and locate the detection limit
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file; omit to run the built-in reference scenario
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Restart every seeded random stream from this value
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// `off` disables the ADC quantizer; an integer sets its bit depth
    #[arg(long, value_name = "MODE")]
    quantize: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&Config, &std::path::Path) -> anyhow::Result<()>) =
        match &cli.command {
            Command::Comb(a) => (a, commands::cmd_comb),
            Command::Simulate(a) => (a, commands::cmd_simulate),
            Command::Oracle(a) => (a, commands::cmd_oracle),
            Command::Sweep(a) => (a, commands::cmd_sweep),
        };

    let mut cfg = match &args.config {
        Some(path) => match config::load_config(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(1);
            }
        },
        None => match config::config_from_str("") {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(1);
            }
        },
    };
    if let Some(n) = args.seed {
        config::override_seeds(&mut cfg, n);
    }
    if let Some(q) = &args.quantize {
        if let Err(e) = config::override_quantize(&mut cfg, q) {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    }

    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return ExitCode::from(2);
    }
    match run(&cfg, &args.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
