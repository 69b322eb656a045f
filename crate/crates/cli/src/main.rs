//! `diffpad` command-line tool.

mod commands;
mod config;
mod io;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{BenchArgs, DefendArgs, LocalizeArgs, VerifyBoundArgs};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "diffpad",
    version,
    about = "Diffusion-based adversarial patch localization and removal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Localize and remove a patch; writes the image and a JSON sidecar.
    Defend(DefendArgs),
    /// Localize only and print the detected box as JSON.
    Localize(LocalizeArgs),
    /// Monte-Carlo check of the restoration bound on Gaussian data.
    VerifyBound(VerifyBoundArgs),
    /// Run the synthetic patch suite over a directory and write a CSV report.
    Bench(BenchArgs),
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("DIFFPAD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("DIFFPAD_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err.chain().any(|e| {
        e.downcast_ref::<diffpad::Error>()
            .is_some_and(|e| e.is_numerical())
    });
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let run = || -> anyhow::Result<()> {
        configure_threads()?;
        match &cli.command {
            Command::Defend(a) => commands::defend(a),
            Command::Localize(a) => commands::localize_cmd(a),
            Command::VerifyBound(a) => commands::verify_bound(a),
            Command::Bench(a) => commands::bench(a),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
