//! `driftscope`: triage prediction anomalies by ranking features on how much
//! their global importance moved between a control and an anomaly window.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "driftscope", version, about = "Root-cause prediction anomalies by feature importance shift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset scored by a reference model.
    Generate(commands::generate::Args),
    /// Apply a corruption case to a dataset, producing anomaly data.
    Corrupt(commands::corrupt::Args),
    /// Compute the local feature importance matrix and predictions.
    Attribute(commands::attribute::Args),
    /// Rank features by global importance shift between two LFI matrices.
    Rank(commands::rank::Args),
    /// Rank features by model-feature correlation shift (no model needed).
    Mfc(commands::mfc::Args),
    /// Run the corruption benchmark.
    Bench(commands::bench::Args),
    /// Stream examples through the sliding-window monitor.
    Monitor(commands::monitor::Args),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { config::EXIT_CONFIG } else { config::EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => commands::generate::run(a),
        Command::Corrupt(a) => commands::corrupt::run(a),
        Command::Attribute(a) => commands::attribute::run(a),
        Command::Rank(a) => commands::rank::run(a),
        Command::Mfc(a) => commands::mfc::run(a),
        Command::Bench(a) => commands::bench::run(a),
        Command::Monitor(a) => commands::monitor::run(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(config::exit_code(&err))
        }
    }
}
