//! `hetmol`: build heterogeneous molecular graphs, pretrain, fine-tune and
//! inspect models from the command line.

mod commands;
mod error;
mod options;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::options::{RunConfig, Settings};

#[derive(Debug, Parser)]
#[command(name = "hetmol", version, about = "Heterogeneous molecular graph pretraining and fine-tuning")]
struct Cli {
    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one graph file per molecule and view, plus a manifest.
    BuildHmg(Settings),
    /// Contrastive pretraining across views; writes a checkpoint and loss trace.
    Pretrain(Settings),
    /// Cross-validated property fine-tuning, or pair-interaction training.
    Finetune(Settings),
    /// Per-item scores from a fine-tuned checkpoint as TSV.
    Predict(Settings),
    /// Metric report as JSON, from a checkpoint or a prediction file.
    Eval(Settings),
    /// Attention weights and pooling scores as JSON lines.
    ExportAttention(Settings),
}

fn run(cli: &Cli) -> Result<(), error::CliError> {
    let (settings, action): (&Settings, fn(&RunConfig) -> Result<(), error::CliError>) = match &cli.command {
        Command::BuildHmg(s) => (s, commands::build_hmg),
        Command::Pretrain(s) => (s, commands::cmd_pretrain),
        Command::Finetune(s) => (s, commands::cmd_finetune),
        Command::Predict(s) => (s, commands::cmd_predict),
        Command::Eval(s) => (s, commands::cmd_eval),
        Command::ExportAttention(s) => (s, commands::cmd_export_attention),
    };
    action(&RunConfig::resolve(settings)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
