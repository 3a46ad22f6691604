use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fimlab::config::OutputFormat;
use fimlab::harness::{self, ConfigSource, Overrides};

#[derive(Parser)]
#[command(name = "fimlab", version, about = "Fisher information / CRLB toolkit for additive-noise models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file or a built-in preset.
    Run(RunArgs),
    /// List the built-in reproduction presets.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Name of a built-in preset (see `fimlab list`).
    #[arg(long)]
    preset: Option<String>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Rayon worker count (results are identical for any value).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file path; defaults to the config's `output`, then to
    /// `$FIMLAB_OUT_DIR/<experiment>-<hash>.<format>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Multiplier applied to all noise-derived tolerances.
    #[arg(long = "tolerance-scale")]
    tolerance_scale: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for preset in harness::list_experiments() {
                println!("{:<28} {}", preset.name, preset.summary);
            }
            ExitCode::SUCCESS
        }
        Command::Run(args) => {
            let source = match (args.config, args.preset) {
                (Some(path), None) => ConfigSource::Path(path),
                (None, Some(name)) => ConfigSource::Preset(name),
                _ => {
                    eprintln!("fimlab: exactly one of --config or --preset is required");
                    return ExitCode::from(1);
                }
            };
            let format = match args.format.as_deref().map(OutputFormat::parse).transpose() {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("fimlab: {e}");
                    return ExitCode::from(1);
                }
            };
            let overrides = Overrides {
                seed: args.seed,
                out: args.out,
                format,
                tolerance_scale: args.tolerance_scale,
                workers: args.workers,
            };
            match harness::run(source, &overrides) {
                Ok(outcome) => ExitCode::from(outcome.exit_code as u8),
                Err(e) => {
                    eprintln!("fimlab: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
