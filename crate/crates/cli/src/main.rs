use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use wong_reduce::{execute, Invocation, Subcommand};

/// Symmetry-reduction experiments driven by a TOML config.
#[derive(Parser)]
#[command(name = "wong-reduce", version)]
struct Cli {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Run config (TOML), or the manifest.json of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WONG_REDUCE_LOG", "warn")).init();
    let cli = Cli::parse();
    let inv = Invocation {
        subcommand: cli.subcommand,
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
    };
    match execute(&inv) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
