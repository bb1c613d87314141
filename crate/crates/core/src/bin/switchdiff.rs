use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use switchdiff::cli::{self, CommandName, Format, RunOptions};

/// Simulate and verify regime-switching diffusions.
#[derive(Parser, Debug)]
#[command(version)]
struct Args {
    command: CommandName,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, env = "SWITCHDIFF_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SWITCHDIFF_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(cli::run::EXIT_CONFIG as u8);
        }
    };
    let mut spec = match cli::parse_config_for(&text, args.command) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(cli::run::EXIT_CONFIG as u8);
        }
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(out) = args.out {
        spec.output.dir = out;
    }
    if let Some(format) = args.format {
        spec.output.format = format;
    }
    if args.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(cli::run::EXIT_CONFIG as u8);
    }
    match cli::run(&spec, &RunOptions { threads: args.threads }) {
        Ok(outcome) => {
            for line in &outcome.messages {
                println!("{line}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
