use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use qtcl::bath::fmt17;
use qtcl::cli::{self, RunConfig, RunSummary};
use qtcl::Error;

/// Open-quantum-system propagation with element projectors and iterative
/// restarts.
#[derive(Parser)]
#[command(name = "qtcl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run described by a configuration file.
    Run {
        /// Path to the `key = value` configuration document.
        config: PathBuf,
        /// Print the fully resolved configuration and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Reproduce the single-qubit comparison (traditional, iterative and
    /// Markovian solutions).
    Fig1 {
        /// Output directory for the CSV files.
        #[arg(long, default_value = "fig1_out")]
        out: PathBuf,
    },
    /// Reproduce the two-qubit comparison.
    Fig2 {
        #[arg(long, default_value = "fig2_out")]
        out: PathBuf,
    },
    /// Tabulate the bath kernels for a configuration and dump them as CSV.
    Kernels {
        config: PathBuf,
    },
}

fn error_category(err: &Error) -> (&'static str, u8) {
    match err {
        Error::Io(_) => ("io", 4),
        Error::Integration { .. }
        | Error::KernelBuild { .. }
        | Error::Coverage { .. }
        | Error::Divergence { .. }
        | Error::GridMismatch => ("solver", 3),
        _ => ("parse", 2),
    }
}

fn load_config(path: &PathBuf) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    cli::parse_config(&text)
}

fn report(summary: &RunSummary) {
    for warning in &summary.warnings {
        eprintln!("warning: {warning}");
    }
    for file in &summary.files {
        eprintln!("wrote {}", file.display());
    }
    if let Some(dev) = summary.max_abs_deviation {
        println!("max_abs_deviation={}", fmt17(dev));
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, dump_config } => {
            let cfg = load_config(&config)?;
            if dump_config {
                print!("{}", cfg.dump());
                return Ok(());
            }
            report(&cli::run(&cfg)?);
        }
        Command::Fig1 { out } => {
            std::fs::create_dir_all(&out)?;
            report(&cli::run(&cli::fig1_config(&out))?);
        }
        Command::Fig2 { out } => {
            std::fs::create_dir_all(&out)?;
            report(&cli::run(&cli::fig2_config(&out))?);
        }
        Command::Kernels { config } => {
            let cfg = load_config(&config)?;
            report(&cli::dump_kernels(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (category, code) = error_category(&err);
            let detail = err.to_string().replace('\n', " ");
            eprintln!("error={category}:{detail}");
            ExitCode::from(code)
        }
    }
}
