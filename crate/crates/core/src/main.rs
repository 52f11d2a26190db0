use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wce_nuclear::cli::{error_exit_code, run_analyze, run_condexp, AnalyzeArgs, Example, Format};

/// Nuclearity and compactness of weighted conditional expectation operators.
#[derive(Parser)]
#[command(name = "wce", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify T = M_w E M_u : L^p → L^q.
    Analyze {
        /// JSON config describing the space, the partition and the weights.
        #[arg(long, conflicts_with = "example")]
        config: Option<PathBuf>,
        /// Built-in example instead of a config.
        #[arg(long, value_enum)]
        example: Option<Example>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        /// Number of A-atoms to evaluate.
        #[arg(long)]
        terms: Option<usize>,
        /// Also run the independent numerical checks.
        #[arg(long)]
        oracle: bool,
        /// Write the full report here (JSON, or CSV with --format csv).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Print E(f) block by block for the `f` of a config.
    Condexp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn run(cli: Cli) -> wce_nuclear::Result<i32> {
    match cli.command {
        Command::Analyze {
            config,
            example,
            p,
            q,
            terms,
            oracle,
            report,
            format,
        } => {
            let outcome = run_analyze(&AnalyzeArgs {
                config,
                example,
                p,
                q,
                terms,
                oracle,
            })?;
            print!("{}", outcome.report.render(format)?);
            if let Some(path) = report {
                let file_format = if format == Format::Csv { Format::Csv } else { Format::Json };
                std::fs::write(&path, outcome.report.render(file_format)?)?;
            }
            Ok(outcome.exit_code)
        }
        Command::Condexp { config, format } => {
            print!("{}", run_condexp(&config)?.render(format)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
