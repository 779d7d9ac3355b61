use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use resolvent_cli::{catalog, combined_code, output_root, run_batch, validate, EXIT_ERROR, EXIT_OK};

#[derive(Parser)]
#[command(name = "resolvent", version, about = "Metric-resolvent experiments and rate-bound checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments; outputs go under $RESOLVENT_OUTPUT_DIR (default: current directory).
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Experiments run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Shrink every distance constant of the rate bounds so they must fail.
        #[arg(long)]
        negative_control: bool,
    },
    /// List builders, rate formulas, checks and problem generators.
    Catalog,
    /// Parse a config and build its scheme without running.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { configs, jobs, negative_control } => {
            let outcomes = run_batch(&configs, jobs, &output_root(), negative_control);
            for o in &outcomes {
                println!("{}", o.summary);
            }
            combined_code(&outcomes)
        }
        Command::Catalog => {
            print!("{}", catalog::catalog());
            EXIT_OK
        }
        Command::Validate { config } => match validate(&config) {
            Ok(msg) => {
                println!("{msg}");
                EXIT_OK
            }
            Err(msg) => {
                eprintln!("{msg}");
                EXIT_ERROR
            }
        },
    };
    ExitCode::from(code as u8)
}
