use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use graphfold::cli::{run, tolerance_from_env, Command, EXIT_INPUT};

/// Partition tight-binding graphs and check the projected center problem.
#[derive(Debug, Parser)]
#[command(name = "graphfold", version)]
struct Args {
    /// Print the report as JSON instead of a table.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Check every full eigenpair against the projected center matrix.
    Verify { file: PathBuf },
    /// Eigenvalues of the full graph.
    Spectrum { file: PathBuf },
    /// Root self-energies and projected eigenvalues at a fixed energy.
    Effective {
        #[arg(long, allow_negative_numbers = true)]
        energy: f64,
        file: PathBuf,
    },
    /// Uniform chain cut into two branches and a center.
    ChainDemo {
        #[arg(long = "Na")]
        n_a: usize,
        #[arg(long = "Nc")]
        n_c: usize,
        #[arg(long = "Nb")]
        n_b: usize,
        /// Mode number of the full-chain eigenstate.
        #[arg(long = "n")]
        mode: usize,
    },
    /// Ring of 2N sites with leads, at incident energy -2 cos k.
    RingDemo {
        #[arg(long = "N")]
        n: usize,
        #[arg(long, allow_negative_numbers = true)]
        k: f64,
    },
}

impl From<Sub> for Command {
    fn from(sub: Sub) -> Self {
        match sub {
            Sub::Verify { file } => Command::Verify { file },
            Sub::Spectrum { file } => Command::Spectrum { file },
            Sub::Effective { energy, file } => Command::Effective { file, energy },
            Sub::ChainDemo { n_a, n_c, n_b, mode } => Command::ChainDemo { n_a, n_c, n_b, mode },
            Sub::RingDemo { n, k } => Command::RingDemo { n, k },
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let tol = match tolerance_from_env() {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("graphfold: {msg}");
            return ExitCode::from(EXIT_INPUT as u8);
        }
    };
    let report = run(&Command::from(args.command), tol);
    if let Some(msg) = report.error() {
        eprintln!("graphfold: {msg}");
    }
    if args.json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.to_table());
    }
    ExitCode::from(report.exit_code as u8)
}
