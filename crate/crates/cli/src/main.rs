#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;

use commands::{Failure, Outcome};

#[derive(Parser, Debug)]
#[command(
    name = "hyqmom",
    version,
    about = "Moment closures for the 1D BGK equation"
)]
pub struct Cli {
    /// Directory for output files and the run manifest.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Seed for the ChaCha8 sampler.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Relative realizability tolerance on the Hankel pivots.
    #[arg(long, global = true, default_value_t = hyqmom::moment_algebra::DEFAULT_REALIZABILITY_TOL)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct ClosureFlags {
    /// Gauss closure of an even-length vector.
    #[arg(long)]
    qmom: bool,
    /// Hyperbolic closure of an odd-length vector.
    #[arg(long)]
    hyqmom: bool,
    /// Polynomial closure `X^2n - Q_n^2 + Q_(n-1)^2` of an even-length vector.
    #[arg(long = "new")]
    new_closure: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Close a moment vector: print the next moment and its diagnostics.
    Close {
        #[command(flatten)]
        closure: ClosureFlags,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        gamma: f64,
        /// Comma-separated moments M_0,M_1,...
        #[arg(long, allow_hyphen_values = true)]
        moments: String,
    },
    /// Eigenvalues and reconstruction weights of the closed system.
    Spectrum {
        #[arg(long, allow_hyphen_values = true)]
        moments: String,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        gamma: f64,
        /// Use the polynomial closure on an even-length vector.
        #[arg(long = "new")]
        new_closure: bool,
        /// Certify interlacing of the two root sets; exit 3 if it fails.
        #[arg(long)]
        check_interlacing: bool,
    },
    /// Spectra of sampled moment vectors, counting non-hyperbolic samples.
    VerifyHyperbolicity {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        gamma: f64,
        /// Required eigenvalue gap relative to the spectral radius.
        #[arg(long, default_value_t = 1e-7)]
        min_gap: f64,
    },
    /// Structural stability certificates at sampled equilibrium states.
    VerifyStability {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Density range as LO,HI.
        #[arg(long, default_value = "0.1,10")]
        rho: String,
        /// Velocity range as LO,HI.
        #[arg(long, default_value = "-5,5", allow_hyphen_values = true)]
        velocity: String,
        /// Temperature range as LO,HI.
        #[arg(long, default_value = "0.1,10")]
        theta: String,
    },
    /// Run the finite-volume solver from a JSON config.
    Simulate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::dispatch(&cli) {
        Ok(Outcome { code, .. }) => ExitCode::from(code),
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
