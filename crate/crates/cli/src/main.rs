//! `unravel` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 property violation, 4 budget exceeded.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use unravel::{Error, Tolerances};

/// Relative entropies of quantum states and their classical realizations.
#[derive(Debug, Parser)]
#[command(name = "unravel", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random stream; recorded in the output metadata.
    #[arg(long, global = true, env = "UNRAVEL_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Max |M - M^dag| accepted for input matrices.
    #[arg(long, global = true, value_name = "TOL")]
    pub herm_tol: Option<f64>,
    /// Max |Tr rho - 1| accepted for input states.
    #[arg(long, global = true, value_name = "TOL")]
    pub trace_tol: Option<f64>,
    /// Most negative eigenvalue accepted for input states.
    #[arg(long, global = true, value_name = "TOL")]
    pub psd_tol: Option<f64>,
    /// Eigenvalues at or below this make a state non-faithful.
    #[arg(long, global = true, value_name = "TOL")]
    pub faithful_tol: Option<f64>,
}

impl GlobalArgs {
    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            herm: self.herm_tol.unwrap_or(d.herm),
            trace: self.trace_tol.unwrap_or(d.trace),
            psd: self.psd_tol.unwrap_or(d.psd),
            faithful: self.faithful_tol.unwrap_or(d.faithful),
            ..d
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Umegaki, Belavkin-Staszewski and unravel relative entropies of a state pair.
    Entropy {
        rho: PathBuf,
        sigma: PathBuf,
        #[arg(long, value_enum, default_value_t = Which::All)]
        which: Which,
        #[arg(long, value_enum, default_value_t = Base::Nats)]
        base: Base,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Common basis and dual basis of a state pair, as JSON.
    CommonBasis {
        rho: PathBuf,
        sigma: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// All three entropies on random faithful pairs; CSV rows plus a JSON summary on stdout.
    HaarExperiment {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// D_BS(rho_t || sigma_t) along a Lindblad flow on an even time grid.
    Contraction {
        model: PathBuf,
        rho: PathBuf,
        sigma: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        t_max: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        /// Allowed per-step increase before the scan counts as a violation.
        #[arg(long, default_value_t = unravel::dynamics::CONTRACTION_SLACK, allow_hyphen_values = true)]
        slack: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact large-deviation rates for an experiment file.
    Ldp {
        experiment: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Umegaki,
    Bs,
    Unr,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Base {
    Nats,
    Bits,
}

/// Failure of a command, mapped to an exit code.
#[derive(Debug)]
pub enum Failure {
    Library(Error),
    Io(String),
    /// A checked property did not hold; the report has already been written.
    Property(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Library(Error::BudgetExceeded { .. }) => 4,
            Failure::Library(_) | Failure::Io(_) => 2,
            Failure::Property(_) => 3,
        }
    }

    fn report(&self) -> serde_json::Value {
        match self {
            Failure::Library(e) => json!({ "kind": e.kind(), "message": e.to_string() }),
            Failure::Io(msg) => json!({ "kind": "Io", "message": msg }),
            Failure::Property(msg) => json!({ "kind": "PropertyViolation", "message": msg }),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.report());
            ExitCode::from(failure.exit_code())
        }
    }
}
