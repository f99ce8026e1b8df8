//! Command-line front end:
//! `cglp <analyze|tune|hosidf|simulate|validate> --config <path> [flags]`.
//!
//! Exit codes: 0 success, 1 other error, 2 infeasible tuning,
//! 3 failed validation, 4 configuration or usage error.

mod commands;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use validate::{run_validation, CheckOutcome, ValidationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cglp", version, about = "Robust CgLp reset control: analysis, tuning and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON project configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory. Defaults to the config's `out_dir`, then $CGLP_OUT_DIR, then `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TuneMode {
    Linear,
    Cglp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ControllerKind {
    Cglp,
    Linear,
    Nonrobust,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Cglp => "cglp",
            ControllerKind::Linear => "linear",
            ControllerKind::Nonrobust => "nonrobust",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    Step,
    Sine,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Bode data of the plant, the controller elements and the open loops.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Comma-separated κ values; the config's list when absent.
        #[arg(long, value_delimiter = ',')]
        kappa: Vec<f64>,
    },
    /// Robust tuning of the linear or the CgLp controller.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "cglp")]
        mode: TuneMode,
        /// Write every evaluated CgLp candidate to `cglp_trace.csv`.
        #[arg(long)]
        trace: bool,
    },
    /// Higher-order harmonics and pseudo-sensitivities of the CgLp loop.
    Hosidf {
        #[command(flatten)]
        common: Common,
        /// Highest harmonic, also used as the truncation of the pseudo-sensitivities.
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        kappa: Vec<f64>,
    },
    /// Closed-loop step or sine simulations over κ.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated controllers; all three when absent.
        #[arg(long = "controller", value_enum, value_delimiter = ',')]
        controllers: Vec<ControllerKind>,
        #[arg(long, value_enum, default_value = "step")]
        input: InputKind,
        /// Sine frequency in Hz.
        #[arg(long)]
        freq: Option<f64>,
        /// Comma-separated κ values; an even grid over [1, κ̄] when absent.
        #[arg(long, value_delimiter = ',')]
        kappa: Vec<f64>,
        /// Keep every n-th sample in trace CSVs.
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Acceptance checks; exits 3 when any fails.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

/// Exit code for an error that ends a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_FAILURE,
    }
}

pub fn run(cli: Cli) -> i32 {
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}
