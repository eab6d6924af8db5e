//! Command-line front end for the joint network–attribute model: cohort
//! simulation, model fitting, biomarker detection, cross-modal prediction,
//! method comparison, and latent-network metrics.
//!
//! Every command records a run manifest (inputs, config, seed, output
//! digests); given the same inputs and seed, reruns are byte-identical
//! except for the manifest timestamp. Exit codes: 0 success, 1 validation
//! error (flags, configs, data files), 2 runtime failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;
pub mod svg;

use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "latentsna",
    version,
    about = "Joint Bayesian modeling of weighted networks and nodal attributes"
)]
pub struct Cli {
    /// Override the seed in every config (simulate, fit, predict, compare).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort dataset directory (plus truth.json).
    Simulate {
        /// Cohort configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the joint model to a dataset directory, writing a chain directory.
    Fit {
        /// Input dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Sampler configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output chain directory.
        #[arg(long)]
        out: PathBuf,
        /// Standardize each connectivity edge across subjects before
        /// fitting (otherwise the data must already be standardized).
        #[arg(long)]
        standardize: bool,
        /// Also write per-parameter SVG trace plots.
        #[arg(long)]
        plots: bool,
    },
    /// Credible-interval biomarker report from a fitted chain.
    Detect {
        /// Input chain directory.
        #[arg(long)]
        chain: PathBuf,
        /// Credible level of the equal-tailed intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Output report CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict the missing data block for new subjects.
    Predict {
        /// Training dataset directory (both blocks observed).
        #[arg(long)]
        train: PathBuf,
        /// New-subject directory (the observed block; plus the held-out
        /// block when scoring with --truth).
        #[arg(long)]
        new: PathBuf,
        /// What to predict and how.
        #[arg(long, value_enum)]
        mode: PredictMode,
        /// Sampler configuration (JSON); required except for --mode averaging.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output predictions CSV.
        #[arg(long)]
        out: PathBuf,
        /// Score predictions against the held-out block and write a
        /// -scores companion file.
        #[arg(long)]
        truth: bool,
    },
    /// Run the method-comparison grid and write the aggregate table.
    Compare {
        /// Grid specification (JSON): cohorts, methods, replicates,
        /// sampler, master seed.
        #[arg(long)]
        grid: PathBuf,
        /// Output table CSV (failures go to a -failures companion file).
        #[arg(long)]
        out: PathBuf,
    },
    /// Centrality metrics of the posterior latent network.
    Netstats {
        /// Input chain directory (must have retained latent draws).
        #[arg(long)]
        chain: PathBuf,
        /// Output metrics CSV (shape tests go to a -shape companion file).
        #[arg(long)]
        out: PathBuf,
    },
}

/// Prediction modes: latent-attribute imputation (theta), latent-position
/// readout (z), network imputation (connectivity), and the training-mean
/// baseline (averaging).
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictMode {
    Theta,
    Z,
    Connectivity,
    Averaging,
}

impl PredictMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictMode::Theta => "theta",
            PredictMode::Z => "z",
            PredictMode::Connectivity => "connectivity",
            PredictMode::Averaging => "averaging",
        }
    }
}

/// Entry point used by `main`: parses the process arguments and returns
/// the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parses and dispatches the given argv, returning the exit code. Help and
/// version displays exit 0; usage errors (including unknown flags) print
/// the usage text and exit 1.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let printable: Vec<String> =
        args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(args.iter().cloned()) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { 0 } else { 1 };
        }
    };
    match dispatch(cli, &printable) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Validates LATENTSNA_THREADS. The engine runs single-threaded, so any
/// positive cap is honored trivially; a malformed value is still an error.
fn validate_thread_cap() -> CliResult<()> {
    match std::env::var("LATENTSNA_THREADS") {
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(()),
            _ => Err(CliError::validation(format!(
                "LATENTSNA_THREADS must be a positive integer, got {raw:?}"
            ))),
        },
        Err(_) => Ok(()),
    }
}

fn dispatch(cli: Cli, argv: &[String]) -> CliResult<()> {
    validate_thread_cap()?;
    match cli.command {
        Command::Simulate { config, out } => {
            commands::simulate::run(&config, &out, cli.seed, argv)
        }
        Command::Fit { data, config, out, standardize, plots } => {
            commands::fit::run(&data, &config, &out, standardize, plots, cli.seed, argv)
        }
        Command::Detect { chain, level, out } => commands::detect::run(&chain, level, &out, argv),
        Command::Predict { train, new, mode, config, out, truth } => commands::predict::run(
            &train,
            &new,
            mode,
            config.as_deref(),
            &out,
            truth,
            cli.seed,
            argv,
        ),
        Command::Compare { grid, out } => commands::compare::run(&grid, &out, cli.seed, argv),
        Command::Netstats { chain, out } => commands::netstats::run(&chain, &out, argv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flag_exits_one() {
        assert_eq!(run_from(["latentsna", "detect", "--bogus"]), 1);
    }

    #[test]
    fn missing_subcommand_exits_one() {
        assert_eq!(run_from(["latentsna"]), 1);
    }

    #[test]
    fn help_and_version_exit_zero() {
        assert_eq!(run_from(["latentsna", "--help"]), 0);
        assert_eq!(run_from(["latentsna", "--version"]), 0);
        assert_eq!(run_from(["latentsna", "fit", "--help"]), 0);
    }
}
