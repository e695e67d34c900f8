//! Command-line front end: instance files in, analysis reports out.
//!
//! Exit codes: 0 success, 1 a `verify` check failed, 2 unreadable or
//! malformed input, 3 input that parses but violates a hypothesis,
//! 4 an operation the state space does not support.

pub mod checks;
pub mod commands;
pub mod instance;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl CliError {
    pub fn parse(location: &str, message: impl Into<String>) -> Self {
        CliError::Parse {
            location: location.to_string(),
            message: message.into(),
        }
    }

    pub fn in_file(self, path: &std::path::Path) -> Self {
        match self {
            CliError::Parse { location, message } => CliError::Parse {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Unsupported(_) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Which {
    Dp,
    DpStar,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Output format.
    #[arg(long, value_enum, default_value = "text", global = true)]
    pub format: Format,
    /// Tolerance for inequality checks (bounds, implied coefficients).
    #[arg(long, default_value_t = 1e-9, global = true)]
    pub tolerance: f64,
    /// Power-trail cap used by the ergodicity classification.
    #[arg(long, default_value_t = 64, global = true)]
    pub max_power: usize,
    /// Largest n0 scanned by the certificate search.
    #[arg(long, default_value_t = 200, global = true)]
    pub n0_cap: usize,
    /// Seed for random companions and corpora.
    #[arg(long, default_value_t = 1, global = true)]
    pub seed: u64,
    /// Include per-stage wall time (makes output nondeterministic).
    #[arg(long, global = true)]
    pub timings: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            format: Format::Text,
            tolerance: 1e-9,
            max_power: 64,
            n0_cap: 200,
            seed: 1,
            timings: false,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ergo", version, about = "Ergodicity coefficients, spectral rates and Doeblin certificates")]
pub struct Cli {
    #[command(flatten)]
    pub options: Options,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate an instance and report coefficients, spectrum, verdict and rates.
    Analyze { path: PathBuf },
    /// Search for Doeblin certificates.
    Doeblin {
        path: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        which: Which,
    },
    /// Check the spectral-radius bound for a Kronecker product of two instances.
    Tensor { left: PathBuf, right: PathBuf },
    /// Run every check over a random corpus.
    Verify {
        /// Instances per dimension.
        #[arg(long, default_value_t = 50)]
        count: usize,
        /// Dimensions, as `lo..hi` (inclusive) or a comma list.
        #[arg(long, default_value = "2..6", value_parser = parse_dims)]
        dims: Dims,
        /// Break the generator's projections (harness self-test).
        #[arg(long, hide = true)]
        corrupt_generator: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims(pub Vec<usize>);

pub fn parse_dims(s: &str) -> Result<Dims, String> {
    let bad = || format!("'{s}' is not a dimension range like 2..6 or 2,3,4");
    let dims: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if dims.is_empty() || dims.contains(&0) {
        return Err(bad());
    }
    Ok(Dims(dims))
}

/// Rendered output plus the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub text: String,
    pub code: u8,
}

pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let o = &cli.options;
    match &cli.command {
        Command::Analyze { path } => commands::analyze(path, o),
        Command::Doeblin { path, which } => commands::doeblin(path, *which, o),
        Command::Tensor { left, right } => commands::tensor(left, right, o),
        Command::Verify {
            count,
            dims,
            corrupt_generator,
        } => Ok(commands::verify(*count, &dims.0, *corrupt_generator, o)),
    }
}
