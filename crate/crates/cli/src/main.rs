mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use epi_core::error::EpiError;

use crate::output::Format;

/// Entropy power inequality toolkit for binomial and sum-of-IID families.
#[derive(Parser, Debug)]
#[command(name = "epi", version)]
pub struct Cli {
    /// Working precision in significant decimal digits (at least 20).
    #[arg(long, global = true, default_value_t = 50)]
    pub precision: u32,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format; tabular commands default to csv, the rest to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

/// A single `--p` or a uniform grid `--p-min .. --p-max` with `--steps` points.
#[derive(Args, Debug, Clone, Default)]
pub struct PGrid {
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub p_min: Option<String>,
    #[arg(long)]
    pub p_max: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// e^{2H[B(m+n,p)]} - e^{2H[B(m,p)]} - e^{2H[B(n,p)]} at one p.
    Gap {
        #[arg(long, default_value_t = 1)]
        m: u64,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long)]
        p: String,
    },
    /// The gap over a p grid (default 197 points on [0.01, 0.99]).
    Sweep {
        #[arg(long, default_value_t = 1)]
        m: u64,
        #[arg(long, default_value_t = 2)]
        n: u64,
        #[command(flatten)]
        grid: PGrid,
    },
    /// Empirical and formula thresholds n0(p).
    Threshold {
        #[command(flatten)]
        grid: PGrid,
        #[arg(long, default_value_t = 2000)]
        cap: u64,
    },
    /// Gap table for 1 <= m' <= m, 1 <= n' <= n.
    Grid {
        #[arg(long, default_value_t = 6)]
        m: u64,
        #[arg(long, default_value_t = 6)]
        n: u64,
        #[arg(long)]
        p: String,
    },
    /// Moment-based lower bounds on H[B(n,p)] against the exact entropy.
    Bound {
        #[arg(long)]
        p: String,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        l: u32,
    },
    /// Capacitory and triangular discriminations of (B(n,p)+1, B(n,p)).
    Discrimination {
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 1)]
        n: u64,
        /// Number of triangular discriminations to list.
        #[arg(long, default_value_t = 3)]
        l: u32,
        /// Term cap for the series.
        #[arg(long, default_value_t = 10_000)]
        cap: u64,
    },
    /// Coefficient-positivity certificate for a substitution (A, A', B, C, control).
    Certify {
        #[arg(long, default_value = "A")]
        sub: String,
    },
    /// H(X^(n)) - ½ ln(2πe nσ²) for Bernoulli(p) sums at n = 16, 32, .., --n.
    Knessl {
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 4096)]
        n: u64,
        /// Support-size budget for exact convolution.
        #[arg(long, default_value_t = epi_core::asymptotics::DEFAULT_SUPPORT_BUDGET)]
        cap: u64,
    },
    /// Differential entropy of the Gaussian-smoothed sum S^(n).
    Smooth {
        #[arg(long)]
        p: String,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        sigma: String,
        /// Absolute quadrature tolerance.
        #[arg(long, default_value = "1e-10")]
        tol: String,
    },
    /// Smoothed-entropy increments for n = --m ..= --n against ½ln(n/(n-1)) and ln(n/(n-1)).
    Tulino {
        #[arg(long)]
        p: String,
        #[arg(long, default_value = "0.001")]
        sigma: String,
        #[arg(long, default_value_t = 8)]
        m: u64,
        #[arg(long, default_value_t = 64)]
        n: u64,
        #[arg(long, default_value = "1e-10")]
        tol: String,
    },
    /// Run a named recipe: fig1, thresholds, certifyA, certifyA', certifyB, certifyC, knessl, tulino.
    Preset { name: String },
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<EpiError> for Failure {
    fn from(e: EpiError) -> Self {
        let code = match e {
            EpiError::InvalidProbability(_)
            | EpiError::Domain(_)
            | EpiError::InvalidArgument(_)
            | EpiError::InvalidPmf(_)
            | EpiError::PrecisionMismatch { .. }
            | EpiError::InfiniteDivergence(_) => 2,
            EpiError::BudgetExceeded(_) | EpiError::SeriesTruncated { .. } | EpiError::Quadrature(_) => 3,
            EpiError::Consistency(_) => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("epi: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
