use serde::Serialize;
use thiserror::Error;

/// Errors produced by the numerical library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no sign change in bracket [{lo}, {hi}] (residuals {f_lo}, {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root finder did not converge after {iterations} iterations (x = {x}, residual = {residual})")]
    NoConvergence { x: f64, residual: f64, iterations: usize },

    #[error(
        "epsilon {epsilon} is infeasible: need epsilon > E'/E'_Q = {required}{}",
        min_feasible.map(|m| format!(" (smallest feasible epsilon ~ {m})")).unwrap_or_default()
    )]
    InfeasibleEpsilon {
        epsilon: f64,
        required: f64,
        min_feasible: Option<f64>,
    },

    #[error("no feasible epsilon among {tried:?}")]
    NoFeasibleEpsilon { tried: Vec<f64> },

    #[error("degenerate manifold: the tangential energy gradient vanishes identically")]
    DegenerateManifold,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("low acceptance: {accepted} of {requested} samples accepted (rate {rate:.3e})")]
    LowAcceptance {
        accepted: usize,
        requested: usize,
        rate: f64,
    },
}

impl Error {
    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSpectrum(_) => "invalid_spectrum",
            Error::Domain(_) => "domain",
            Error::NoSignChange { .. } => "no_sign_change",
            Error::NoConvergence { .. } => "no_convergence",
            Error::InfeasibleEpsilon { .. } => "infeasible_epsilon",
            Error::NoFeasibleEpsilon { .. } => "no_feasible_epsilon",
            Error::DegenerateManifold => "degenerate_manifold",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::LowAcceptance { .. } => "low_acceptance",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind().to_string(),
            message: self.to_string(),
        }
    }
}

/// Structured error record written to standard error by the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
