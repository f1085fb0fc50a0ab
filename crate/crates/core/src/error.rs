use std::path::PathBuf;

/// Errors raised anywhere in the synthesis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("model rejected: {0} rank test failed")]
    RankTest(&'static str),

    #[error("Riccati iteration did not converge after {iterations} iterations (relative change {change:.3e}, residual {residual:.3e})")]
    NonConvergent {
        iterations: usize,
        change: f64,
        residual: f64,
    },

    #[error("Riccati fixed point is not stabilizing: closed-loop spectral radius {radius}")]
    NotStabilizing { radius: f64 },

    #[error("resolvent is singular at z = {re} + {im}j")]
    SingularResolvent { re: f64, im: f64 },

    #[error("spectrum sample {index} is not positive ({value:e})")]
    NonPositiveSpectrum { index: usize, value: f64 },

    #[error("spectrum is not conjugate-symmetric at index {index}")]
    AsymmetricSpectrum { index: usize },

    #[error("grid too coarse: cepstral tail {tail:.3e} exceeds 1e-6 of the zero-lag term {zero_lag:.3e}")]
    Aliasing { tail: f64, zero_lag: f64 },

    #[error("invalid frequency grid of size {0}: must be a power of two >= 2")]
    InvalidGrid(usize),

    #[error("spectral factor magnitude {0:e} too small to divide by")]
    DivisionNearZero(f64),

    #[error("{stage} did not converge within {iterations} iterations")]
    SolverNonConvergent { stage: &'static str, iterations: usize },

    #[error("could not bracket the Lagrange level within {0} doublings")]
    BracketFailure(usize),

    #[error("Stein/Lyapunov equation has no stable solution: spectral radius {radius}")]
    LyapunovFailure { radius: f64 },

    #[error("linear program stalled after {0} pivots")]
    SolverStall(usize),

    #[error("polynomial has a root on the unit circle near frequency {omega:.6} rad (|root| = {modulus})")]
    RootOnCircle { omega: f64, modulus: f64 },

    #[error("denominator factor has a vanishing leading coefficient ({0:e})")]
    DegenerateDenominator(f64),

    #[error("linear system is ill-conditioned (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("horizon {horizon} exceeds the dense operator cap ({cap} rows)")]
    MemoryGuard { horizon: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    NonConvergence,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_)
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::Dimension(_)
            | Error::RankTest(_)
            | Error::InvalidGrid(_)
            | Error::MemoryGuard { .. } => ErrorClass::Config,
            Error::NonConvergent { .. }
            | Error::SolverNonConvergent { .. }
            | Error::SolverStall(_)
            | Error::BracketFailure(_) => ErrorClass::NonConvergence,
            _ => ErrorClass::Numerical,
        }
    }

    /// Stable variant name for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::RankTest(_) => "rank_test",
            Error::NonConvergent { .. } => "riccati_non_convergent",
            Error::NotStabilizing { .. } => "not_stabilizing",
            Error::SingularResolvent { .. } => "singular_resolvent",
            Error::NonPositiveSpectrum { .. } => "non_positive_spectrum",
            Error::AsymmetricSpectrum { .. } => "asymmetric_spectrum",
            Error::Aliasing { .. } => "aliasing",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::DivisionNearZero(_) => "division_near_zero",
            Error::SolverNonConvergent { .. } => "solver_non_convergent",
            Error::BracketFailure(_) => "bracket_failure",
            Error::LyapunovFailure { .. } => "lyapunov_failure",
            Error::SolverStall(_) => "solver_stall",
            Error::RootOnCircle { .. } => "root_on_circle",
            Error::DegenerateDenominator(_) => "degenerate_denominator",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::MemoryGuard { .. } => "memory_guard",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
