use thiserror::Error;

/// Errors raised by model construction, estimation and backtesting.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stationarity violated: branching ratio {0} >= 1")]
    NotStationary(f64),

    #[error("time {t} precedes state time {last}")]
    Ordering { t: f64, last: f64 },

    #[error("expected a trade event, got a quote event")]
    InvalidKind,

    #[error("root bracketing failed on ({lo}, {hi})")]
    Bracketing { lo: f64, hi: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("rank-deficient normal equations at knot {knot} (t = {time})")]
    RankDeficient { knot: usize, time: f64 },

    #[error("hessian is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("nonpositive intensity {0} at a jump time")]
    ZeroIntensity(f64),

    #[error("zero variance")]
    ZeroVariance,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
