//! Error types shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of evaluation, fitting, and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Inputs violate a documented precondition (non-finite entries, bad
    /// dimensions, malformed arguments).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A linear solve met a pivot below the singularity threshold.
    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// A representation invariant does not hold; the message names the
    /// violated invariant.
    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),

    /// Argument outside the mathematical domain of the requested measure.
    #[error("domain error: {0}")]
    Domain(String),

    /// Reliability fell below the underflow floor, so hazard quantities
    /// are no longer representable.
    #[error("tail underflow: reliability below {floor:e} at x = {x}")]
    TailUnderflow { x: f64, floor: f64 },

    /// Data admit no meaningful estimate (e.g. all observations zero).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// No cut-point candidate satisfies the fitting preconditions.
    #[error("unfittable data: {0}")]
    UnfittableData(String),

    /// The optimizer was started outside its bounds or at a non-finite
    /// objective value.
    #[error("invalid start: {0}")]
    InvalidStart(String),

    /// Too many bootstrap replicates failed to refit for the interval to
    /// be trusted.
    #[error("unreliable confidence interval: only {completed} of {requested} bootstrap replicates converged")]
    UnreliableCi { completed: usize, requested: usize },

    /// Too many bootstrap replicates failed to refit for the p-value to
    /// be trusted.
    #[error("unreliable p-value: only {completed} of {requested} bootstrap replicates converged")]
    UnreliablePValue { completed: usize, requested: usize },

    /// A fitted CDF evaluated to exactly 0 or 1 at an observation, which
    /// the Anderson-Darling statistic cannot absorb.
    #[error("cdf boundary: F = {value} at observation {index} (x = {x})")]
    CdfBoundary { index: usize, x: f64, value: f64 },

    /// Automatic bandwidth selection failed because the data have no
    /// dispersion.
    #[error("degenerate bandwidth: {0}")]
    DegenerateBandwidth(String),

    /// A text input could not be parsed; carries the 1-based line number.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Underlying file-system failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
