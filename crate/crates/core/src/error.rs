use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {dim}: {reason}")]
    InvalidDimension { dim: usize, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian: max |M - M^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected 1")]
    TraceNotOne { trace: f64 },

    #[error("positivity violated: smallest eigenvalue {min_eigenvalue:e}")]
    PositivityViolation { min_eigenvalue: f64 },

    #[error("Kraus operators are not complete: max |sum A^dagger A - 1| = {residual:e}")]
    IncompleteKraus { residual: f64 },

    #[error("parameter {name} = {value} out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error(
        "grid resolution M = {m} is not aligned with delta = {delta}: {requirement}; nearest aligned delta is {suggested}"
    )]
    MisalignedGrid {
        m: usize,
        delta: f64,
        requirement: &'static str,
        suggested: f64,
    },

    #[error(
        "momentum shift N*delta/2 = {shift} is not an integer (N = {n}, delta = {delta}); use the fractional shift mode to allow it"
    )]
    FractionalShift { n: usize, delta: f64, shift: f64 },

    #[error("point ({q}, {p}) is not on the {n}x{n} phase-space lattice")]
    OffLattice { n: usize, q: f64, p: f64 },

    #[error("explicit superoperator for N = {n} exceeds the memory bound N <= {bound}")]
    TooLarge { n: usize, bound: usize },

    #[error("{what} did not converge after {iterations} iterations (best residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("periodic orbit check failed for label {label} at period {period}: drift {drift:e}")]
    OrbitCheck {
        label: u64,
        period: u32,
        drift: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. }
                | Error::OrbitCheck { .. }
                | Error::PositivityViolation { .. }
                | Error::NonFinite
        )
    }
}
