use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {dim}: need at least {min}")]
    InvalidDimension { dim: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{name} = {value} is outside its domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("matrix is not Hermitian: max |A - A^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("trace is {trace}, expected {expected}")]
    Trace { trace: f64, expected: f64 },

    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("matrix has a non-finite entry")]
    NonFinite,

    #[error("trace drifted to {trace} at gamma*t = {time}")]
    TraceDrift { time: f64, trace: f64 },

    #[error("truncation at n_cut = {n_cut} is insufficient: {detail}")]
    TruncationInsufficient { n_cut: usize, detail: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("heterodyne grid insufficient: completeness defect {defect:e} exceeds {limit:e}; increase the radius or refine the step")]
    GridInsufficient { defect: f64, limit: f64 },

    #[error("finite-difference step cannot be placed: {0}")]
    Step(String),

    #[error("window [{lo}, {hi}] out of range for {len} gaps")]
    Window { lo: usize, hi: usize, len: usize },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            reason,
        }
    }
}
