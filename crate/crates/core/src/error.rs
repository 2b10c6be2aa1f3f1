use thiserror::Error;

use crate::navier_stokes::NsSolveReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: dimension {n}, truncation {m} (both must be at least 1)")]
    InvalidLattice { n: usize, m: usize },

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operation requires a real-valued (Hermitian-symmetric) field")]
    NonReal,

    #[error("viscosity tensor is not elliptic on symmetric trace-free matrices (smallest eigenvalue {min_eigenvalue:e})")]
    NotElliptic { min_eigenvalue: f64 },

    #[error("zero mode has no Stokes symbol")]
    ZeroMode,

    #[error("shear viscosity must be positive, got {0}")]
    NonPositiveMu(f64),

    #[error("singular Stokes symbol at mode {xi:?}")]
    SingularSymbol { xi: Vec<i64> },

    #[error("singular matrix (pivot {pivot:e} at column {column})")]
    SingularMatrix { pivot: f64, column: usize },

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("too few nonempty spectral shells ({found}, need at least 3)")]
    TooFewShells { found: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed spectral dump: {0}")]
    Format(String),

    #[error("unknown suite `{name}` (valid: {valid})")]
    UnknownSuite { name: String, valid: String },

    #[error("fixed-point iteration diverged after {} iterations (residual {:e})", .report.iterations, .report.final_residual)]
    Diverged { report: Box<NsSolveReport> },

    #[error("fixed-point iteration stopped at {} iterations (residual {:e})", .report.iterations, .report.final_residual)]
    MaxIterations { report: Box<NsSolveReport> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
