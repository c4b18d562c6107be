use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frequency must be nonzero")]
    ZeroFrequency,

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("unknown catalog operator `{0}`")]
    UnknownOperator(String),

    #[error("grid resolution {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("divisibility violated: {0}")]
    Divisibility(String),

    #[error("invalid microstructure: {0}")]
    InvalidMicrostructure(String),

    #[error("invalid integrand: {0}")]
    InvalidIntegrand(String),

    #[error("operators do not form a potential pair (witness frequency {0:?})")]
    IncompatiblePair(Vec<f64>),

    #[error("A-residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ResidualTooLarge { residual: f64, tol: f64 },

    #[error("recovered potential misses the field by {0:.3e} (relative)")]
    InexactPotential(f64),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
