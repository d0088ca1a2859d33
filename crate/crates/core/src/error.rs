use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid region: {0}")]
    InvalidRegion(String),

    #[error("Hilbert space dimension {dim} exceeds the dense cap of 2^14")]
    Infeasible { dim: u128 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid site set: {0}")]
    InvalidSites(String),

    #[error("eigendecomposition did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("interaction pattern does not fit in the region: {0}")]
    PatternTooLarge(String),

    #[error("energy window [{lo}, {hi}] contains no eigenvalue densities")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("energy density {target} outside the attainable range [{min}, {max}]")]
    Bracketing { target: f64, min: f64, max: f64 },

    #[error("Gibbs weights overflowed at beta = {beta}")]
    Overflow { beta: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("search cap of {cap} exceeded")]
    SearchCap { cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
