use thiserror::Error;

/// Errors produced by any of the toolkit modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("point index {index} out of range for cloud of {len} points")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("radius {delta} does not match grid cell width {cell_width}")]
    GridMismatch { delta: f64, cell_width: f64 },

    #[error("count register overflow (u128 capacity exceeded)")]
    Capacity,

    #[error("cloud of {0} points exceeds the brute-force guard of {1}")]
    CloudTooLarge(usize, usize),

    #[error("enumeration guard violated: n*p = {0} exceeds {1}")]
    SizeGuard(usize, usize),

    #[error("value overflows f64: {0}")]
    Overflow(String),

    #[error("degenerate sample set: {0}")]
    Degenerate(String),

    #[error("non-integer sample {0} passed to a discrete-law estimator")]
    NonIntegerSample(f64),

    #[error("phase classification inconclusive: {0}")]
    InconclusivePhase(String),

    #[error("non-finite estimate: {0}")]
    NonFinite(String),

    #[error("replication {replication} failed: {source}")]
    Replication {
        replication: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
