use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("empty image")]
    EmptyImage,

    #[error("empty mask: no observed entries")]
    EmptyMask,

    #[error("zero variance")]
    ZeroVariance,

    #[error("zero reference: reference has zero norm")]
    ZeroReference,

    #[error("zero-power input")]
    ZeroPower,

    #[error("no observed column")]
    NoObservedColumn,

    #[error("no observed row")]
    NoObservedRow,

    #[error("pattern too sparse for pre-transformation")]
    PatternTooSparse,

    #[error("svd did not converge after {0} sweeps")]
    SvdNotConverged(usize),

    #[error("network error: {0}")]
    Network(String),

    #[error("backward called without a cached forward pass")]
    BackwardWithoutForward,

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("dimension overflow: {rows} x {cols}")]
    DimensionOverflow { rows: u64, cols: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the error comes from bad input data (as opposed to bad usage).
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::InvalidArgument(_) | Error::Config(_))
    }
}
