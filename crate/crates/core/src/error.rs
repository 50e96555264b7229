use thiserror::Error;

pub type Result<T, E = PtaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PtaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty region: {0}")]
    EmptyRegion(String),

    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("insufficient sample: need at least {needed} values, got {got}")]
    InsufficientSample { needed: usize, got: usize },

    /// Every sector of the band partition had fewer than two pixels on one side.
    #[error("degenerate bands: all {sectors} sectors lack enough pixels on one side")]
    DegenerateBands { sectors: usize },

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("malformed {format} data at byte offset {offset}: {message}")]
    Malformed {
        format: &'static str,
        offset: u64,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PtaError {
    pub(crate) fn empty(what: impl Into<String>) -> Self {
        PtaError::EmptyRegion(what.into())
    }

    pub(crate) fn invalid(what: impl Into<String>) -> Self {
        PtaError::InvalidArgument(what.into())
    }
}
