use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error(
        "grid of size {grid} aliases cubic products of {modes} modes (need grid - 1 >= {required})"
    )]
    AliasRisk {
        grid: usize,
        modes: usize,
        required: usize,
    },

    #[error("{coarse} steps do not divide the {fine} master steps")]
    Divisibility { fine: usize, coarse: usize },

    #[error("resolution ordering violated: {0}")]
    ResolutionOrder(String),

    #[error("degenerate rate fit: {0}")]
    DegenerateFit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
