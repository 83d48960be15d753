use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero total variance")]
    ZeroTotalVariance,

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("empty prototype")]
    EmptyPrototype,

    #[error("training set contains a single class")]
    SingleClass,

    #[error("feature mask mismatch: model built with {model}, requested {requested}")]
    MaskMismatch { model: String, requested: String },

    #[error("missing embedding in prototype {0}")]
    MissingEmbedding(String),

    #[error("degenerate descriptor for prototype {0}")]
    DegenerateDescriptor(String),

    #[error("no interactions")]
    NoInteractions,

    #[error("person has no interactions")]
    PersonHasNoInteractions,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
