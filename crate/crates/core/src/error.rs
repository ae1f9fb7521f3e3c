use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input is empty")]
    Empty,

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("size guard exceeded: {what} has {n} qubits, limit is {limit}")]
    SizeGuard { what: &'static str, n: usize, limit: usize },

    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not an isometry (gram deviation {0:e})")]
    NotIsometric(f64),

    #[error("matrix is rank deficient")]
    RankDeficient,

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("malformed tensor train: {0}")]
    Malformed(String),

    #[error("serialization: {0}")]
    Serde(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serde(err.to_string())
    }
}
