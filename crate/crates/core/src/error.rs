use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("field order {0} is not supported (need a prime or 2^m with m <= 16)")]
    UnsupportedField(u64),
    #[error("operand {value} is not an element of GF({order})")]
    NotAnElement { value: u32, order: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is rank deficient: rank {rank}, need {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("invalid rank vector {ranks:?}: {reason}")]
    InvalidRankVector { ranks: Vec<u32>, reason: String },
    #[error("{0}")]
    Domain(String),
    #[error("packet for generation {0} arrived after it expired")]
    StalePacket(usize),
    #[error("state {0:?} is not part of the state space")]
    UnknownState(Vec<u32>),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("model fingerprint mismatch: file has {found}, scenario has {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
