use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("resource limit: {what} requires {requested} entries, budget is {budget}")]
    ResourceLimit {
        what: &'static str,
        requested: u64,
        budget: u64,
    },

    #[error("hypothesis violation at p={p}, k={k}: {detail}")]
    HypothesisViolation { p: u64, k: u32, detail: String },

    #[error("degenerate normalizer: sigma_n^2 = 0 for n = {n}")]
    DegenerateNormalizer { n: u64 },

    #[error("n = {n} is below the range n >= {min} where {lemma} applies")]
    OutOfTheoremRange { lemma: &'static str, n: u64, min: u64 },

    #[error("statistical anomaly: {0}")]
    StatisticalAnomaly(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed cache file: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
