use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("length mismatch: expected {expected} samples, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("signal has no positive mass")]
    AllZero,
    #[error("negative mass at sample {index} ({value})")]
    NegativeMass { index: usize, value: f64 },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("no sample exceeds the support threshold")]
    EmptySupport,
    #[error("point {x} outside the validity interval [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
    #[error("map is not invertible: {0}")]
    NotInvertible(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("invalid diffeomorphism: {0}")]
    InvalidDiffeo(String),
    #[error("sampler exhausted after {attempts} draws with {accepted} accepted")]
    SamplingExhausted { attempts: usize, accepted: usize },
    #[error("reference density has interior zeros or is not strictly positive on its support")]
    BadReference,
    #[error("transport map is constant on the reference support")]
    DegenerateMap,
    #[error("pushforward retained only {0:.4} of the mass on the grid")]
    MassLoss(f64),
    #[error("transport problem too large: {points} points exceeds cap {cap}")]
    TooLarge { points: usize, cap: usize },
    #[error("transport problem infeasible: {0}")]
    Infeasible(String),
    #[error("projection support escapes the offset grid at angle {0}")]
    SupportEscape(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn format(line: usize, msg: impl Into<String>) -> Self {
        Error::Format { line, msg: msg.into() }
    }
}
