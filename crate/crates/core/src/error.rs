use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed trace header at byte {offset}: {reason}")]
    BadHeader { offset: u64, reason: String },

    #[error(
        "truncated trace: expected {expected} records, found {found} (stopped at byte {offset})"
    )]
    TruncatedTrace {
        expected: u64,
        found: u64,
        offset: u64,
    },

    #[error("line {line}: cannot parse {text:?} as an address")]
    BadAddress { line: usize, text: String },

    #[error("line size {0} is not a power of two")]
    LineSizeNotPowerOfTwo(u64),

    #[error("invalid cache configuration: {0}")]
    BadCacheConfig(String),

    #[error("invalid analysis configuration: {0}")]
    BadConfig(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("invalid model parameters: {0}")]
    BadParameters(String),

    #[error("probability {0} is outside (0, 1)")]
    BadProbability(f64),

    #[error("cannot condition below {threshold}: the model puts no mass there")]
    NullConditioning { threshold: f64 },

    #[error("line size mismatch: {left} vs {right}")]
    LineSizeMismatch { left: u64, right: u64 },

    #[error("sample file line {line}: {reason}")]
    BadSampleFile { line: usize, reason: String },

    #[error("characterization JSON: {0}")]
    BadCharacterization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
