//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown source adapter: {0}")]
    UnknownSource(String),

    #[error("{path}: {malformed} of {total} lines malformed (>{limit}%): {sample}")]
    TooManyMalformed {
        path: String,
        malformed: usize,
        total: usize,
        limit: u8,
        sample: String,
    },

    #[error("record {record_id}: {reason}")]
    InvalidRecord { record_id: String, reason: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("transport failure: {0}")]
    TransportFailure(String),

    #[error("transport failure after {attempts} attempts: {last_error}")]
    TransportExhausted { attempts: u32, last_error: String },

    #[error("provider refused request: {0}")]
    ProviderRefusal(String),

    #[error("no mock entry matches request {request_key}")]
    MockMiss { request_key: String },

    #[error("confidence unavailable: {0}")]
    ConfidenceUnavailable(String),

    #[error("unparseable verdict: {0:?}")]
    UnparseableVerdict(String),

    #[error("no parseable majority among {votes} votes ({parseable} parseable)")]
    Abstained { votes: usize, parseable: usize },

    #[error("score out of range {lo}-{hi}: {got}")]
    ScoreOutOfRange { lo: f64, hi: f64, got: f64 },

    #[error("value {value} outside native bounds [{min}, {max}]")]
    OutOfBounds { value: f64, min: f64, max: f64 },

    #[error("rubric {rubric} failed: {reason}")]
    RubricFailed { rubric: String, reason: String },

    #[error("model is untrained")]
    UntrainedModel,

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("no judged records")]
    NoJudgedRecords,

    #[error("abstention rate {rate:.1}% exceeds {cap:.0}% cap ({abstained} of {total})")]
    AbstentionCap {
        rate: f64,
        cap: f64,
        abstained: usize,
        total: usize,
    },

    #[error("record-id mismatch between verdict sets: {0}")]
    RecordMismatch(String),

    #[error("{0}")]
    Agreement(String),

    #[error("prompt template has {found} slots, expected {expected}")]
    SlotMismatch { expected: usize, found: usize },

    #[error("grammar service unavailable and fallback disabled: {0}")]
    GrammarUnavailable(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("http error: {0}")]
    Http(#[from] reqwest::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for the abstention outcome of a majority vote, which callers of
    /// the judging APIs treat as data rather than failure.
    pub fn is_abstention(&self) -> bool {
        matches!(self, Error::Abstained { .. })
    }
}
