use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty trace text")]
    EmptyText,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("dimension mismatch at id={id}: expected {expected}, got {got}")]
    TraceDimension {
        id: String,
        expected: usize,
        got: usize,
    },

    #[error("label/step length mismatch at id={id}")]
    LabelStepMismatch { id: String },

    #[error("trace id={id} has no steps")]
    EmptyTrace { id: String },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("step index mismatch at id={id}: position {position} carries index {index}")]
    StepIndex {
        id: String,
        position: usize,
        index: usize,
    },

    #[error("step {step} of id={id} has text but a zero token count")]
    ZeroTokens { id: String, step: usize },

    #[error("total_tokens mismatch at id={id}: declared {declared}, steps sum to {summed}")]
    TokenTotal {
        id: String,
        declared: u64,
        summed: u64,
    },

    #[error("non-finite embedding at id={id}, step {step}")]
    NonFiniteEmbedding { id: String, step: usize },

    #[error("PCA needs at least 2 rows, got {0}")]
    TooFewRows(usize),

    #[error("target dimension {requested} exceeds the limit {limit} (rows - 1 = {rows_minus_one})")]
    PcaDimension {
        requested: usize,
        limit: usize,
        rows_minus_one: usize,
    },

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("missing {label} label at id={id}, step {step}")]
    MissingLabel {
        label: &'static str,
        id: String,
        step: usize,
    },

    #[error("missing required probe: {0}")]
    MissingProbe(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("achieved count {k} out of range 0..={n}")]
    CountOutOfRange { n: u64, k: u64 },

    #[error("monitor already terminated")]
    MonitorTerminated,

    #[error("empty stream")]
    EmptyStream,

    #[error("stream ended after {steps} steps without a terminal decision")]
    StreamExhausted { steps: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
