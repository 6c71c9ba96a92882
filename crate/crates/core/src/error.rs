use thiserror::Error;

/// Errors raised by the engine operations (model, views, elicit).
///
/// [`Error::name`] gives the stable identifier used in HTTP payloads and CLI messages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("outcome list is empty")]
    EmptyOutcomes,
    #[error("duplicate outcome name `{0}`")]
    DuplicateOutcome(String),
    #[error("names must be non-empty")]
    EmptyName,
    #[error("node `{0}` already exists")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("adding `{parent}` as a parent of `{child}` would create a cycle")]
    CycleDetected { child: String, parent: String },
    #[error("`{parent}` is already a parent of `{child}`")]
    DuplicateEdge { child: String, parent: String },
    #[error("expected {expected} parent outcomes, got {actual}")]
    ArityMismatch { expected: usize, actual: usize },
    #[error("outcome index {index} out of range for cardinality {cardinality}")]
    OutcomeOutOfRange { index: usize, cardinality: usize },
    #[error("column index {index} out of range (table has {len} columns)")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("selection is empty")]
    EmptySelection,
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("outcome {0} is locked")]
    OutcomeLocked(usize),
    #[error("target probability must be finite, got {0}")]
    InvalidTarget(f64),
}

impl Error {
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyOutcomes => "EmptyOutcomes",
            Error::DuplicateOutcome(_) => "DuplicateOutcome",
            Error::EmptyName => "EmptyName",
            Error::DuplicateNode(_) => "DuplicateNode",
            Error::UnknownNode(_) => "UnknownNode",
            Error::CycleDetected { .. } => "CycleDetected",
            Error::DuplicateEdge { .. } => "DuplicateEdge",
            Error::ArityMismatch { .. } => "ArityMismatch",
            Error::OutcomeOutOfRange { .. } => "OutcomeOutOfRange",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::InvalidContext(_) => "InvalidContext",
            Error::EmptySelection => "EmptySelection",
            Error::InvalidPermutation(_) => "InvalidPermutation",
            Error::OutcomeLocked(_) => "OutcomeLocked",
            Error::InvalidTarget(_) => "InvalidTarget",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
