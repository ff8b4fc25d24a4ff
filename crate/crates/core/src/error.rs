use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library can report. Each variant maps to one stable
/// machine code (see [`Error::code`]) that the HTTP API and CLI surface verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid value: {0}")]
    Invalid(String),

    #[error("stakeholder `{0}` is not registered")]
    UnknownStakeholder(String),

    #[error("requirement `{0}` is not registered")]
    UnknownRequirement(String),

    #[error("stakeholder `{0}` is already registered")]
    DuplicateStakeholder(String),

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("score {score} is outside the rating scale {min}..={max}")]
    OutOfScale { score: i64, min: i32, max: i32 },

    #[error("stakeholder `{0}` has no ratings")]
    NoRatings(String),

    #[error("similarity of a stakeholder with itself was requested (`{0}`)")]
    SelfSimilarity(String),

    #[error("stakeholder `{stakeholder}` already rated requirement `{requirement}`")]
    AlreadyRated {
        stakeholder: String,
        requirement: String,
    },

    #[error("target stakeholder `{0}` has no ratings")]
    TargetHasNoRatings(String),

    #[error("catalog has {available} requirements but {needed} seeds were requested")]
    CatalogTooSmall { needed: usize, available: usize },

    #[error("stakeholder `{0}` already has ratings; sessions start from an empty row")]
    StakeholderHasRatings(String),

    #[error("operation `{operation}` is not allowed in state {state}")]
    WrongState {
        operation: &'static str,
        state: String,
    },

    #[error("rated requirements do not match the presented seeds")]
    WrongItems,

    #[error("requirement `{0}` is not among the session's recommendations")]
    UnknownRecommendedItem(String),

    #[error("requirement `{0}` appears more than once in the submission")]
    DuplicateItem(String),

    #[error("{0} stars is outside 0..=5")]
    StarsOutOfRange(i64),

    #[error("session `{0}` not found")]
    SessionNotFound(String),

    #[error("unknown reference: {0}")]
    UnknownReference(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersionMismatch { found: u64, expected: u64 },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Invalid(_) => "invalid_argument",
            Error::UnknownStakeholder(_) => "unknown_stakeholder",
            Error::UnknownRequirement(_) => "unknown_requirement",
            Error::DuplicateStakeholder(_) => "duplicate_stakeholder",
            Error::DuplicateId(_) => "duplicate_id",
            Error::OutOfScale { .. } => "out_of_scale",
            Error::NoRatings(_) => "no_ratings",
            Error::SelfSimilarity(_) => "self_similarity",
            Error::AlreadyRated { .. } => "already_rated",
            Error::TargetHasNoRatings(_) => "target_has_no_ratings",
            Error::CatalogTooSmall { .. } => "catalog_too_small",
            Error::StakeholderHasRatings(_) => "stakeholder_has_ratings",
            Error::WrongState { .. } => "wrong_state",
            Error::WrongItems => "wrong_items",
            Error::UnknownRecommendedItem(_) => "unknown_recommended_item",
            Error::DuplicateItem(_) => "duplicate_item",
            Error::StarsOutOfRange(_) => "stars_out_of_range",
            Error::SessionNotFound(_) => "session_not_found",
            Error::UnknownReference(_) => "unknown_reference",
            Error::Parse { .. } => "parse_error",
            Error::SchemaVersionMismatch { .. } => "schema_version_mismatch",
            Error::Io(_) => "io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
