use thiserror::Error;

/// Every failure the engine can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HillError {
    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),
    #[error("invalid rating scale: min {min} must be below max {max}")]
    InvalidScale { min: i64, max: i64 },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("need at least {needed} columns, got {got}")]
    TooFewColumns { needed: usize, got: usize },
    #[error("ragged matrix: row {row} has {got} entries, expected {expected}")]
    RaggedMatrix { row: usize, expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("total-score variance is zero")]
    DegenerateVariance,
    #[error("column {0} is constant")]
    ConstantColumn(usize),
    #[error("requested {requested} factors from {available} variables")]
    TooManyFactors { requested: usize, available: usize },
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("unknown cycle {0:?}")]
    UnknownCycle(String),
    #[error("cycle {0:?} already exists")]
    DuplicateCycle(String),
    #[error("cycle {cycle:?} is {actual}, expected {expected}")]
    CycleStatus {
        cycle: String,
        actual: String,
        expected: String,
    },
    #[error("unknown prototype {0:?}")]
    UnknownPrototype(String),
    #[error("prototype {prototype:?} belongs to cycle {owner:?}, not {cycle:?}")]
    PrototypeCycleMismatch {
        prototype: String,
        owner: String,
        cycle: String,
    },
    #[error("invalid timebox: {0}")]
    InvalidTimebox(String),

    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("missing item {0:?}")]
    MissingItem(String),
    #[error("unknown item {0:?}")]
    UnknownItem(String),
    #[error("duplicate item key {0:?}")]
    DuplicateItem(String),
    #[error("rating {field:?}={value} outside [{min}, {max}]")]
    OutOfRange {
        field: String,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("record belongs to cycle {record:?}, batch is for {batch:?}")]
    CycleMismatch { record: String, batch: String },
    #[error("respondent {respondent:?} already answered prototype {prototype:?} in cycle {cycle:?}")]
    DuplicateRespondent {
        respondent: String,
        prototype: String,
        cycle: String,
    },

    #[error("unknown response {0:?}")]
    UnknownResponse(String),
    #[error("response {0:?} has no open review item")]
    NotUnderReview(String),
    #[error("response {0:?} already decided")]
    AlreadyDecided(String),
    #[error("invalid gate policy: {0}")]
    InvalidPolicy(String),
    #[error("no accepted responses for cycle {cycle:?}{}", prototype.as_ref().map(|p| format!(", prototype {p:?}")).unwrap_or_default())]
    NoAcceptedData {
        cycle: String,
        prototype: Option<String>,
    },
    #[error("empty input")]
    EmptyInput,

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("non-finite model input")]
    NonFiniteInput,
    #[error("value {value} outside scale [{min}, {max}]")]
    OutsideScale { value: f64, min: i64, max: i64 },
    #[error("empty holdout")]
    EmptyHoldout,

    #[error("feedback lacks dimension {0}")]
    MissingDimension(String),
    #[error("unknown story {0}")]
    UnknownStory(u64),
    #[error("story narrative is empty")]
    EmptyNarrative,
    #[error("invalid category {0:?}")]
    InvalidCategory(String),
    #[error("estimate must be positive, got {0}")]
    NonPositiveEstimate(i64),
    #[error("capacity must be positive, got {0}")]
    NonPositiveCapacity(i64),
    #[error("story {0} is already selected")]
    StorySelected(u64),
    #[error("story {0} is not selected")]
    StoryNotSelected(u64),
    #[error("task list is empty")]
    EmptyTasks,
    #[error("unestimated stories block selection: {0:?}")]
    UnestimatedStories(Vec<u64>),
    #[error("cycle {0:?} has no priority board")]
    NoPriorityBoard(String),

    #[error("undecided review items block the pipeline: {0:?}")]
    UndecidedReviewItems(Vec<String>),
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("corrupt snapshot after seq {last_valid_seq}: {reason}")]
    CorruptSnapshot { last_valid_seq: u64, reason: String },
    #[error("corrupt event log after seq {last_valid_seq}: {reason}")]
    CorruptLog { last_valid_seq: u64, reason: String },
    #[error("replay failed at seq {seq}: {reason}")]
    Replay { seq: u64, reason: String },
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for HillError {
    fn from(e: std::io::Error) -> Self {
        HillError::Io(e.to_string())
    }
}

pub type Result<T, E = HillError> = std::result::Result<T, E>;
