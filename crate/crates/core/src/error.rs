use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("probability out of range [0, 1]: {0}")]
    ProbabilityOutOfRange(f64),

    #[error("degenerate sensor: posterior denominator is zero")]
    DegenerateSensor,

    #[error("infeasible posterior target {target} for prior {prior}: confidence {confidence} outside [0, 1]")]
    InfeasibleTarget {
        prior: f64,
        target: f64,
        confidence: f64,
    },

    #[error("ill-formed reward machine: {0}")]
    IllFormedMachine(String),

    #[error("unknown task `{0}`")]
    UnknownTask(String),

    #[error("induction over an empty alphabet")]
    EmptyAlphabet,

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("no machine with finite score covers the hard examples")]
    NoFiniteSolution,

    #[error("cannot relearn from an empty example pool")]
    EmptyPool,

    #[error("episode already terminated")]
    EpisodeTerminated,

    #[error("induction budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("config error: {field}: {msg}")]
    Config { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
