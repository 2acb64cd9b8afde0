use thiserror::Error;

use crate::dataset::Violation;

#[derive(Debug, Error)]
pub enum ConcordError {
    #[error("transcript is empty")]
    EmptyTranscript,

    #[error("invalid transcript: {0}")]
    InvalidTranscript(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("calibration infeasible: {0}")]
    CalibrationInfeasible(String),

    #[error("similarity is undefined for an empty string")]
    EmptySimilarityInput,

    #[error("unknown entity category `{0}`")]
    UnknownCategory(String),

    #[error("unknown fixture template `{0}`")]
    UnknownTemplate(String),

    #[error("sensitivity {0} is outside the social sharing matrix")]
    OutsideMatrix(String),

    #[error("lexicon `{name}` line {line}: {message}")]
    Lexicon {
        name: String,
        line: usize,
        message: String,
    },

    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dataset failed validation with {} violation(s)", .0.len())]
    Validation(Vec<Violation>),

    #[error("trace belongs to dataset `{trace}` but record is `{record}`")]
    DatasetMismatch { trace: String, record: String },

    #[error("turn {turn_id}: {source}")]
    AtTurn {
        turn_id: u32,
        #[source]
        source: Box<ConcordError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ConcordError {
    pub fn at_turn(self, turn_id: u32) -> Self {
        ConcordError::AtTurn {
            turn_id,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, ConcordError>;
