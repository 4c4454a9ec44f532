use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("feature `{feature}` has kind {kind} which is incompatible with {what}")]
    IncompatibleKind {
        feature: String,
        kind: String,
        what: String,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("example {index}: {source}")]
    AtExample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("example {row}, feature {column}: {source}")]
    AtCell {
        row: usize,
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("case {case_id}: {source}")]
    InCase {
        case_id: u8,
        #[source]
        source: Box<Error>,
    },

    #[error("window not full: {have} of {need} examples")]
    WindowNotFull { have: usize, need: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mean control prediction {0} is too small for a relative change")]
    DegenerateMean(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn at_example(self, index: usize) -> Self {
        Error::AtExample {
            index,
            source: Box::new(self),
        }
    }

    /// True for errors caused by configuration rather than by data.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig(_) => true,
            Error::InCase { source, .. } => source.is_config_error(),
            _ => false,
        }
    }
}
