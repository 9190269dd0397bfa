use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category; the CLI maps these onto its exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: span [{start}, {end}) exceeds sentence of {len} tokens")]
    SpanOverflow {
        line: usize,
        start: usize,
        end: usize,
        len: usize,
    },

    #[error("unknown label {label:?} (not in the schema vocabulary)")]
    UnknownLabel { label: String },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("example refers to sentence {0}, which is not in the corpus")]
    DanglingSentence(u64),

    #[error("duplicate sentence id {0}")]
    DuplicateSentence(u64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic bytes: not an {expected} file")]
    BadMagic { expected: &'static str },

    #[error("truncated archive: needed {needed} bytes at offset {offset}, file has {len}")]
    Truncated {
        offset: usize,
        needed: usize,
        len: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("token count mismatch for sentence {sentence}: archive has {archive}, corpus has {corpus}")]
    TokenCountMismatch {
        sentence: u64,
        archive: usize,
        corpus: usize,
    },

    #[error("{0}")]
    Format(String),

    #[error("empty test set")]
    EmptyTest,

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("stage {stage} failed (manifest {digest}): {source}")]
    Stage {
        stage: String,
        digest: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::NonFiniteLoss { .. } | Error::NonFinite(_) => ErrorKind::Numeric,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
