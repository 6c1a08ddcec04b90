use std::path::PathBuf;

/// Every failure the engine can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vector has zero norm")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: usize, vocab: usize },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("contrastive batch is empty")]
    EmptyBatch,
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("ambiguity index needs at least two outcomes, got {0}")]
    DegenerateK(usize),
    #[error("record `{0}` has no relevance mask")]
    MissingMask(String),
    #[error("reports cover different scene sets")]
    DatasetMismatch,
    #[error("could not separate {classes} prototypes in dimension {dim} after {retries} retries")]
    SeparationFailure { classes: usize, dim: usize, retries: usize },
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: need {expected} bytes, have {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("metadata parse error: {0}")]
    MetaParseError(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, found })
    }
}
