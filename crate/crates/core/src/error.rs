use thiserror::Error;

/// Errors produced by the segmentation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite input to {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("non-finite sample at offset {0}")]
    NonFiniteSample(usize),

    #[error("graph has no edges")]
    EdgelessGraph,

    #[error("fusion strategy `{0}` requires per-pixel decision values")]
    MissingDecisionValues(&'static str),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// Stable numeric code, used by the CLI and for file-format diagnostics.
    pub fn code(&self) -> u32 {
        match self {
            Error::Shape { .. } => 10,
            Error::NonFinite(_) => 11,
            Error::InvalidParameter { .. } => 12,
            Error::BadMagic { .. } => 20,
            Error::UnsupportedVersion(_) => 21,
            Error::Truncated { .. } => 22,
            Error::NonFiniteSample(_) => 23,
            Error::EdgelessGraph => 30,
            Error::MissingDecisionValues(_) => 31,
            Error::Stage { source, .. } => source.code(),
            Error::Io(_) => 40,
            Error::Json(_) => 41,
        }
    }
}

/// Attaches a pipeline stage tag to an error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: impl Into<String>) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage: stage.into(),
            source: Box::new(e),
        })
    }
}
