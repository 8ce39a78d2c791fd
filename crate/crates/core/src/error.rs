use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing frame {frame}")]
    MissingFrame { frame: usize },

    #[error("schema violation{}: {detail}", frame.map(|f| format!(" in frame {f}")).unwrap_or_default())]
    SchemaViolation { frame: Option<usize>, detail: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid clip metadata: {0}")]
    InvalidMeta(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("zero-area bounding box in frame {frame}")]
    EmptyBox { frame: usize },

    #[error("no frame has a signer detection")]
    NoBoxes,

    #[error("clip has {frames} usable frames after trimming, need at least 2")]
    ClipTooShort { frames: usize },

    #[error("missing joint: {0}")]
    MissingJoint(&'static str),

    #[error("clip dims {frames}x{height}x{width} do not divide into 2x16x16 tubes")]
    IndivisibleDims { frames: usize, height: usize, width: usize },

    #[error("no hand tokens available for spatio-temporal masking")]
    EmptyRegions,

    #[error("empty clip")]
    EmptyClip,

    #[error("masked position set is empty")]
    EmptyMask,

    #[error("probability at class {class} is not positive")]
    NonPositiveProbability { class: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid soft label: {0}")]
    InvalidLabel(String),

    #[error("hand token set is empty")]
    EmptyHandSet,

    #[error("malformed {kind} document: {detail}")]
    Format { kind: &'static str, detail: String },

    #[error("missing or corrupt bundle for clip {clip_id}: {detail}")]
    MissingBundle { clip_id: String, detail: String },

    #[error("frame dump has {found} frames, plan needs {needed}")]
    MissingFrames { needed: usize, found: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn schema(frame: Option<usize>, detail: impl Into<String>) -> Self {
        Error::SchemaViolation {
            frame,
            detail: detail.into(),
        }
    }

    pub(crate) fn format(kind: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            kind,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
