use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("point {index} at cell ({row}, {col}) is out of bounds for a {rows}x{cols} range image")]
    CellOutOfBounds {
        index: usize,
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("points {first} and {second} both map to cell ({row}, {col})")]
    DuplicateCell {
        first: usize,
        second: usize,
        row: usize,
        col: usize,
    },

    #[error("frame mismatch: calibration expects source frame `{expected}`, got `{found}`")]
    FrameMismatch { expected: String, found: String },

    #[error("segment {0} is not present in the segment map")]
    UnknownSegment(u16),

    #[error("segment {0} has no cluster assignment")]
    MissingAssignment(u16),

    #[error("label {label} is out of range (expected {expected})")]
    LabelOutOfRange { label: u32, expected: String },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least {k} samples to fit {k} clusters, got {n}")]
    TooFewSamples { n: usize, k: usize },

    #[error("training diverged at step {step}: loss is not finite")]
    Diverged { step: usize, trajectory: Vec<f64> },

    #[error("scene placement failed after {attempts} attempts")]
    PlacementFailed { attempts: usize },

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("empty manifest")]
    EmptyManifest,

    #[error("format error in {context}: {message}")]
    Format { context: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            context: context.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
