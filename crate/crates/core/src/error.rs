use std::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by the pipeline.
///
/// The CLI maps these onto its documented exit codes, so the variants follow
/// failure classes rather than call sites.
#[derive(Debug)]
pub enum Error {
    /// Incompatible array or matrix shapes.
    Dimension(String),
    /// An operation was called with arguments that can never work (empty
    /// training set, too few embeddings, ...).
    Usage(String),
    /// A data or checkpoint file could not be parsed. `line` is 1-based;
    /// 0 means the location is unknown.
    Parse { line: usize, msg: String },
    /// All keypoints of a frame coincide; the pose cannot be normalized.
    DegeneratePose { frame_index: usize },
    /// Invalid configuration value.
    Config(String),
    /// Training failed (non-finite loss, ...).
    Training { epoch: usize, msg: String },
    /// A metric is undefined for the given inputs (single-class labels).
    UndefinedMetric(String),
    /// The unsupervised-training contract was violated.
    Contract(String),
    /// Checkpoint and data disagree on a structural field (K, d, T, ...).
    Incompatible(String),
    /// Required data (labels, stats, files) is absent.
    MissingData(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(msg) => write!(f, "dimension error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Parse { line, msg } => {
                if *line == 0 {
                    write!(f, "parse error: {msg}")
                } else {
                    write!(f, "parse error at line {line}: {msg}")
                }
            }
            Error::DegeneratePose { frame_index } => {
                write!(f, "degenerate pose at frame {frame_index}: all keypoints coincide")
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Training { epoch, msg } => write!(f, "training error at epoch {epoch}: {msg}"),
            Error::UndefinedMetric(msg) => write!(f, "undefined metric: {msg}"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::Incompatible(msg) => write!(f, "incompatible: {msg}"),
            Error::MissingData(msg) => write!(f, "missing data: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse { line: e.line(), msg: e.to_string() }
    }
}
