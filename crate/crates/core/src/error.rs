use std::path::PathBuf;

use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A cloud file could not be parsed; `line` is 1-based.
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Reading or writing a cloud file failed at the OS level.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Every correspondence fell outside the configured distance cutoff.
    #[error("no correspondences survived the distance cutoff")]
    NoOverlap,

    /// The correspondence geometry does not determine a unique rigid motion.
    #[error("degenerate correspondence geometry: {0}")]
    DegenerateGeometry(String),

    /// A fixed-point iterate stopped being finite.
    #[error("iteration diverged to a non-finite value at step {0}")]
    Diverged(usize),

    /// A summary was requested over a record set with no usable entries.
    #[error("no successful trials to summarize")]
    NoSuccessfulTrials,
}

pub type Result<T> = std::result::Result<T, Error>;
