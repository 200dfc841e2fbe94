//! Error type shared across the crate, with process exit-code mapping for the CLI.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller passed an argument that violates a documented precondition
    /// (e.g. `q = 0`, `k > n`, a negative tolerance).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A file did not match its declared format. `offset` is the absolute byte
    /// offset at which the problem was detected.
    #[error("data format error at byte {offset}: {msg}")]
    DataFormat { offset: u64, msg: String },

    /// Arithmetic broke down (all component densities vanished, a non-finite
    /// value appeared, ...). `row` names the data row that triggered it.
    #[error("numerical degeneracy at row {row}: {msg}")]
    NumericalDegeneracy { row: usize, msg: String },

    /// A per-row covariance restriction could not be inverted.
    #[error("singular sampled covariance for row {row}, component {component}")]
    SingularMatrix { row: usize, component: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code contract used by the `skmix` binary:
    /// 1 usage error, 2 unreadable/malformed data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) => 1,
            Error::DataFormat { .. } | Error::Io(_) => 2,
            Error::NumericalDegeneracy { .. } | Error::SingularMatrix { .. } => 3,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::DataFormat { offset, msg: msg.into() }
    }
}
