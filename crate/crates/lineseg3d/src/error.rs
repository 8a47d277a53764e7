//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Bad configuration value or malformed config file.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed config file line, with its 1-based line number.
    #[error("configuration error at line {line}: {message}")]
    ConfigLine { line: usize, message: String },

    /// Bad or missing input data (datasets, files, mismatched resolutions).
    #[error("input error: {0}")]
    Input(String),

    /// Geometric input that admits no solution (coincident points, empty sets).
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    /// Cloud alignment failed (no correspondences, degenerate configuration).
    #[error("alignment failed: {0}")]
    Alignment(String),

    /// Invariant violation that indicates a bug rather than bad input.
    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: input 3, configuration 4, everything else 5.
    /// Code 2 is left to clap for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Io(_) => 3,
            Error::Config(_) | Error::ConfigLine { .. } => 4,
            Error::Degenerate(_) | Error::Alignment(_) | Error::Internal(_) => 5,
        }
    }
}
