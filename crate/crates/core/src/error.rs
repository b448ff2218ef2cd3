use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition was violated by the caller.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Inconsistent configuration (shapes, geometry, dataset layout).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor estimation failed (rank-deficient design, solver cap reached).
    #[error("fit error: {0}")]
    Fit(String),

    /// The likelihood model is degenerate, e.g. zero noise scale.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// Posterior mass vanished; the branch cannot continue.
    #[error("dead end: posterior has zero mass")]
    DeadEnd,

    /// The seed voxel is outside the volume or below the anisotropy threshold.
    #[error("seed rejected: {0}")]
    SeedRejected(String),

    /// The angular loss gradient is undefined for (anti)parallel inputs.
    #[error("gradient undefined: {0}")]
    GradientUndefined(String),

    /// Text or binary payload could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// A binary payload does not match its declared size.
    #[error("size mismatch in {path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Fit(_)
                | Error::DegenerateModel(_)
                | Error::DeadEnd
                | Error::GradientUndefined(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
