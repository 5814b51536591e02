//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad slot bounds, empty model list, unknown
    /// model name, k < 3, missing input files, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A value outside an operation's domain (empty set passed to a set
    /// measure, singleton group passed to density, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// I/O failure annotated with the offending path.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A persisted artifact (graph CSV, groups NDJSON, report JSON) that does
    /// not parse back.
    #[error("malformed artifact {}: {reason}", path.display())]
    Artifact { path: PathBuf, reason: String },

    /// Report comparison requested across incompatible runs.
    #[error("usage error: {0}")]
    Usage(String),

    /// A pipeline stage aborted; wraps the underlying cause.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the name of the pipeline stage it aborted.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Opens a file path into an [`Error::Io`] on failure.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
