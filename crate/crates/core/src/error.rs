// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

/// Errors raised across the workbench.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// An array file could not be decoded. `offset` is the byte offset of the
    /// first offending byte.
    #[error("cannot parse {path} at byte {offset}: {message}")]
    ArrayParse {
        path: PathBuf,
        offset: usize,
        message: String,
    },

    /// A label table row is malformed. Rows are numbered from 1, header included.
    #[error("label table {path}, row {row}: {message}")]
    LabelParse { path: PathBuf, row: usize, message: String },

    #[error("channel {channel}: missing {split} array file")]
    MissingChannelFile { channel: String, split: &'static str },

    #[error("channel {channel}: {message}")]
    InvalidChannel { channel: String, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },

    #[error("dimension mismatch: expected {expected} columns, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
