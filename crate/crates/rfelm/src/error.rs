use std::io;
use std::path::Path;

/// Failures reading or writing one of the on-disk formats.
#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: byte {offset}: {message}")]
    Format { path: String, offset: u64, message: String },
    #[error("{path}: truncated file: expected {expected} bytes, found {actual}")]
    Truncated { path: String, expected: u64, actual: u64 },
    #[error("{path}: format version {found} is not supported (this build reads version {supported})")]
    Version { path: String, found: u32, supported: u32 },
    #[error("{path}: checksum mismatch")]
    Checksum { path: String },
    #[error("{path}: {source}")]
    Core { path: String, source: rfelm_core::Error },
}

impl FileError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn format(path: &Path, offset: u64, message: impl Into<String>) -> Self {
        Self::Format { path: path.display().to_string(), offset, message: message.into() }
    }

    pub(crate) fn core(path: &Path, source: rfelm_core::Error) -> Self {
        Self::Core { path: path.display().to_string(), source }
    }
}

pub type FileResult<T> = std::result::Result<T, FileError>;
