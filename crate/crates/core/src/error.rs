//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by translation backends.
#[derive(Debug, Error)]
pub enum BackendError {
    /// Network-level or HTTP-status failure, reported after retries are
    /// exhausted. `attempts` counts every request actually sent.
    #[error("transport failure after {attempts} attempt(s){}: {message}", status_suffix(.status))]
    Transport {
        status: Option<u16>,
        attempts: u32,
        message: String,
    },
    /// The server answered but the payload carried no usable translation.
    #[error("backend returned an empty translation")]
    EmptyResponse,
    /// The backend is misconfigured (bad base URL, unwritable cache store, ...).
    #[error("backend configuration error: {0}")]
    Config(String),
    /// The request violates an invariant (empty text, negative temperature, ...).
    #[error("invalid translation request: {0}")]
    InvalidRequest(String),
}

fn status_suffix(status: &Option<u16>) -> String {
    match status {
        Some(code) => format!(" (last status {code})"),
        None => String::new(),
    }
}

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A language code was used that is not present in the registry.
    #[error("unknown language tag '{0}': not present in the language registry")]
    UnknownLanguage(String),
    /// Two token sequences that must share a language do not.
    #[error("language mismatch: expected '{expected}', found '{found}'")]
    LanguageMismatch { expected: String, found: String },
    /// Caller violated a documented contract (bad argument, missing flag, ...).
    #[error("usage error: {0}")]
    Usage(String),
    /// Invalid configuration (file contents, registry entries, store paths, ...).
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    /// Every forward candidate failed; carries one note per candidate.
    #[error("all {} translation candidate(s) failed: {}", .failures.len(), format_failures(.failures))]
    AllCandidatesFailed { failures: Vec<(usize, String)> },
    /// A dataset line could not be parsed.
    #[error("dataset error at line {line}: {message}")]
    Dataset { line: usize, message: String },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn format_failures(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .map(|(i, msg)| format!("[{i}] {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// True for errors caused by how the library was invoked rather than by
    /// the environment at runtime. CLI maps these to exit code 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_)
                | Error::Config(_)
                | Error::UnknownLanguage(_)
                | Error::LanguageMismatch { .. }
                | Error::Dataset { .. }
                | Error::Backend(BackendError::Config(_))
                | Error::Backend(BackendError::InvalidRequest(_))
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
