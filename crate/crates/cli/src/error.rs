use std::io;
use std::path::Path;

use priorart_core::corpus::CorpusError;
use priorart_core::lexical::LexicalError;
use priorart_core::pipeline::PipelineError;
use priorart_core::storage::PersistError;
use thiserror::Error;

/// Process-level failure. `Usage` covers bad flags and bad input files
/// (exit 2); everything else is a runtime failure (exit 1).
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }

    /// Missing or unreadable input paths are input errors.
    pub fn io(path: &Path, e: io::Error) -> Self {
        let msg = format!("{}: {e}", path.display());
        match e.kind() {
            io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied | io::ErrorKind::InvalidData => {
                CliError::Usage(msg)
            }
            _ => CliError::Runtime(msg),
        }
    }

    pub fn corpus(path: &Path, e: CorpusError) -> Self {
        match e {
            CorpusError::Io(e) => CliError::io(path, e),
            other => CliError::Usage(format!("{}: {other}", path.display())),
        }
    }

    pub fn persist(e: PersistError) -> Self {
        match e {
            PersistError::Io { path, source } => CliError::io(&path, source),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidQuery(_)
            | PipelineError::QueryNotEmbeddable
            | PipelineError::NoForest
            | PipelineError::UnknownSpan(_)
            | PipelineError::Lexical(LexicalError::EmptyQuery | LexicalError::ZeroResults) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}
