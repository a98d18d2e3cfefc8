use std::path::PathBuf;

use phonexl_core::corpus::{CorpusError, VocabError};
use phonexl_core::dictionary::DictionaryError;
use phonexl_core::nnet::NnetError;
use phonexl_core::objectives::ObjectiveError;
use phonexl_core::transcription::TranscriptionError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
    #[error("checkpoint {}: {message}", .path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error(transparent)]
    Transcription(#[from] TranscriptionError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("model: {0}")]
    Model(String),
}

impl Error {
    /// Process exit code: 2 for invalid input, 3 for numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Numerical(_) => 3,
            _ => 2,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl From<NnetError> for Error {
    fn from(e: NnetError) -> Self {
        match e {
            NnetError::Numerical(m) => Error::Numerical(format!("non-finite values in {m}")),
            other => Error::Model(other.to_string()),
        }
    }
}

impl From<ObjectiveError> for Error {
    fn from(e: ObjectiveError) -> Self {
        match e {
            ObjectiveError::Nnet(n) => n.into(),
            other => Error::Model(other.to_string()),
        }
    }
}

impl From<CorpusError> for Error {
    fn from(e: CorpusError) -> Self {
        Error::Model(e.to_string())
    }
}

impl From<VocabError> for Error {
    fn from(e: VocabError) -> Self {
        Error::Model(e.to_string())
    }
}

impl From<DictionaryError> for Error {
    fn from(e: DictionaryError) -> Self {
        Error::Model(e.to_string())
    }
}
