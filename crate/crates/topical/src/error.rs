//! Crate error type and process exit-code mapping.

use std::path::PathBuf;

use thiserror::Error;

use crate::gateway::GatewayError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {reason}")]
    CorpusLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate document id {id:?}")]
    DuplicateDocumentId { id: String },

    #[error("empty corpus: {path} contains no documents")]
    EmptyCorpus { path: PathBuf },

    #[error(
        "token budget too small: need at least {needed} tokens for one document \
         (budget {budget}, overhead {overhead})"
    )]
    BudgetTooSmall {
        needed: usize,
        budget: usize,
        overhead: usize,
    },

    #[error("parse failure: {reason}; response excerpt: {excerpt:?}")]
    ParseFailure { reason: String, excerpt: String },

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error("only {usable} of {parsed} topic cards are usable; need at least 3")]
    TooFewUsableCards { usable: usize, parsed: usize },

    #[error("distribution is not normalized: sum = {sum}")]
    NotNormalized { sum: f64 },

    #[error("missing artifact {path}: run the `{stage}` stage first")]
    MissingArtifact { path: PathBuf, stage: &'static str },
}

impl Error {
    /// Process exit code for CLI consumers.
    ///
    /// 0 success, 2 config/input error, 3 parse failure, 4 network failure,
    /// 5 validation-fatal (fewer than 3 usable topic cards), 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidInput(_)
            | Error::CorpusLine { .. }
            | Error::DuplicateDocumentId { .. }
            | Error::EmptyCorpus { .. }
            | Error::BudgetTooSmall { .. }
            | Error::MissingArtifact { .. } => 2,
            Error::ParseFailure { .. } => 3,
            Error::Gateway(_) => 4,
            Error::TooFewUsableCards { .. } => 5,
            Error::Io { .. } | Error::NotNormalized { .. } => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
