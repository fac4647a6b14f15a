use std::path::PathBuf;

use madprompts_core::cache::CacheError;
use madprompts_core::classifier::ScoreCsvError;
use madprompts_core::prompts::PromptError;
use madprompts_core::{BackendError, ManifestError, MetricError};
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("no embedding for {} sample(s), first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or(""))]
    MissingEmbedding(Vec<String>),
    #[error("{failed} of {total} samples failed to embed (limit is 1%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Scores(#[from] ScoreCsvError),
    #[error("cannot write cache: {0}")]
    CacheWrite(CacheError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Prompt(PromptError::MalformedTemplate(_) | PromptError::UnknownSelector(_)) => {
                EXIT_CONFIG
            }
            Self::Backend(_) | Self::Prompt(_) => EXIT_BACKEND,
            Self::Manifest(_)
            | Self::MissingEmbedding(_)
            | Self::TooManyFailures { .. }
            | Self::Metric(_)
            | Self::Scores(_)
            | Self::CacheWrite(_)
            | Self::Io { .. } => EXIT_DATA,
        }
    }
}
