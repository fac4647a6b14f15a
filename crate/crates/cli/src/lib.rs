//! Command line harness: embedding extraction, prompt-set evaluation and
//! metric reports.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod preset;

pub use commands::{
    cmd_embed, cmd_eval, cmd_metrics, prompts_dump, EmbedOptions, EmbeddingSource, EvalOptions,
};
pub use error::CliError;
