//! Flag definitions and their merge with the optional config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use madprompts_core::preprocess::ProfileName;
use madprompts_core::PromptSetSelector;

use crate::commands::{EmbedOptions, EmbeddingSource, EvalOptions};
use crate::config::FileConfig;
use crate::error::CliError;
use crate::preset::{find_preset, parse_label, parse_profile};

#[derive(Debug, Parser)]
#[command(
    name = "madprompts",
    version,
    about = "Zero-shot morphing attack detection with prompt ensembles"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG also works.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract raw image embeddings into an EMB1 cache.
    Embed(EmbedArgs),
    /// Score a manifest and write metric reports.
    Eval(EvalArgs),
    /// Prompt listings.
    #[command(subcommand)]
    Prompts(PromptsCommand),
    /// Metric report from a score CSV.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: logical CPUs).
    #[arg(long, env = "MADPROMPTS_THREADS")]
    pub threads: Option<usize>,
    /// Normalization profile: clip or half.
    #[arg(long)]
    pub norm: Option<String>,
    /// Resize the shorter side and center-crop instead of squashing.
    #[arg(long)]
    pub preserve_aspect: bool,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Model directory with image_encoder.onnx, text_encoder.onnx, tokenizer.json.
    #[arg(long)]
    pub backend: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write embeddings of all shipped prompts here.
    #[arg(long)]
    pub text_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// EMB1 file with image embeddings keyed by sample id.
    #[arg(long, conflicts_with = "backend")]
    pub cache: Option<PathBuf>,
    /// EMB1 file with prompt embeddings (default: the --cache file).
    #[arg(long, requires = "cache")]
    pub text_cache: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<PathBuf>,
    /// single, id, pr, ap, id+pr, id+ap, pr+ap or all.
    #[arg(long)]
    pub selector: Option<String>,
    /// Named setting: ti, ti-no-dot, ti-dot, id, pr, ap, id+pr, id+ap, pr+ap, all.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, overrides_with = "no_dot")]
    pub dot: bool,
    #[arg(long, overrides_with = "dot")]
    pub no_dot: bool,
    /// Evaluate all eight prompt sets.
    #[arg(long)]
    pub grid: bool,
    /// Average raw prompt embeddings instead of unit-normalized ones.
    #[arg(long)]
    pub aggregate_raw: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum PromptsCommand {
    /// Print the expanded prompts, one per line.
    Dump(DumpArgs),
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub selector: String,
    /// bona-fide or attack.
    #[arg(long)]
    pub label: String,
    #[arg(long, overrides_with = "no_dot")]
    pub dot: bool,
    #[arg(long, overrides_with = "dot")]
    pub no_dot: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// CSV with sample_id,subset,truth,score,decision.
    #[arg(long)]
    pub scores: PathBuf,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("--{flag} is required (flag or config key)")))
}

fn dot_flag(dot: bool, no_dot: bool) -> Option<bool> {
    match (dot, no_dot) {
        (true, _) => Some(true),
        (_, true) => Some(false),
        _ => None,
    }
}

pub fn parse_selector(s: &str) -> Result<PromptSetSelector, CliError> {
    s.parse()
        .map_err(|_| CliError::Config(format!("unknown selector {s:?}")))
}

fn profile(
    flag: Option<&str>,
    cfg: &FileConfig,
    preset: Option<ProfileName>,
) -> Result<ProfileName, CliError> {
    match flag.or(cfg.norm.as_deref()) {
        Some(s) => {
            parse_profile(s).ok_or_else(|| CliError::Config(format!("unknown normalization {s:?}")))
        }
        None => Ok(preset.unwrap_or(ProfileName::ClipNative)),
    }
}

impl EmbedArgs {
    pub fn resolve(self) -> Result<EmbedOptions, CliError> {
        let cfg = FileConfig::load_opt(self.common.config.as_deref())?;
        Ok(EmbedOptions {
            manifest: required(self.manifest.or(cfg.manifest.clone()), "manifest")?,
            backend: required(self.backend.or(cfg.backend.clone()), "backend")?,
            out: required(self.out.or(cfg.out.clone()), "out")?,
            text_out: self.text_out.or(cfg.text_out.clone()),
            profile: profile(self.common.norm.as_deref(), &cfg, None)?,
            preserve_aspect: self.common.preserve_aspect || cfg.preserve_aspect.unwrap_or(false),
            threads: self.common.threads.or(cfg.threads),
        })
    }
}

impl EvalArgs {
    /// Flags override config keys, which override the preset.
    pub fn resolve(self) -> Result<EvalOptions, CliError> {
        let cfg = FileConfig::load_opt(self.common.config.as_deref())?;
        let preset = match self.preset.as_deref().or(cfg.preset.as_deref()) {
            Some(name) => Some(
                find_preset(name)
                    .ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?,
            ),
            None => None,
        };

        let source = match (self.cache, self.backend) {
            (Some(images), None) => EmbeddingSource::Cache {
                images,
                text: self.text_cache,
            },
            (None, Some(dir)) => EmbeddingSource::Neural(dir),
            _ => match (cfg.cache.clone(), cfg.backend.clone()) {
                (Some(images), None) => EmbeddingSource::Cache {
                    images,
                    text: cfg.text_cache.clone(),
                },
                (None, Some(dir)) => EmbeddingSource::Neural(dir),
                _ => {
                    return Err(CliError::Config(
                        "exactly one of --cache or --backend is required".into(),
                    ))
                }
            },
        };

        let selectors = if self.grid || cfg.grid.unwrap_or(false) {
            PromptSetSelector::ALL_SELECTORS.to_vec()
        } else {
            let selector = match self.selector.as_deref().or(cfg.selector.as_deref()) {
                Some(s) => parse_selector(s)?,
                None => preset.map_or(PromptSetSelector::Single, |p| p.selector),
            };
            vec![selector]
        };

        Ok(EvalOptions {
            manifest: required(self.manifest.or(cfg.manifest.clone()), "manifest")?,
            source,
            selectors,
            dot_mode: dot_flag(self.dot, self.no_dot)
                .or(cfg.dot)
                .or(preset.map(|p| p.dot_mode))
                .unwrap_or(true),
            profile: profile(self.common.norm.as_deref(), &cfg, preset.map(|p| p.profile))?,
            normalize_before_average: !(self.aggregate_raw || cfg.aggregate_raw.unwrap_or(false)),
            preserve_aspect: self.common.preserve_aspect || cfg.preserve_aspect.unwrap_or(false),
            out: required(self.out.or(cfg.out.clone()), "out")?,
            threads: self.common.threads.or(cfg.threads),
        })
    }
}

impl DumpArgs {
    pub fn resolve(&self) -> Result<(PromptSetSelector, madprompts_core::Label, bool), CliError> {
        let label = parse_label(&self.label)
            .ok_or_else(|| CliError::Config(format!("unknown label {:?}", self.label)))?;
        Ok((
            parse_selector(&self.selector)?,
            label,
            dot_flag(self.dot, self.no_dot).unwrap_or(true),
        ))
    }
}
