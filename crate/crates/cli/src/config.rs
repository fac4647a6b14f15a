//! TOML run configuration. Every key mirrors a command line flag; flags
//! take precedence. Relative paths resolve against the file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub backend: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub text_cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub text_out: Option<PathBuf>,
    pub preset: Option<String>,
    pub selector: Option<String>,
    pub dot: Option<bool>,
    pub norm: Option<String>,
    pub grid: Option<bool>,
    pub threads: Option<usize>,
    pub preserve_aspect: Option<bool>,
    pub aggregate_raw: Option<bool>,
}

impl FileConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: Self =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        for p in [
            &mut cfg.manifest,
            &mut cfg.backend,
            &mut cfg.cache,
            &mut cfg.text_cache,
            &mut cfg.out,
            &mut cfg.text_out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
