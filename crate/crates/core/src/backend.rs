//! The embedding backend boundary: one image encoder and one text encoder
//! that share an output dimension.
//!
//! Backends return raw embeddings. Callers decide when to normalize.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::cache::{CacheError, EmbeddingCache};
use crate::embedding::{Embedding, EmbeddingError};
use crate::preprocess::PixelTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Cache,
    NeuralRuntime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub source: PathBuf,
    pub dim: usize,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("no cached embedding for key {0:?}")]
    KeyMissing(String),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("prompt {prompt:?} tokenizes to {tokens} tokens, context length is {context}")]
    TokenizationOverflow {
        prompt: String,
        tokens: usize,
        context: usize,
    },
    #[error("image encoder dimension {image} differs from text encoder dimension {text}")]
    DimMismatch { image: usize, text: usize },
    #[error("input tensor has unsupported size 3x{height}x{width}")]
    BadInput { height: usize, width: usize },
    #[error("inference failed: {0}")]
    Inference(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

/// An image and text encoder pair.
///
/// Implementations are read-only after construction and may be called from
/// several threads at once.
pub trait EmbeddingBackend: Send + Sync {
    fn descriptor(&self) -> BackendDescriptor;

    fn dim(&self) -> usize {
        self.descriptor().dim
    }

    /// Embeds a preprocessed (3x224x224, normalized) image tensor.
    fn embed_image(&self, tensor: &PixelTensor) -> Result<Embedding, BackendError>;

    /// Returns a precomputed image embedding by sample id, bypassing the
    /// tensor path. Only cache-style backends support this.
    fn lookup_image(&self, key: &str) -> Result<Embedding, BackendError> {
        Err(BackendError::Unavailable(format!(
            "{:?} backend cannot look up image {key:?} by id",
            self.descriptor().kind
        )))
    }

    fn embed_text(&self, prompt: &str) -> Result<Embedding, BackendError>;
}

/// Serves precomputed embeddings: image entries keyed by sample id, text
/// entries keyed by the exact prompt string.
#[derive(Debug, Clone)]
pub struct CacheBackend {
    source: PathBuf,
    images: EmbeddingCache,
    text: EmbeddingCache,
}

impl CacheBackend {
    pub fn new(
        source: impl Into<PathBuf>,
        images: EmbeddingCache,
        text: EmbeddingCache,
    ) -> Result<Self, BackendError> {
        if images.dim() != text.dim() {
            return Err(BackendError::DimMismatch {
                image: images.dim(),
                text: text.dim(),
            });
        }
        Ok(Self {
            source: source.into(),
            images,
            text,
        })
    }

    /// Uses one cache file for both image and text lookups.
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let cache = EmbeddingCache::load(path)?;
        Self::new(path, cache.clone(), cache)
    }

    pub fn open_split(images: &Path, text: &Path) -> Result<Self, BackendError> {
        Self::new(
            images,
            EmbeddingCache::load(images)?,
            EmbeddingCache::load(text)?,
        )
    }

    pub fn images(&self) -> &EmbeddingCache {
        &self.images
    }

    pub fn text(&self) -> &EmbeddingCache {
        &self.text
    }

    fn lookup(cache: &EmbeddingCache, key: &str) -> Result<Embedding, BackendError> {
        match cache.get(key) {
            Some(e) => Ok(e?),
            None => Err(BackendError::KeyMissing(key.to_owned())),
        }
    }
}

impl EmbeddingBackend for CacheBackend {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::Cache,
            source: self.source.clone(),
            dim: self.images.dim(),
        }
    }

    fn embed_image(&self, _tensor: &PixelTensor) -> Result<Embedding, BackendError> {
        Err(BackendError::Unavailable(
            "the cache backend has no image encoder; look images up by id".into(),
        ))
    }

    fn lookup_image(&self, key: &str) -> Result<Embedding, BackendError> {
        Self::lookup(&self.images, key)
    }

    fn embed_text(&self, prompt: &str) -> Result<Embedding, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        Self::lookup(&self.text, prompt)
    }
}
