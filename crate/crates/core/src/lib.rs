//! Zero-shot morphing attack detection (MAD) built on contrastive
//! text-image embeddings.
//!
//! Each class (bona-fide, morphing attack) is represented by a prototype:
//! the renormalized mean of the text embeddings of a set of describing
//! prompts. A face image is scored by comparing its embedding against the
//! two prototypes, and detection quality is summarized with the ISO/IEC
//! 30107-3 error rates (EER, APCER, BPCER).

pub mod backend;
pub mod cache;
pub mod classifier;
pub mod embedding;
pub mod manifest;
pub mod metrics;
pub mod preprocess;
pub mod prompts;
pub mod report;

pub use backend::{BackendError, BackendKind, CacheBackend, EmbeddingBackend};
pub use cache::{CacheError, EmbeddingCache};
pub use classifier::{classify_batch, score_sample, BatchOutcome, ScoreRecord, SkippedSample};
pub use embedding::{
    cosine_similarity, l2_normalize, Embedding, EmbeddingError, Label, UnitEmbedding,
};
pub use manifest::{CropBox, DatasetManifest, ManifestError, SampleRef};
pub use metrics::{
    aggregate_rows, eer, error_at_fixed, sweep, FixedMetric, MetricError, MetricReport,
    OperatingPoint,
};
pub use preprocess::{
    NormalizationProfile, PixelTensor, PreprocessError, Preprocessor, ProfileName,
};
pub use prompts::{
    aggregate, aggregate_embeddings, build_prompt_lists, expand, ClassPrototype, PromptSetSelector,
};
