use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use madprompts_core::backend::BackendDescriptor;
use madprompts_core::classifier::{write_scores_csv, ScoreCsvError};
use madprompts_core::preprocess::{NormalizationProfile, ProfileName};
use madprompts_core::prompts::{aggregate, all_prompt_strings, prompts_for};
use madprompts_core::report::{evaluate_subsets, EvalReport, ReportSettings};
use madprompts_core::{
    classify_batch, CacheBackend, DatasetManifest, Embedding, EmbeddingBackend, EmbeddingCache,
    Label, Preprocessor, PromptSetSelector, SampleRef,
};
use madprompts_neural::NeuralBackend;
use rayon::prelude::*;

use crate::error::CliError;
use crate::preset::{profile_str, run_key};

/// Where image and text embeddings come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingSource {
    /// Precomputed EMB1 files. Text defaults to the image file.
    Cache {
        images: PathBuf,
        text: Option<PathBuf>,
    },
    /// Model directory with both encoders and the tokenizer.
    Neural(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub manifest: PathBuf,
    pub source: EmbeddingSource,
    /// One report per selector, all sharing the image embeddings.
    pub selectors: Vec<PromptSetSelector>,
    pub dot_mode: bool,
    pub profile: ProfileName,
    pub normalize_before_average: bool,
    pub preserve_aspect: bool,
    pub out: PathBuf,
    /// `None` uses all logical CPUs.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub key: String,
    pub report: EvalReport,
    pub json_path: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOptions {
    pub manifest: PathBuf,
    pub backend: PathBuf,
    pub out: PathBuf,
    /// Also write embeddings of every shipped prompt, both dot modes.
    pub text_out: Option<PathBuf>,
    pub profile: ProfileName,
    pub preserve_aspect: bool,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedSummary {
    pub written: usize,
    pub failed: Vec<String>,
    pub dim: usize,
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn open_backend(source: &EmbeddingSource) -> Result<Box<dyn EmbeddingBackend>, CliError> {
    Ok(match source {
        EmbeddingSource::Cache { images, text } => {
            let text = text.as_deref().unwrap_or(images);
            Box::new(CacheBackend::open_split(images, text)?)
        }
        EmbeddingSource::Neural(dir) => Box::new(NeuralBackend::open(dir)?),
    })
}

fn embed_sample(
    backend: &dyn EmbeddingBackend,
    pre: &Preprocessor,
    sample: &SampleRef,
) -> Result<Embedding, String> {
    let tensor = pre
        .load(&sample.path, sample.crop)
        .map_err(|e| e.to_string())?;
    backend.embed_image(&tensor).map_err(|e| e.to_string())
}

/// Embedding for every sample, in manifest order. Cache backends look
/// samples up by id; live backends read and preprocess the image.
fn image_embeddings(
    backend: &dyn EmbeddingBackend,
    descriptor: &BackendDescriptor,
    manifest: &DatasetManifest,
    pre: &Preprocessor,
) -> Vec<Result<Embedding, String>> {
    let by_id = descriptor.kind == madprompts_core::BackendKind::Cache;
    manifest
        .samples()
        .par_iter()
        .map(|s| {
            if by_id {
                backend.lookup_image(&s.id).map_err(|e| e.to_string())
            } else {
                embed_sample(backend, pre, s)
            }
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(CliError::io(path))
}

/// Scores every sample against each requested prompt set and writes
/// `report_<key>.json`, `report_<key>.csv` and `scores_<key>.csv` into the
/// output directory.
pub fn cmd_eval(opts: &EvalOptions) -> Result<Vec<EvalOutput>, CliError> {
    if opts.selectors.is_empty() {
        return Err(CliError::Config("no prompt set selected".into()));
    }
    let manifest = DatasetManifest::load(&opts.manifest)?;
    let backend = open_backend(&opts.source)?;
    let descriptor = backend.descriptor();
    if descriptor.kind == madprompts_core::BackendKind::Cache {
        log::info!("cached image embeddings: normalization profile is recorded but not applied");
    }
    let pre = Preprocessor {
        profile: NormalizationProfile::from_name(opts.profile),
        preserve_aspect: opts.preserve_aspect,
    };

    let embeddings = in_pool(opts.threads, || {
        image_embeddings(backend.as_ref(), &descriptor, &manifest, &pre)
    })?;
    let missing: Vec<String> = manifest
        .samples()
        .iter()
        .zip(&embeddings)
        .filter_map(|(s, e)| {
            e.as_ref().err().map(|why| {
                log::error!("sample {}: {why}", s.id);
                s.id.clone()
            })
        })
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingEmbedding(missing));
    }
    let embeddings: Vec<Embedding> = embeddings.into_iter().map(Result::unwrap).collect();
    let by_id: HashMap<&str, &Embedding> = manifest
        .samples()
        .iter()
        .map(|s| s.id.as_str())
        .zip(&embeddings)
        .collect();

    fs::create_dir_all(&opts.out).map_err(CliError::io(&opts.out))?;
    let mut outputs = Vec::with_capacity(opts.selectors.len());
    for &selector in &opts.selectors {
        let proto = aggregate(
            backend.as_ref(),
            selector,
            opts.dot_mode,
            opts.normalize_before_average,
        )?;
        let outcome = in_pool(opts.threads, || {
            classify_batch(
                manifest.samples(),
                |s| {
                    by_id
                        .get(s.id.as_str())
                        .map(|e| (*e).clone())
                        .ok_or("unknown sample")
                },
                &proto,
            )
        })?;
        if !outcome.skipped.is_empty() {
            return Err(CliError::MissingEmbedding(
                outcome.skipped.into_iter().map(|s| s.id).collect(),
            ));
        }

        let mut report = evaluate_subsets(&outcome.records)?;
        report.settings = Some(ReportSettings {
            selector: selector.name().into(),
            dot_mode: opts.dot_mode,
            normalization: profile_str(opts.profile).into(),
            normalize_before_average: opts.normalize_before_average,
            prompt_count: proto.prompt_count,
        });

        let key = run_key(selector, opts.dot_mode, opts.profile);
        let json_path = opts.out.join(format!("report_{key}.json"));
        write_file(&json_path, report.to_json().as_bytes())?;
        let mut csv = Vec::new();
        report.write_csv(&mut csv).map_err(ScoreCsvError::from)?;
        write_file(&opts.out.join(format!("report_{key}.csv")), &csv)?;
        let mut scores = Vec::new();
        write_scores_csv(&outcome.records, &mut scores)?;
        write_file(&opts.out.join(format!("scores_{key}.csv")), &scores)?;

        outputs.push(EvalOutput {
            key,
            report,
            json_path,
        });
    }
    Ok(outputs)
}

/// Extracts one raw image embedding per readable sample into an EMB1 file.
/// Unreadable samples are logged and left out; more than 1% of them makes
/// the command fail after the cache has been written.
pub fn cmd_embed(opts: &EmbedOptions) -> Result<EmbedSummary, CliError> {
    let manifest = DatasetManifest::load(&opts.manifest)?;
    let backend = NeuralBackend::open(&opts.backend)?;
    let pre = Preprocessor {
        profile: NormalizationProfile::from_name(opts.profile),
        preserve_aspect: opts.preserve_aspect,
    };
    let results = in_pool(opts.threads, || {
        manifest
            .samples()
            .par_iter()
            .map(|s| embed_sample(&backend, &pre, s))
            .collect::<Vec<_>>()
    })?;

    let dim = backend.dim();
    let mut cache = EmbeddingCache::new(dim).map_err(CliError::CacheWrite)?;
    let mut failed = Vec::new();
    for (sample, result) in manifest.samples().iter().zip(results) {
        match result {
            Ok(e) => cache
                .insert_embedding(&sample.id, &e)
                .map_err(CliError::CacheWrite)?,
            Err(why) => {
                log::warn!("skipping sample {}: {why}", sample.id);
                failed.push(sample.id.clone());
            }
        }
    }
    cache.save(&opts.out).map_err(CliError::CacheWrite)?;

    if let Some(text_out) = &opts.text_out {
        let mut text = EmbeddingCache::new(dim).map_err(CliError::CacheWrite)?;
        for dot in [true, false] {
            for prompt in all_prompt_strings(dot) {
                let e = backend.embed_text(&prompt)?;
                text.insert_embedding(prompt, &e)
                    .map_err(CliError::CacheWrite)?;
            }
        }
        text.save(text_out).map_err(CliError::CacheWrite)?;
    }

    if failed.len() * 100 > manifest.len() {
        return Err(CliError::TooManyFailures {
            failed: failed.len(),
            total: manifest.len(),
        });
    }
    Ok(EmbedSummary {
        written: cache.len(),
        failed,
        dim,
    })
}

/// Newline-terminated prompt listing.
pub fn prompts_dump(selector: PromptSetSelector, label: Label, dot_mode: bool) -> String {
    let mut out = String::new();
    for p in prompts_for(selector, label, dot_mode) {
        out.push_str(&p);
        out.push('\n');
    }
    out
}

/// Metric report straight from a score CSV.
pub fn cmd_metrics(scores: &Path) -> Result<EvalReport, CliError> {
    let file = fs::File::open(scores).map_err(CliError::io(scores))?;
    let records = madprompts_core::classifier::read_scores_csv(file)?;
    Ok(evaluate_subsets(&records)?)
}
