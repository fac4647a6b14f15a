//! Live ONNX encoders for the embedding backend trait.
//!
//! A model directory holds `image_encoder.onnx`, `text_encoder.onnx` and
//! `tokenizer.json`. The image graph takes one `[1, 3, H, W]` f32 tensor,
//! the text graph takes `[1, context]` i64 token ids (and optionally an
//! attention mask as its second input). Both must return a `[1, dim]`
//! embedding as their first output.

use std::path::{Path, PathBuf};

use madprompts_core::backend::BackendDescriptor;
use madprompts_core::preprocess::INPUT_SIZE;
use madprompts_core::prompts::all_prompt_strings;
use madprompts_core::{BackendError, BackendKind, Embedding, EmbeddingBackend, PixelTensor};
use tokenizers::Tokenizer;
use tract_onnx::prelude::*;
use tract_onnx::tract_hir::infer::Factoid;
use tract_onnx::tract_hir::internal::DimLike;

pub const IMAGE_ENCODER_FILE: &str = "image_encoder.onnx";
pub const TEXT_ENCODER_FILE: &str = "text_encoder.onnx";
pub const TOKENIZER_FILE: &str = "tokenizer.json";

/// Used when the text graph leaves its sequence axis symbolic.
pub const DEFAULT_CONTEXT: usize = 77;

type Plan = TypedRunnableModel<TypedModel>;

pub struct NeuralBackend {
    dir: PathBuf,
    image: Plan,
    image_hw: (usize, usize),
    text: Plan,
    text_takes_mask: bool,
    context: usize,
    tokenizer: Tokenizer,
    pad_id: i64,
    dim: usize,
}

fn unavailable(what: &Path, e: impl std::fmt::Display) -> BackendError {
    BackendError::Unavailable(format!("{}: {e}", what.display()))
}

/// Concrete extents of an input, `None` for symbolic axes.
fn input_dims(model: &InferenceModel, ix: usize) -> TractResult<Vec<Option<usize>>> {
    let fact = model.input_fact(ix)?;
    let dims = fact
        .shape
        .dims()
        .map(|d| d.concretize().and_then(|d| d.to_usize().ok()))
        .collect();
    Ok(dims)
}

fn load_image_plan(path: &Path) -> TractResult<(Plan, (usize, usize))> {
    let mut model = tract_onnx::onnx().model_for_path(path)?;
    let dims = input_dims(&model, 0)?;
    let at = |i: usize| dims.get(i).copied().flatten().unwrap_or(INPUT_SIZE);
    let hw = (at(2), at(3));
    model.set_input_fact(0, f32::fact([1, 3, hw.0, hw.1]).into())?;
    Ok((model.into_optimized()?.into_runnable()?, hw))
}

fn load_text_plan(path: &Path) -> TractResult<(Plan, usize, bool)> {
    let mut model = tract_onnx::onnx().model_for_path(path)?;
    let context = input_dims(&model, 0)?
        .get(1)
        .copied()
        .flatten()
        .unwrap_or(DEFAULT_CONTEXT);
    let inputs = model.inputs.len();
    for ix in 0..inputs.min(2) {
        model.set_input_fact(ix, i64::fact([1, context]).into())?;
    }
    Ok((
        model.into_optimized()?.into_runnable()?,
        context,
        inputs >= 2,
    ))
}

fn first_output_vector(outputs: TVec<TValue>) -> Result<Vec<f64>, BackendError> {
    let out = outputs
        .into_iter()
        .next()
        .ok_or_else(|| BackendError::Inference("graph produced no output".into()))?;
    let shape = out.shape().to_vec();
    let rows: usize = shape.iter().rev().skip(1).product();
    if shape.is_empty() || rows != 1 {
        return Err(BackendError::Inference(format!(
            "expected a [1, dim] embedding, got shape {shape:?}"
        )));
    }
    let out = out
        .cast_to::<f32>()
        .map_err(|e| BackendError::Inference(e.to_string()))?;
    let view = out
        .as_slice::<f32>()
        .map_err(|e| BackendError::Inference(e.to_string()))?;
    Ok(view.iter().map(|&v| v as f64).collect())
}

impl NeuralBackend {
    /// Loads both encoders and the tokenizer, checks that every shipped
    /// prompt fits the text context, and discovers the embedding width by
    /// running each graph once.
    pub fn open(dir: &Path) -> Result<Self, BackendError> {
        let image_path = dir.join(IMAGE_ENCODER_FILE);
        let text_path = dir.join(TEXT_ENCODER_FILE);
        let tok_path = dir.join(TOKENIZER_FILE);
        for p in [&image_path, &text_path, &tok_path] {
            if !p.is_file() {
                return Err(unavailable(p, "missing"));
            }
        }

        let mut tokenizer =
            Tokenizer::from_file(&tok_path).map_err(|e| unavailable(&tok_path, e))?;
        let pad_id = tokenizer.get_padding().map_or(0, |p| p.pad_id as i64);
        // Over-long prompts must surface as errors, not be cut silently.
        tokenizer.with_padding(None);
        tokenizer
            .with_truncation(None)
            .map_err(|e| unavailable(&tok_path, e))?;

        let (image, image_hw) =
            load_image_plan(&image_path).map_err(|e| unavailable(&image_path, e))?;
        let (text, context, text_takes_mask) =
            load_text_plan(&text_path).map_err(|e| unavailable(&text_path, e))?;
        log::debug!("text context {context}, image input {image_hw:?}");

        let mut backend = Self {
            dir: dir.to_path_buf(),
            image,
            image_hw,
            text,
            text_takes_mask,
            context,
            tokenizer,
            pad_id,
            dim: 0,
        };

        for dot_mode in [true, false] {
            for prompt in all_prompt_strings(dot_mode) {
                backend.token_ids(&prompt)?;
            }
        }

        let probe = PixelTensor::constant(image_hw.0, image_hw.1, [0.0; 3]);
        let image_dim = backend.run_image(&probe)?.dim();
        let text_dim = backend
            .run_text(madprompts_core::prompts::ATTACK_TERM)?
            .dim();
        if image_dim != text_dim {
            return Err(BackendError::DimMismatch {
                image: image_dim,
                text: text_dim,
            });
        }
        backend.dim = image_dim;
        Ok(backend)
    }

    pub fn context_length(&self) -> usize {
        self.context
    }

    /// Spatial size the image encoder expects.
    pub fn image_size(&self) -> (usize, usize) {
        self.image_hw
    }

    /// Token ids including the special tokens the tokenizer adds, before
    /// padding.
    pub fn token_ids(&self, prompt: &str) -> Result<Vec<u32>, BackendError> {
        if prompt.is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let enc = self
            .tokenizer
            .encode(prompt, true)
            .map_err(|e| BackendError::Inference(format!("tokenize {prompt:?}: {e}")))?;
        let ids = enc.get_ids().to_vec();
        if ids.len() > self.context {
            return Err(BackendError::TokenizationOverflow {
                prompt: prompt.to_owned(),
                tokens: ids.len(),
                context: self.context,
            });
        }
        Ok(ids)
    }

    fn run_image(&self, pixels: &PixelTensor) -> Result<Embedding, BackendError> {
        let (h, w) = self.image_hw;
        if pixels.height() != h || pixels.width() != w {
            return Err(BackendError::BadInput {
                height: pixels.height(),
                width: pixels.width(),
            });
        }
        let input = Tensor::from_shape(&[1, 3, h, w], pixels.data())
            .map_err(|e| BackendError::Inference(e.to_string()))?;
        let out = self
            .image
            .run(tvec![input.into_tvalue()])
            .map_err(|e| BackendError::Inference(e.to_string()))?;
        Ok(Embedding::new(first_output_vector(out)?)?)
    }

    fn run_text(&self, prompt: &str) -> Result<Embedding, BackendError> {
        let ids = self.token_ids(prompt)?;
        let mut padded = vec![self.pad_id; self.context];
        let mut mask = vec![0i64; self.context];
        for (i, &id) in ids.iter().enumerate() {
            padded[i] = id as i64;
            mask[i] = 1;
        }
        let tensor = |v: Vec<i64>| {
            Tensor::from_shape(&[1, self.context], &v)
                .map_err(|e| BackendError::Inference(e.to_string()))
        };
        let mut inputs = tvec![tensor(padded)?.into_tvalue()];
        if self.text_takes_mask {
            inputs.push(tensor(mask)?.into_tvalue());
        }
        let out = self
            .text
            .run(inputs)
            .map_err(|e| BackendError::Inference(e.to_string()))?;
        Ok(Embedding::new(first_output_vector(out)?)?)
    }
}

impl EmbeddingBackend for NeuralBackend {
    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::NeuralRuntime,
            source: self.dir.clone(),
            dim: self.dim,
        }
    }

    fn embed_image(&self, pixels: &PixelTensor) -> Result<Embedding, BackendError> {
        self.run_image(pixels)
    }

    fn embed_text(&self, prompt: &str) -> Result<Embedding, BackendError> {
        self.run_text(prompt)
    }
}
