//! Image preprocessing: decode, optional crop, bicubic resize to the
//! encoder resolution and per-channel normalization.
//!
//! The resampler follows the separable convolution scheme used by PIL
//! (`Image.resize(..., BICUBIC)`): a Keys cubic kernel with `a = -0.5`
//! whose support is stretched by the scale factor when downsampling, and
//! whose taps are renormalized at the borders.

use std::path::Path;

use thiserror::Error;

/// Side length of the square encoder input.
pub const INPUT_SIZE: usize = 224;

const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("image is empty")]
    EmptyImage,
    #[error("crop box {0:?} does not fit a {1}x{2} image")]
    InvalidCrop(CropBox, u32, u32),
    #[error("failed to decode {path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("pixel buffer length {got} does not match 3x{height}x{width}")]
    Shape {
        got: usize,
        height: usize,
        width: usize,
    },
}

/// Axis-aligned crop in pixel coordinates, inclusive-exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CropBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileName {
    ClipNative,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationProfile {
    pub name: ProfileName,
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl NormalizationProfile {
    /// The statistics the encoder was trained with, digits as published.
    #[allow(clippy::excessive_precision)]
    pub const CLIP_NATIVE: Self = Self {
        name: ProfileName::ClipNative,
        mean: [0.48145466, 0.4578275, 0.40821073],
        std: [0.26862954, 0.26130258, 0.27577711],
    };

    /// Mean and std of 0.5 on every channel.
    pub const HALF: Self = Self {
        name: ProfileName::Half,
        mean: [0.5, 0.5, 0.5],
        std: [0.5, 0.5, 0.5],
    };

    pub fn from_name(name: ProfileName) -> Self {
        match name {
            ProfileName::ClipNative => Self::CLIP_NATIVE,
            ProfileName::Half => Self::HALF,
        }
    }
}

/// Planar RGB tensor (channel, row, column), single precision.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelTensor {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PixelTensor {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self, PreprocessError> {
        if data.len() != CHANNELS * height * width {
            return Err(PreprocessError::Shape {
                got: data.len(),
                height,
                width,
            });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn constant(height: usize, width: usize, per_channel: [f32; 3]) -> Self {
        let plane = height * width;
        let mut data = Vec::with_capacity(CHANNELS * plane);
        for value in per_channel {
            data.extend(std::iter::repeat_n(value, plane));
        }
        Self {
            height,
            width,
            data,
        }
    }

    /// Converts 8-bit RGB to `[0, 1]` by dividing by 255.
    pub fn from_rgb8(img: &image::RgbImage) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let plane = w * h;
        let mut data = vec![0.0f32; CHANNELS * plane];
        for (i, px) in img.pixels().enumerate() {
            for c in 0..CHANNELS {
                data[c * plane + i] = f32::from(px.0[c]) / 255.0;
            }
        }
        Self {
            height: h,
            width: w,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_empty(&self) -> bool {
        self.height == 0 || self.width == 0
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[c * plane..(c + 1) * plane]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }

    fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Self {
        let mut data = Vec::with_capacity(CHANNELS * height * width);
        for c in 0..CHANNELS {
            for y in top..top + height {
                let row = (c * self.height + y) * self.width;
                data.extend_from_slice(&self.data[row + left..row + left + width]);
            }
        }
        Self {
            height,
            width,
            data,
        }
    }
}

fn cubic(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x < 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        (((x - 5.0) * x + 8.0) * x - 4.0) * A
    } else {
        0.0
    }
}

/// Per output index: first input index and normalized tap weights.
fn resample_taps(in_size: usize, out_size: usize) -> Vec<(usize, Vec<f64>)> {
    let scale = in_size as f64 / out_size as f64;
    let filter_scale = scale.max(1.0);
    let support = 2.0 * filter_scale;
    (0..out_size)
        .map(|i| {
            let center = (i as f64 + 0.5) * scale;
            let lo = ((center - support + 0.5) as i64).max(0) as usize;
            let hi = ((center + support + 0.5) as i64).min(in_size as i64) as usize;
            let mut weights: Vec<f64> = (lo..hi)
                .map(|x| cubic((x as f64 - center + 0.5) / filter_scale))
                .collect();
            let total: f64 = weights.iter().sum();
            if total != 0.0 {
                weights.iter_mut().for_each(|w| *w /= total);
            }
            (lo, weights)
        })
        .collect()
}

/// Resamples one `height x width` plane to `out_h x out_w` without clamping.
/// Horizontal pass first, then vertical.
pub(crate) fn resample_plane(
    plane: &[f64],
    height: usize,
    width: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<f64> {
    let h_taps = resample_taps(width, out_w);
    let mut horizontal = vec![0.0; height * out_w];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for (x, (lo, weights)) in h_taps.iter().enumerate() {
            horizontal[y * out_w + x] = weights
                .iter()
                .zip(&row[*lo..])
                .fold(0.0, |acc, (w, v)| acc + w * v);
        }
    }
    let v_taps = resample_taps(height, out_h);
    let mut out = vec![0.0; out_h * out_w];
    for (y, (lo, weights)) in v_taps.iter().enumerate() {
        for x in 0..out_w {
            out[y * out_w + x] = weights.iter().enumerate().fold(0.0, |acc, (k, w)| {
                acc + w * horizontal[(lo + k) * out_w + x]
            });
        }
    }
    out
}

/// Bicubic resize to `out_h x out_w`, clamping results to `[0, 1]`.
pub fn resize_to(
    img: &PixelTensor,
    out_h: usize,
    out_w: usize,
) -> Result<PixelTensor, PreprocessError> {
    if img.is_empty() || out_h == 0 || out_w == 0 {
        return Err(PreprocessError::EmptyImage);
    }
    if img.height == out_h && img.width == out_w {
        return Ok(img.clone());
    }
    let mut data = Vec::with_capacity(CHANNELS * out_h * out_w);
    for c in 0..CHANNELS {
        let plane: Vec<f64> = img.channel(c).iter().map(|&v| f64::from(v)).collect();
        let resized = resample_plane(&plane, img.height, img.width, out_h, out_w);
        data.extend(resized.into_iter().map(|v| v.clamp(0.0, 1.0) as f32));
    }
    Ok(PixelTensor {
        height: out_h,
        width: out_w,
        data,
    })
}

/// Bicubic resize to the 224x224 encoder input.
pub fn resize(img: &PixelTensor) -> Result<PixelTensor, PreprocessError> {
    resize_to(img, INPUT_SIZE, INPUT_SIZE)
}

/// Resizes the shorter side to 224 and center-crops the longer one.
pub fn resize_preserving_aspect(img: &PixelTensor) -> Result<PixelTensor, PreprocessError> {
    if img.is_empty() {
        return Err(PreprocessError::EmptyImage);
    }
    let (h, w) = (img.height, img.width);
    let (out_h, out_w) = if h <= w {
        (INPUT_SIZE, ((INPUT_SIZE * w) as f64 / h as f64) as usize)
    } else {
        (((INPUT_SIZE * h) as f64 / w as f64) as usize, INPUT_SIZE)
    };
    let resized = resize_to(img, out_h.max(INPUT_SIZE), out_w.max(INPUT_SIZE))?;
    let top = ((resized.height - INPUT_SIZE) as f64 / 2.0).round() as usize;
    let left = ((resized.width - INPUT_SIZE) as f64 / 2.0).round() as usize;
    Ok(resized.crop(top, left, INPUT_SIZE, INPUT_SIZE))
}

/// `(x - mean[c]) / std[c]` elementwise.
pub fn normalize(img: &PixelTensor, profile: &NormalizationProfile) -> PixelTensor {
    map_channels(img, |c, v| (v - profile.mean[c]) / profile.std[c])
}

/// Inverse of [`normalize`].
pub fn denormalize(img: &PixelTensor, profile: &NormalizationProfile) -> PixelTensor {
    map_channels(img, |c, v| v * profile.std[c] + profile.mean[c])
}

fn map_channels(img: &PixelTensor, f: impl Fn(usize, f32) -> f32) -> PixelTensor {
    let plane = img.height * img.width;
    let data = img
        .data
        .iter()
        .enumerate()
        .map(|(i, &v)| f(i / plane, v))
        .collect();
    PixelTensor {
        height: img.height,
        width: img.width,
        data,
    }
}

/// The full decode → crop → resize → normalize pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preprocessor {
    pub profile: NormalizationProfile,
    pub preserve_aspect: bool,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self {
            profile: NormalizationProfile::CLIP_NATIVE,
            preserve_aspect: false,
        }
    }
}

impl Preprocessor {
    pub fn new(profile: NormalizationProfile) -> Self {
        Self {
            profile,
            preserve_aspect: false,
        }
    }

    /// Decodes a PNG or JPEG file. Alpha is dropped, grayscale replicated.
    pub fn decode(path: &Path) -> Result<image::RgbImage, PreprocessError> {
        let decode_err = |source| PreprocessError::Decode {
            path: path.display().to_string(),
            source,
        };
        let img = image::ImageReader::open(path)
            .map_err(|e| decode_err(image::ImageError::IoError(e)))?
            .with_guessed_format()
            .map_err(|e| decode_err(image::ImageError::IoError(e)))?
            .decode()
            .map_err(decode_err)?;
        Ok(img.to_rgb8())
    }

    pub fn apply_crop(
        img: &image::RgbImage,
        crop: Option<CropBox>,
    ) -> Result<image::RgbImage, PreprocessError> {
        let Some(b) = crop else {
            return Ok(img.clone());
        };
        let (w, h) = img.dimensions();
        if b.x0 >= b.x1 || b.y0 >= b.y1 || b.x1 > w || b.y1 > h {
            return Err(PreprocessError::InvalidCrop(b, w, h));
        }
        Ok(image::imageops::crop_imm(img, b.x0, b.y0, b.x1 - b.x0, b.y1 - b.y0).to_image())
    }

    pub fn process_rgb(&self, img: &image::RgbImage) -> Result<PixelTensor, PreprocessError> {
        self.process_tensor(&PixelTensor::from_rgb8(img))
    }

    pub fn process_tensor(&self, tensor: &PixelTensor) -> Result<PixelTensor, PreprocessError> {
        let resized = if self.preserve_aspect {
            resize_preserving_aspect(tensor)?
        } else {
            resize(tensor)?
        };
        Ok(normalize(&resized, &self.profile))
    }

    pub fn load(&self, path: &Path, crop: Option<CropBox>) -> Result<PixelTensor, PreprocessError> {
        let img = Self::decode(path)?;
        let img = Self::apply_crop(&img, crop)?;
        self.process_rgb(&img)
    }
}
