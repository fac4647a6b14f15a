//! Shared embedding vocabulary: raw and unit-norm vectors, labels and the
//! two vector primitives everything else is built on.
//!
//! All arithmetic is done in `f64` with strict left-to-right accumulation,
//! so two runs over the same input always produce the same bits.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Norms below this value are treated as degenerate.
pub const NORM_FLOOR: f64 = 1e-12;

/// Tolerance used when checking that a vector is unit length.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("embedding has zero dimensions")]
    Empty,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector norm {norm:e} is below the floor {NORM_FLOOR:e}")]
    ZeroNorm { norm: f64 },
    #[error("vector norm {norm} is not within {UNIT_TOLERANCE:e} of 1")]
    NotUnit { norm: f64 },
    #[error("embedding contains a non-finite value")]
    NonFinite,
}

/// A raw (not necessarily normalized) embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    values: Vec<f64>,
}

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(Self { values })
    }

    /// Widens single-precision values, as stored in cache files and
    /// produced by encoders.
    pub fn from_f32(values: &[f32]) -> Result<Self, EmbeddingError> {
        Self::new(values.iter().map(|&v| f64::from(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        dot(&self.values, &self.values).sqrt()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

impl From<UnitEmbedding> for Embedding {
    fn from(unit: UnitEmbedding) -> Self {
        unit.0
    }
}

/// An embedding known to lie on the unit hypersphere.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitEmbedding(Embedding);

impl UnitEmbedding {
    /// Wraps an already-normalized vector, checking its norm.
    pub fn try_from_normalized(embedding: Embedding) -> Result<Self, EmbeddingError> {
        let norm = embedding.norm();
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(EmbeddingError::NotUnit { norm });
        }
        Ok(Self(embedding))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn as_embedding(&self) -> &Embedding {
        &self.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Scales `v` to unit L2 norm.
pub fn l2_normalize(v: &Embedding) -> Result<UnitEmbedding, EmbeddingError> {
    let norm = v.norm();
    if norm < NORM_FLOOR {
        return Err(EmbeddingError::ZeroNorm { norm });
    }
    let values = v.values.iter().map(|x| x / norm).collect();
    Ok(UnitEmbedding(Embedding { values }))
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    for norm in [na, nb] {
        if norm < NORM_FLOOR {
            return Err(EmbeddingError::ZeroNorm { norm });
        }
    }
    Ok((dot(&a.values, &b.values) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity between two unit vectors: just the dot product.
pub(crate) fn unit_cosine(a: &UnitEmbedding, b: &UnitEmbedding) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(dot(a.values(), b.values()).clamp(-1.0, 1.0))
}

/// Ground truth or predicted class. Integer codes are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    BonaFide = 0,
    Attack = 1,
}

impl Label {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::BonaFide),
            1 => Some(Label::Attack),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(deserializer)?;
        Label::from_code(code)
            .ok_or_else(|| serde::de::Error::custom(format!("label must be 0 or 1, got {code}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let u = l2_normalize(&emb(&[3.0, 4.0])).unwrap();
        assert!((u.values()[0] - 0.6).abs() < 1e-15);
        assert!((u.values()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn normalize_unit_is_identity() {
        let u = l2_normalize(&emb(&[1.0, 0.0, 0.0])).unwrap();
        assert_eq!(u.values(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_below_floor_errors() {
        assert!(matches!(
            l2_normalize(&emb(&[1e-13, 0.0])),
            Err(EmbeddingError::ZeroNorm { .. })
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0])).unwrap(),
            1.0
        );
        assert_eq!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[0.0, 1.0])).unwrap(),
            0.0
        );
        let c = cosine_similarity(&emb(&[1.0, 1.0]), &emb(&[1.0, 0.0])).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine_similarity(&emb(&[1.0, 0.0]), &emb(&[1.0, 0.0, 0.0])),
            Err(EmbeddingError::DimensionMismatch { left: 2, right: 3 })
        );
        assert!(matches!(
            cosine_similarity(&emb(&[0.0, 0.0]), &emb(&[1.0, 0.0])),
            Err(EmbeddingError::ZeroNorm { .. })
        ));
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert_eq!(Embedding::new(vec![]), Err(EmbeddingError::Empty));
        assert_eq!(
            Embedding::new(vec![f64::NAN]),
            Err(EmbeddingError::NonFinite)
        );
    }

    #[test]
    fn unit_wrapper_checks_norm() {
        assert!(UnitEmbedding::try_from_normalized(emb(&[0.6, 0.8])).is_ok());
        assert!(UnitEmbedding::try_from_normalized(emb(&[0.6, 0.9])).is_err());
    }

    #[test]
    fn label_codes() {
        assert_eq!(Label::BonaFide.code(), 0);
        assert_eq!(Label::Attack.code(), 1);
        assert_eq!(Label::from_code(2), None);
        let parsed: Label = serde_json::from_str("1").unwrap();
        assert_eq!(parsed, Label::Attack);
    }

    fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, len)
    }

    proptest! {
        #[test]
        fn cosine_with_own_normalization_is_one(v in vector(1..64)) {
            let e = emb(&v);
            prop_assume!(e.norm() >= NORM_FLOOR);
            let u = l2_normalize(&e).unwrap();
            prop_assert!((u.as_embedding().norm() - 1.0).abs() < 1e-6);
            let c = cosine_similarity(&e, u.as_embedding()).unwrap();
            prop_assert!((c - 1.0).abs() < 1e-6);
        }

        #[test]
        fn cosine_is_symmetric_and_scale_invariant(
            pair in (1usize..64).prop_flat_map(|n| (vector(n..n + 1), vector(n..n + 1))),
            s in 1e-3f64..1e3,
        ) {
            let (a, b) = (emb(&pair.0), emb(&pair.1));
            prop_assume!(a.norm() >= 1e-6 && b.norm() >= 1e-6);
            let ab = cosine_similarity(&a, &b).unwrap();
            prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
            let scaled = emb(&pair.0.iter().map(|x| x * s).collect::<Vec<_>>());
            prop_assert!((cosine_similarity(&scaled, &b).unwrap() - ab).abs() < 1e-6);
            prop_assert!((-1.0..=1.0).contains(&ab));
        }
    }
}
