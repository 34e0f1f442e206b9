use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VectorError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("empty vector")]
    Empty,
}

/// A dense embedding. Components are stored as `f32` (the on-disk width);
/// similarity arithmetic is carried out in `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    pub fn new(components: Vec<f32>) -> Result<Self, VectorError> {
        if components.is_empty() {
            return Err(VectorError::Empty);
        }
        Ok(Self(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        dot(&self.0, &self.0).sqrt()
    }

    /// Unit-length copy of this vector.
    pub fn normalized(&self) -> Result<Self, VectorError> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(VectorError::ZeroVector);
        }
        Ok(Self(self.0.iter().map(|&x| (x as f64 / n) as f32).collect()))
    }

    /// Arithmetic mean of a non-empty set of equal-length vectors.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a EmbeddingVector>) -> Result<Self, VectorError> {
        let mut acc: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for v in vectors {
            if acc.is_empty() {
                acc = vec![0.0; v.dim()];
            } else if acc.len() != v.dim() {
                return Err(VectorError::DimMismatch { expected: acc.len(), actual: v.dim() });
            }
            for (a, &x) in acc.iter_mut().zip(v.as_slice()) {
                *a += x as f64;
            }
            count += 1;
        }
        if count == 0 {
            return Err(VectorError::Empty);
        }
        Ok(Self(acc.into_iter().map(|a| (a / count as f64) as f32).collect()))
    }
}

impl From<EmbeddingVector> for Vec<f32> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

/// Single-precision dot product used on the hot path of graph search.
#[inline]
pub(crate) fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        let base = i * 8;
        for j in 0..8 {
            acc[j] += a[base + j] * b[base + j];
        }
    }
    let mut sum: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        sum += a[i] * b[i];
    }
    sum
}

/// Cosine similarity, clamped to [-1, 1].
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, VectorError> {
    if a.dim() != b.dim() {
        return Err(VectorError::DimMismatch { expected: a.dim(), actual: b.dim() });
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(VectorError::ZeroVector);
    }
    Ok((dot(a.as_slice(), b.as_slice()) / (na * nb)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn cosine_basic_cases() {
        assert!((cosine(&v(&[1.0, 0.0]), &v(&[1.0, 0.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap().abs() < 1e-12);
        let s = std::f32::consts::FRAC_1_SQRT_2;
        assert!((cosine(&v(&[s, s]), &v(&[1.0, 0.0])).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn cosine_rejects_zero_and_mismatch() {
        assert_eq!(cosine(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])), Err(VectorError::ZeroVector));
        assert!(matches!(
            cosine(&v(&[1.0]), &v(&[1.0, 0.0])),
            Err(VectorError::DimMismatch { .. })
        ));
    }

    #[test]
    fn self_cosine_is_one() {
        let a = v(&[0.3, -1.7, 2.2, 0.001, 5.0]);
        assert!((cosine(&a, &a).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalized_has_unit_norm() {
        let a = v(&[3.0, 4.0]).normalized().unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_eq!(v(&[0.0, 0.0]).normalized(), Err(VectorError::ZeroVector));
    }

    #[test]
    fn dot_f32_matches_f64() {
        let a: Vec<f32> = (0..37).map(|i| (i as f32 * 0.37).sin()).collect();
        let b: Vec<f32> = (0..37).map(|i| (i as f32 * 0.11).cos()).collect();
        assert!((dot_f32(&a, &b) as f64 - dot(&a, &b)).abs() < 1e-4);
    }
}
