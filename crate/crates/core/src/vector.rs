//! Dense vector kernels shared by segmentation and retrieval.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero vector has no direction")]
    ZeroVector,
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<(), VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> Result<f64, VectorError> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `1 - dot(a/|a|, b/|b|)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64, VectorError> {
    check_dims(a, b)?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(VectorError::ZeroVector);
    }
    Ok(cosine_distance_prenormed(a, na, b, nb))
}

/// Cosine distance with the norms already known. Both norms must be non-zero.
#[inline]
pub(crate) fn cosine_distance_prenormed(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    // Normalize before the dot product so identical directions give exactly 0.
    let cos: f64 = a.iter().zip(b).map(|(x, y)| (x / na) * (y / nb)).sum();
    (1.0 - cos).clamp(0.0, 2.0)
}
