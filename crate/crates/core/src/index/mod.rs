//! Cosine-similarity vector search.
//!
//! [`HnswIndex`] is a hierarchical navigable small-world graph (single
//! writer; immutable once shared). [`brute_force_knn`] is the exact oracle.
//! Vectors are L2-normalized on insert and queries on search, so similarity
//! is a plain dot product.

mod hnsw;
mod snapshot;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{cosine, EmbeddingVector, VectorError};

pub use hnsw::HnswIndex;
pub use snapshot::{read_bundle, write_bundle, IndexBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self { m: 16, ef_construction: 64, ef_search: 100, seed: 42 }
    }
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("id {0:?} already present")]
    DuplicateId(String),
    #[error("dimension mismatch: index is {expected}, vector is {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("index is empty")]
    Empty,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed snapshot: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub similarity: f64,
}

/// Descending similarity, ties by ascending id.
pub(crate) fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.similarity.partial_cmp(&a.similarity).unwrap_or(Ordering::Equal).then_with(|| a.id.cmp(&b.id))
}

/// Exact top-k by cosine similarity over `entries`.
pub fn brute_force_knn<'a, I>(entries: I, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>, IndexError>
where
    I: IntoIterator<Item = (&'a str, &'a EmbeddingVector)>,
{
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    let mut all = Vec::new();
    for (id, v) in entries {
        if v.dim() != query.dim() {
            return Err(IndexError::DimMismatch { expected: v.dim(), actual: query.dim() });
        }
        all.push(Neighbor { id: id.to_string(), similarity: cosine(v, query)? });
    }
    if all.is_empty() {
        return Err(IndexError::Empty);
    }
    all.sort_by(rank_order);
    all.truncate(k);
    Ok(all)
}

/// Fraction of `truth` ids present in `found`.
pub fn recall(found: &[Neighbor], truth: &[Neighbor]) -> f64 {
    if truth.is_empty() {
        return 1.0;
    }
    let hits = truth.iter().filter(|t| found.iter().any(|f| f.id == t.id)).count();
    hits as f64 / truth.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn brute_force_orders_and_clamps() {
        let a = v(&[1.0, 0.0]);
        let b = v(&[0.0, 1.0]);
        let c = v(&[1.0, 1.0]);
        let entries = vec![("a", &a), ("b", &b), ("c", &c)];
        let got = brute_force_knn(entries.clone(), &v(&[1.0, 0.1]), 10).unwrap();
        let ids: Vec<&str> = got.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "c", "b"]);
        let got = brute_force_knn(entries, &v(&[1.0, 0.1]), 1).unwrap();
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn brute_force_ties_by_id() {
        let a = v(&[1.0, 0.0]);
        let entries = vec![("z", &a), ("m", &a), ("b", &a)];
        let got = brute_force_knn(entries, &a, 3).unwrap();
        let ids: Vec<&str> = got.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, vec!["b", "m", "z"]);
    }

    #[test]
    fn brute_force_errors() {
        let a = v(&[1.0, 0.0]);
        assert!(matches!(brute_force_knn(vec![("a", &a)], &a, 0), Err(IndexError::InvalidK)));
        assert!(matches!(brute_force_knn(Vec::new(), &a, 1), Err(IndexError::Empty)));
        assert!(matches!(
            brute_force_knn(vec![("a", &a)], &v(&[1.0, 0.0, 0.0]), 1),
            Err(IndexError::DimMismatch { .. })
        ));
    }
}
