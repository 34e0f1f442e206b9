//! Seeded k-means with k-means++ initialization.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { k: 15, max_iter: 50, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub k_effective: usize,
    /// Cluster index per input vector, aligned with the input.
    pub assignments: Vec<usize>,
    pub centroids: Vec<EmbeddingVector>,
    /// Final within-cluster sum of squared distances.
    pub inertia: f64,
    /// Inertia after every assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

impl KMeansResult {
    /// Indices of the inputs assigned to `cluster`, ascending.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignments.iter().enumerate().filter(|(_, &c)| c == cluster).map(|(i, _)| i).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Fast squared distance used to propose a nearest centroid.
fn sq_dist_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..8 {
            let d = x[l] - y[l];
            acc[l] += d * d;
        }
    }
    let tail: f32 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| (x - y) * (x - y)).sum();
    acc.iter().sum::<f32>() + tail
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    let set: HashSet<Vec<u64>> = points.iter().map(|p| p.iter().map(|x| x.to_bits()).collect()).collect();
    set.len()
}

fn nearest_f32(p: &[f32], centroids: &[Vec<f32>]) -> usize {
    let mut best = (0, f32::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist_f32(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(0);
        for (i, &d) in d2.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick].clone();
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters `vectors` into `min(k, distinct vectors)` groups. Identical
/// inputs and parameters always give identical output.
pub fn kmeans(vectors: &[EmbeddingVector], params: KMeansParams) -> KMeansResult {
    let points: Vec<Vec<f64>> = vectors.iter().map(|v| v.as_slice().iter().map(|&x| x as f64).collect()).collect();
    if points.is_empty() || params.k == 0 {
        return KMeansResult {
            k_effective: 0,
            assignments: vec![0; points.len()],
            centroids: Vec::new(),
            inertia: 0.0,
            inertia_history: Vec::new(),
            iterations: 0,
        };
    }
    let dim = points[0].len();
    let k = params.k.min(distinct_count(&points));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = plus_plus_init(&points, k, &mut rng);
    let k = centroids.len();

    let points32: Vec<Vec<f32>> = points.iter().map(|p| to_f32(p)).collect();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut dists = vec![0.0; points.len()];
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..params.max_iter.max(1) {
        iterations += 1;
        let centroids32: Vec<Vec<f32>> = centroids.iter().map(|c| to_f32(c)).collect();
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let proposal = nearest_f32(&points32[i], &centroids32);
            let d_new = sq_dist(p, &centroids[proposal]);
            // Moves are confirmed in f64 so the inertia never rises.
            if assignments[i] == usize::MAX {
                assignments[i] = proposal;
                dists[i] = d_new;
                changed = true;
                continue;
            }
            let d_cur = sq_dist(p, &centroids[assignments[i]]);
            if proposal != assignments[i] && d_new < d_cur {
                assignments[i] = proposal;
                dists[i] = d_new;
                changed = true;
            } else {
                dists[i] = d_cur;
            }
        }
        history.push(dists.iter().sum());
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        // Empty clusters take over the point farthest from its centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| counts[assignments[i]] > 1)
                .map(|i| (i, sq_dist(&points[i], &centroids[assignments[i]])))
                .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                    Some((_, bd)) if bd >= d => best,
                    _ => Some((i, d)),
                });
            if let Some((i, _)) = far {
                counts[assignments[i]] -= 1;
                assignments[i] = c;
                counts[c] = 1;
                centroids[c] = points[i].clone();
            }
        }
    }
    let inertia = *history.last().unwrap_or(&0.0);
    let centroids = centroids
        .into_iter()
        .map(|c| EmbeddingVector::new(c.into_iter().map(|x| x as f32).collect()).expect("nonempty centroid"))
        .collect();
    KMeansResult { k_effective: k, assignments, centroids, inertia, inertia_history: history, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    #[test]
    fn separates_two_blobs() {
        let pts = vec![v(&[0.0, 0.0]), v(&[0.1, 0.0]), v(&[10.0, 10.0]), v(&[10.1, 10.0])];
        let r = kmeans(&pts, KMeansParams { k: 2, ..Default::default() });
        assert_eq!(r.k_effective, 2);
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_eq!(r.assignments[2], r.assignments[3]);
        assert_ne!(r.assignments[0], r.assignments[2]);
        assert!((r.inertia - 0.01).abs() < 1e-6);
    }

    #[test]
    fn k_is_capped_by_distinct_points() {
        let pts = vec![v(&[1.0, 0.0]); 6];
        let r = kmeans(&pts, KMeansParams::default());
        assert_eq!(r.k_effective, 1);
        assert!(r.assignments.iter().all(|&c| c == 0));
        let pts = vec![v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[1.0, 0.0])];
        assert_eq!(kmeans(&pts, KMeansParams::default()).k_effective, 2);
    }

    #[test]
    fn empty_input() {
        let r = kmeans(&[], KMeansParams::default());
        assert_eq!(r.k_effective, 0);
        assert!(r.centroids.is_empty());
    }

    #[test]
    fn deterministic_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<EmbeddingVector> = (0..200).map(|_| v(&(0..8).map(|_| rng.gen::<f32>()).collect::<Vec<_>>())).collect();
        let a = kmeans(&pts, KMeansParams::default());
        let b = kmeans(&pts, KMeansParams::default());
        assert_eq!(a, b);
        assert_eq!(a.k_effective, 15);
        for w in a.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{:?}", a.inertia_history);
        }
        assert!(a.iterations <= 50);
    }
}
