use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rank_order, HnswParams, IndexError, Neighbor};
use crate::embedding::{dot_f32, EmbeddingVector};

#[derive(Clone, Copy, Debug)]
struct Scored {
    sim: f32,
    node: u32,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    // Larger similarity is "greater"; among equals the lower node wins.
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim.total_cmp(&other.sim).then_with(|| other.node.cmp(&self.node))
    }
}

#[derive(Debug, Clone)]
pub struct HnswIndex {
    pub(super) params: HnswParams,
    pub(super) dim: usize,
    pub(super) ids: Vec<String>,
    pub(super) lookup: HashMap<String, u32>,
    /// Row-major normalized vectors.
    pub(super) vectors: Vec<f32>,
    /// `links[node][layer]` for layers `0..=level(node)`.
    pub(super) links: Vec<Vec<Vec<u32>>>,
    pub(super) entry: Option<u32>,
    pub(super) max_level: usize,
    rng: ChaCha8Rng,
}

impl HnswIndex {
    pub fn new(dim: usize, params: HnswParams) -> Result<Self, IndexError> {
        if dim == 0 {
            return Err(IndexError::InvalidParams("dimension must be positive".into()));
        }
        if params.m < 2 {
            return Err(IndexError::InvalidParams(format!("m must be >= 2, got {}", params.m)));
        }
        if params.ef_construction == 0 || params.ef_search == 0 {
            return Err(IndexError::InvalidParams("ef values must be positive".into()));
        }
        Ok(Self {
            params,
            dim,
            ids: Vec::new(),
            lookup: HashMap::new(),
            vectors: Vec::new(),
            links: Vec::new(),
            entry: None,
            max_level: 0,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        })
    }

    /// Rebuilds the level generator so that inserts after a snapshot load
    /// draw the same levels they would have drawn without the round trip.
    pub(super) fn resync_rng(&mut self) {
        self.rng = ChaCha8Rng::seed_from_u64(self.params.seed);
        for _ in 0..self.ids.len() {
            let _: f64 = self.rng.gen();
        }
    }

    pub fn params(&self) -> HnswParams {
        self.params
    }

    pub fn set_ef_search(&mut self, ef: usize) {
        self.params.ef_search = ef.max(1);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.lookup.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    /// Stored (normalized) vector for `id`.
    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.lookup.get(id).map(|&n| self.row(n))
    }

    /// Number of graph levels (top level index + 1).
    pub fn levels(&self) -> usize {
        if self.entry.is_some() {
            self.max_level + 1
        } else {
            0
        }
    }

    /// Neighbor ids of `id` at `layer`, for inspection.
    pub fn neighbors(&self, id: &str, layer: usize) -> Option<Vec<&str>> {
        let &n = self.lookup.get(id)?;
        let layers = &self.links[n as usize];
        layers.get(layer).map(|l| l.iter().map(|&x| self.ids[x as usize].as_str()).collect())
    }

    pub fn node_level(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).map(|&n| self.links[n as usize].len() - 1)
    }

    #[inline]
    fn row(&self, node: u32) -> &[f32] {
        let start = node as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    #[inline]
    fn sim(&self, q: &[f32], node: u32) -> f32 {
        dot_f32(q, self.row(node))
    }

    fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.params.m
        } else {
            self.params.m
        }
    }

    fn draw_level(&mut self) -> usize {
        let ml = 1.0 / (self.params.m as f64).ln();
        let u: f64 = self.rng.gen();
        let u = 1.0 - u; // (0, 1]
        (-u.ln() * ml).floor() as usize
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: &EmbeddingVector) -> Result<(), IndexError> {
        let id = id.into();
        if vector.dim() != self.dim {
            return Err(IndexError::DimMismatch { expected: self.dim, actual: vector.dim() });
        }
        if self.lookup.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        let normalized = vector.normalized()?;
        let node = self.ids.len() as u32;
        let level = self.draw_level();
        self.ids.push(id.clone());
        self.lookup.insert(id, node);
        self.vectors.extend_from_slice(normalized.as_slice());
        self.links.push(vec![Vec::new(); level + 1]);

        let Some(entry) = self.entry else {
            self.entry = Some(node);
            self.max_level = level;
            return Ok(());
        };

        let q: Vec<f32> = normalized.into_inner();
        let mut ep = Scored { sim: self.sim(&q, entry), node: entry };
        for layer in ((level + 1)..=self.max_level).rev() {
            ep = self.greedy(&q, ep, layer);
        }
        let mut entry_points = vec![ep];
        for layer in (0..=level.min(self.max_level)).rev() {
            let candidates = self.search_layer(&q, &entry_points, self.params.ef_construction, layer);
            let selected = self.select_neighbors(&candidates, self.params.m);
            self.links[node as usize][layer] = selected.iter().map(|s| s.node).collect();
            for s in &selected {
                self.connect(s.node, node, s.sim, layer);
            }
            entry_points = candidates;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = Some(node);
        }
        Ok(())
    }

    /// Adds `new` to `target`'s adjacency at `layer`, pruning with the
    /// neighbor-selection heuristic when the degree cap is exceeded.
    fn connect(&mut self, target: u32, new: u32, sim: f32, layer: usize) {
        let cap = self.max_degree(layer);
        let current = &self.links[target as usize][layer];
        if current.len() < cap {
            self.links[target as usize][layer].push(new);
            return;
        }
        let base = self.row(target).to_vec();
        let mut candidates: Vec<Scored> = current.iter().map(|&n| Scored { sim: self.sim(&base, n), node: n }).collect();
        candidates.push(Scored { sim, node: new });
        candidates.sort_by(|a, b| b.cmp(a));
        let kept = self.select_neighbors(&candidates, cap);
        self.links[target as usize][layer] = kept.into_iter().map(|s| s.node).collect();
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the
    /// base point than to every neighbor already kept. `candidates` must be
    /// sorted best-first.
    fn select_neighbors(&self, candidates: &[Scored], limit: usize) -> Vec<Scored> {
        let mut kept: Vec<Scored> = Vec::with_capacity(limit);
        for &c in candidates {
            if kept.len() >= limit {
                break;
            }
            let row = self.row(c.node);
            if kept.iter().all(|k| dot_f32(row, self.row(k.node)) < c.sim) {
                kept.push(c);
            }
        }
        kept
    }

    fn greedy(&self, q: &[f32], mut best: Scored, layer: usize) -> Scored {
        loop {
            let mut improved = false;
            for &n in &self.links[best.node as usize][layer] {
                let cand = Scored { sim: self.sim(q, n), node: n };
                if cand > best {
                    best = cand;
                    improved = true;
                }
            }
            if !improved {
                return best;
            }
        }
    }

    /// Beam search within one layer. Returns up to `ef` nodes, best first.
    fn search_layer(&self, q: &[f32], entry_points: &[Scored], ef: usize, layer: usize) -> Vec<Scored> {
        let mut visited = vec![false; self.ids.len()];
        let mut candidates: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        for &ep in entry_points {
            if !visited[ep.node as usize] {
                visited[ep.node as usize] = true;
                candidates.push(ep);
                results.push(Reverse(ep));
            }
        }
        while results.len() > ef {
            results.pop();
        }
        while let Some(c) = candidates.pop() {
            let worst = results.peek().map(|r| r.0);
            if let Some(w) = worst {
                if results.len() >= ef && c < w {
                    break;
                }
            }
            for &n in &self.links[c.node as usize][layer] {
                if visited[n as usize] {
                    continue;
                }
                visited[n as usize] = true;
                let s = Scored { sim: self.sim(q, n), node: n };
                let admit = results.len() < ef || results.peek().is_some_and(|w| s > w.0);
                if admit {
                    candidates.push(s);
                    results.push(Reverse(s));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = results.into_iter().map(|r| r.0).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    fn prepare_query(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<f32>, IndexError> {
        if k == 0 {
            return Err(IndexError::InvalidK);
        }
        if query.dim() != self.dim {
            return Err(IndexError::DimMismatch { expected: self.dim, actual: query.dim() });
        }
        if self.is_empty() {
            return Err(IndexError::Empty);
        }
        Ok(query.normalized()?.into_inner())
    }

    fn finish(&self, scored: impl IntoIterator<Item = Scored>, k: usize) -> Vec<Neighbor> {
        let mut out: Vec<Neighbor> = scored
            .into_iter()
            .map(|s| Neighbor { id: self.ids[s.node as usize].clone(), similarity: (s.sim as f64).clamp(-1.0, 1.0) })
            .collect();
        out.sort_by(rank_order);
        out.truncate(k);
        out
    }

    /// Approximate top-k with the index's `ef_search`.
    pub fn knn(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>, IndexError> {
        self.knn_with_ef(query, k, self.params.ef_search)
    }

    pub fn knn_with_ef(&self, query: &EmbeddingVector, k: usize, ef: usize) -> Result<Vec<Neighbor>, IndexError> {
        let q = self.prepare_query(query, k)?;
        let entry = self.entry.expect("non-empty index has an entry point");
        let mut ep = Scored { sim: self.sim(&q, entry), node: entry };
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy(&q, ep, layer);
        }
        let found = self.search_layer(&q, &[ep], ef.max(k), 0);
        Ok(self.finish(found, k))
    }

    /// Exhaustive scan over the stored vectors.
    pub fn exact_knn(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>, IndexError> {
        let q = self.prepare_query(query, k)?;
        let all = (0..self.ids.len() as u32).map(|n| Scored { sim: self.sim(&q, n), node: n });
        Ok(self.finish(all, k))
    }
}
