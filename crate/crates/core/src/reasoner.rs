//! Query-aware coarse-to-fine retrieval over a memory snapshot, with a
//! parameter-free attention-pooling reasoner producing the short-term and
//! long-term states.

use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{ContextEntry, MemoryTreeSnapshot};
use crate::scalar::Scalar;
use crate::vecmath::{dot, softmax, EmbeddingVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// Prototype slots routed per query.
    pub top_k: usize,
    /// Centroid slots selected from the routed pool.
    pub top_m: usize,
    pub normalize_prototype_scores: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            top_k: 8,
            top_m: 24,
            normalize_prototype_scores: true,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_k == 0 || self.top_m == 0 {
            return Err(Error::Config(
                "retrieval.top_k and retrieval.top_m must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Square projections applied to the query before prototype and centroid scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ProjectionPair<T: Scalar> {
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub prototype_proj: Vec<T>,
    /// Row-major `dim × dim`.
    pub centroid_proj: Vec<T>,
}

impl<T: Scalar> ProjectionPair<T> {
    pub fn identity(dim: usize) -> Self {
        let mut eye = vec![T::zero(); dim * dim];
        for i in 0..dim {
            eye[i * dim + i] = T::one();
        }
        Self {
            dim,
            prototype_proj: eye.clone(),
            centroid_proj: eye,
        }
    }

    pub fn new(dim: usize, prototype_proj: Vec<T>, centroid_proj: Vec<T>) -> Result<Self> {
        for m in [&prototype_proj, &centroid_proj] {
            if m.len() != dim * dim {
                return Err(Error::DimensionMismatch {
                    expected: dim * dim,
                    got: m.len(),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::DegenerateInput("non-finite projection entry".into()));
            }
        }
        Ok(Self {
            dim,
            prototype_proj,
            centroid_proj,
        })
    }

    fn apply(m: &[T], dim: usize, q: &[T]) -> Vec<T> {
        m.chunks_exact(dim).map(|row| dot(row, q)).collect()
    }

    pub fn project_for_prototypes(&self, q: &[T]) -> Vec<T> {
        Self::apply(&self.prototype_proj, self.dim, q)
    }

    pub fn project_for_centroids(&self, q: &[T]) -> Vec<T> {
        Self::apply(&self.centroid_proj, self.dim, q)
    }

    /// Hash of the exact bit patterns of every parameter.
    pub fn checksum(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.dim.hash(&mut h);
        for x in self.prototype_proj.iter().chain(&self.centroid_proj) {
            x.to_f64_lossy().to_bits().hash(&mut h);
        }
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PrototypeSelection<T: Scalar> {
    /// Selected prototype ids, best first.
    pub ids: Vec<usize>,
    pub scores: Vec<T>,
    /// Softmax of `scores` when normalization is on, the raw scores otherwise.
    pub weights: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReasoningState<T: Scalar> {
    pub z_s: EmbeddingVector<T>,
    pub z_l: EmbeddingVector<T>,
    pub retrieved_prototype_ids: Vec<usize>,
    /// Retrieved centroid ids, highest score first.
    pub retrieved_centroid_ids: Vec<usize>,
    pub routing_weights: Vec<T>,
    /// `false` when memory held nothing to retrieve and `z_l` fell back to `z_s`.
    pub long_term_evidence: bool,
}

/// Indices of the `n` largest scores, best first; lower index wins ties.
fn top_n_by_score<T: Scalar>(scored: &mut [(usize, T)], n: usize) -> Vec<(usize, T)> {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    scored.iter().take(n).copied().collect()
}

pub fn select_prototypes<T: Scalar>(
    q: &EmbeddingVector<T>,
    snapshot: &MemoryTreeSnapshot<T>,
    proj: &ProjectionPair<T>,
    cfg: &RetrievalConfig,
) -> PrototypeSelection<T> {
    let pq = proj.project_for_prototypes(q.as_slice());
    let mut scored: Vec<(usize, T)> = snapshot
        .prototypes
        .iter()
        .enumerate()
        .map(|(u, p)| (u, dot(&pq, p.vector.as_slice())))
        .collect();
    let top = top_n_by_score(&mut scored, cfg.top_k);
    let ids: Vec<usize> = top.iter().map(|t| t.0).collect();
    let scores: Vec<T> = top.iter().map(|t| t.1).collect();
    let weights = if cfg.normalize_prototype_scores {
        softmax(&scores)
    } else {
        scores.clone()
    };
    PrototypeSelection {
        ids,
        scores,
        weights,
    }
}

/// Union of the member sets of the given prototypes, ascending.
pub fn candidate_pool<T: Scalar>(
    snapshot: &MemoryTreeSnapshot<T>,
    prototype_ids: &[usize],
) -> Vec<usize> {
    let pool: BTreeSet<usize> = prototype_ids
        .iter()
        .filter_map(|&u| snapshot.prototypes.get(u))
        .flat_map(|p| p.member_ids.iter().copied())
        .collect();
    pool.into_iter().collect()
}

/// Top-`m` centroids under `(W_c q)·c` within the routed pool. Raw scores,
/// no normalization.
pub fn select_centroids<T: Scalar>(
    q: &EmbeddingVector<T>,
    snapshot: &MemoryTreeSnapshot<T>,
    prototype_ids: &[usize],
    proj: &ProjectionPair<T>,
    cfg: &RetrievalConfig,
) -> Vec<usize> {
    let pool = candidate_pool(snapshot, prototype_ids);
    select_centroids_from_pool(q, snapshot, &pool, proj, cfg)
}

pub fn select_centroids_from_pool<T: Scalar>(
    q: &EmbeddingVector<T>,
    snapshot: &MemoryTreeSnapshot<T>,
    pool: &[usize],
    proj: &ProjectionPair<T>,
    cfg: &RetrievalConfig,
) -> Vec<usize> {
    let cq = proj.project_for_centroids(q.as_slice());
    let mut scored: Vec<(usize, T)> = pool
        .iter()
        .map(|&j| (j, dot(&cq, snapshot.centroids[j].vector.as_slice())))
        .collect();
    top_n_by_score(&mut scored, cfg.top_m)
        .into_iter()
        .map(|t| t.0)
        .collect()
}

/// Attention weights `softmax_i(query·item_i / √d)`.
pub fn attention_weights<T: Scalar, I: AsRef<[T]>>(query: &[T], items: &[I]) -> Result<Vec<T>> {
    if items.is_empty() {
        return Err(Error::DegenerateInput(
            "attention over an empty item set".into(),
        ));
    }
    let scale = T::from_usize_lossy(query.len()).sqrt();
    let mut scores = Vec::with_capacity(items.len());
    for it in items {
        let it = it.as_ref();
        if it.len() != query.len() {
            return Err(Error::DimensionMismatch {
                expected: query.len(),
                got: it.len(),
            });
        }
        scores.push(dot(query, it) / scale);
    }
    Ok(softmax(&scores))
}

/// Single-head, parameter-free attention pooling.
pub fn attention_pool<T: Scalar, I: AsRef<[T]>>(
    query: &[T],
    items: &[I],
) -> Result<EmbeddingVector<T>> {
    let w = attention_weights(query, items)?;
    let mut out = vec![T::zero(); query.len()];
    for (wi, it) in w.iter().zip(items) {
        for (o, &x) in out.iter_mut().zip(it.as_ref()) {
            *o = *o + *wi * x;
        }
    }
    Ok(EmbeddingVector::from_raw(out))
}

/// Short-term state: the query attending over the frame buffer and itself.
pub fn reason_short<T: Scalar>(
    q: &EmbeddingVector<T>,
    snapshot: &MemoryTreeSnapshot<T>,
) -> Result<EmbeddingVector<T>> {
    if q.dim() != snapshot.dim {
        return Err(Error::DimensionMismatch {
            expected: snapshot.dim,
            got: q.dim(),
        });
    }
    if snapshot.frames.is_empty() {
        return Ok(EmbeddingVector::from_raw(q.values.clone()));
    }
    let mut items: Vec<&[T]> = snapshot.frames.iter().map(|f| f.as_slice()).collect();
    items.push(q.as_slice());
    attention_pool(q.as_slice(), &items)
}

/// Long-term state from routed prototypes, selected centroids and the query.
pub fn reason_long<T: Scalar>(
    q: &EmbeddingVector<T>,
    z_s: &EmbeddingVector<T>,
    snapshot: &MemoryTreeSnapshot<T>,
    proj: &ProjectionPair<T>,
    cfg: &RetrievalConfig,
) -> Result<ReasoningState<T>> {
    if q.dim() != snapshot.dim || z_s.dim() != snapshot.dim {
        return Err(Error::DimensionMismatch {
            expected: snapshot.dim,
            got: q.dim().max(z_s.dim()),
        });
    }
    if proj.dim != snapshot.dim {
        return Err(Error::DimensionMismatch {
            expected: snapshot.dim,
            got: proj.dim,
        });
    }
    if snapshot.centroids.is_empty() && snapshot.prototypes.is_empty() {
        return Ok(ReasoningState {
            z_s: z_s.clone(),
            z_l: z_s.clone(),
            retrieved_prototype_ids: Vec::new(),
            retrieved_centroid_ids: Vec::new(),
            routing_weights: Vec::new(),
            long_term_evidence: false,
        });
    }

    let (routing, pool) = if snapshot.prototypes.is_empty() {
        // no abstraction yet: every centroid is a candidate
        (
            PrototypeSelection {
                ids: vec![],
                scores: vec![],
                weights: vec![],
            },
            (0..snapshot.centroids.len()).collect(),
        )
    } else {
        let sel = select_prototypes(q, snapshot, proj, cfg);
        let pool = candidate_pool(snapshot, &sel.ids);
        (sel, pool)
    };
    let centroid_ids = select_centroids_from_pool(q, snapshot, &pool, proj, cfg);

    let mut items: Vec<&[T]> = Vec::with_capacity(routing.ids.len() + centroid_ids.len() + 1);
    items.extend(
        routing
            .ids
            .iter()
            .map(|&u| snapshot.prototypes[u].vector.as_slice()),
    );
    items.extend(
        centroid_ids
            .iter()
            .map(|&j| snapshot.centroids[j].vector.as_slice()),
    );
    items.push(q.as_slice());
    let half = T::lit(0.5);
    let query: Vec<T> = q
        .values
        .iter()
        .zip(&z_s.values)
        .map(|(&a, &b)| half * (a + b))
        .collect();
    let z_l = attention_pool(&query, &items)?;

    Ok(ReasoningState {
        z_s: z_s.clone(),
        z_l,
        retrieved_prototype_ids: routing.ids,
        retrieved_centroid_ids: centroid_ids,
        routing_weights: routing.weights,
        long_term_evidence: true,
    })
}

/// Runs the short-term then the long-term branch.
pub fn reason<T: Scalar>(
    q: &EmbeddingVector<T>,
    snapshot: &MemoryTreeSnapshot<T>,
    proj: &ProjectionPair<T>,
    cfg: &RetrievalConfig,
) -> Result<ReasoningState<T>> {
    let z_s = reason_short(q, snapshot)?;
    reason_long(q, &z_s, snapshot, proj, cfg)
}

/// Cross-attends `z_l` over the answer representations of past interactions.
pub fn fuse_context<T: Scalar>(
    z_l: &EmbeddingVector<T>,
    entries: &[ContextEntry<T>],
) -> Result<EmbeddingVector<T>> {
    if entries.is_empty() {
        return Ok(z_l.clone());
    }
    let mut items: Vec<&[T]> = vec![z_l.as_slice()];
    items.extend(entries.iter().map(|e| e.answer_representation.as_slice()));
    attention_pool(z_l.as_slice(), &items)
}
