use serde::{Deserialize, Serialize};

use super::ReadinessTrainConfig;
use crate::memory::{MemoryTreeSnapshot, TimeSpan};
use crate::scalar::Scalar;
use crate::vecmath::{cosine_or_none, EmbeddingVector};

/// Pseudo-positive and pseudo-negative time regions for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PseudoLabelSet<T: Scalar> {
    /// Sorted, merged closed intervals.
    pub positive: Vec<TimeSpan<T>>,
    /// Sorted, merged intervals with every positive region removed.
    pub negative: Vec<TimeSpan<T>>,
    /// Cosine similarity of each centroid to `z_l`, indexed by centroid id.
    pub source_similarities: Vec<T>,
}

impl<T: Scalar> PseudoLabelSet<T> {
    pub fn empty() -> Self {
        Self {
            positive: Vec::new(),
            negative: Vec::new(),
            source_similarities: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty() || self.negative.is_empty()
    }

    pub fn is_positive(&self, t: T) -> bool {
        self.positive
            .iter()
            .any(|s| s.earliest <= t && t <= s.latest)
    }

    /// Negative membership; positive wins on shared boundaries.
    pub fn is_negative(&self, t: T) -> bool {
        !self.is_positive(t)
            && self
                .negative
                .iter()
                .any(|s| s.earliest <= t && t <= s.latest)
    }

    pub fn positive_end(&self) -> Option<T> {
        self.positive.last().map(|s| s.latest)
    }
}

/// Sorts and merges overlapping or touching closed intervals.
pub fn merge_intervals<T: Scalar>(mut spans: Vec<TimeSpan<T>>) -> Vec<TimeSpan<T>> {
    spans.sort_by(|a, b| {
        a.earliest
            .partial_cmp(&b.earliest)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<TimeSpan<T>> = Vec::with_capacity(spans.len());
    for s in spans {
        match out.last_mut() {
            Some(last) if s.earliest <= last.latest => last.latest = last.latest.max(s.latest),
            _ => out.push(s),
        }
    }
    out
}

/// Removes every `cut` interval from `base`; both sorted and merged.
fn subtract<T: Scalar>(base: &[TimeSpan<T>], cut: &[TimeSpan<T>]) -> Vec<TimeSpan<T>> {
    let mut out = Vec::new();
    for b in base {
        let mut pieces = vec![*b];
        for c in cut {
            let mut next = Vec::new();
            for p in pieces {
                if c.latest < p.earliest || c.earliest > p.latest {
                    next.push(p);
                    continue;
                }
                if p.earliest < c.earliest {
                    next.push(TimeSpan {
                        earliest: p.earliest,
                        latest: c.earliest,
                    });
                }
                if c.latest < p.latest {
                    next.push(TimeSpan {
                        earliest: c.latest,
                        latest: p.latest,
                    });
                }
            }
            pieces = next;
        }
        out.extend(pieces);
    }
    out
}

/// Total length of merged intervals.
pub fn interval_measure<T: Scalar>(spans: &[TimeSpan<T>]) -> T {
    merge_intervals(spans.to_vec())
        .iter()
        .map(|s| s.latest - s.earliest)
        .sum()
}

/// Intersection-over-union of two interval sets, by length.
///
/// Zero-length sets compare by point containment so a point label on a point
/// window still scores 1.
pub fn temporal_iou<T: Scalar>(a: &[TimeSpan<T>], b: &[TimeSpan<T>]) -> T {
    let a = merge_intervals(a.to_vec());
    let b = merge_intervals(b.to_vec());
    let mut inter = T::zero();
    for x in &a {
        for y in &b {
            let lo = x.earliest.max(y.earliest);
            let hi = x.latest.min(y.latest);
            if hi > lo {
                inter = inter + (hi - lo);
            }
        }
    }
    let union = interval_measure(&a) + interval_measure(&b) - inter;
    if union > T::zero() {
        return inter / union;
    }
    let hit = a.iter().any(|x| {
        b.iter()
            .any(|y| x.earliest <= y.latest && y.earliest <= x.latest)
    });
    if hit && !a.is_empty() {
        T::one()
    } else {
        T::zero()
    }
}

fn quantile_count<T: Scalar>(q: T, n: usize) -> usize {
    let k = (q * T::from_usize_lossy(n)).floor().to_usize().unwrap_or(0);
    k.max(1)
}

/// Labels time regions by how similar each centroid is to `z_l`.
///
/// The top `pos_quantile` of centroids give the positive region, the bottom
/// `neg_quantile` the negative one (counts `max(1, ⌊q·n⌋)`). Equal similarities
/// rank the lower centroid id first. Fewer than two centroids yields an empty
/// set.
pub fn build_pseudo_labels<T: Scalar>(
    z_l: &EmbeddingVector<T>,
    snapshot: &MemoryTreeSnapshot<T>,
    cfg: &ReadinessTrainConfig<T>,
) -> PseudoLabelSet<T> {
    let n = snapshot.centroids.len();
    if n < 2 {
        return PseudoLabelSet::empty();
    }
    let sims: Vec<T> = snapshot
        .centroids
        .iter()
        .map(|c| cosine_or_none(z_l.as_slice(), c.vector.as_slice()).unwrap_or(T::zero()))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        sims[b]
            .partial_cmp(&sims[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let n_pos = quantile_count(cfg.pos_quantile, n).min(n - 1);
    let n_neg = quantile_count(cfg.neg_quantile, n).min(n - n_pos);
    let positive = merge_intervals(
        order[..n_pos]
            .iter()
            .map(|&j| snapshot.centroids[j].time_span)
            .collect(),
    );
    let negative = merge_intervals(
        order[n - n_neg..]
            .iter()
            .map(|&j| snapshot.centroids[j].time_span)
            .collect(),
    );
    let negative = subtract(&negative, &positive);
    PseudoLabelSet {
        positive,
        negative,
        source_similarities: sims,
    }
}
