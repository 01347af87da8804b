//! Three-level visual memory: a FIFO of recent frames, EMA centroids fed by
//! evicted frames, and coarse prototypes abstracted from the centroids.
//!
//! A [`MemoryTree`] has exactly one writer. Readers take a
//! [`MemoryTreeSnapshot`], a deep copy that later ingests never touch.

mod context;
mod threshold;

use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use context::{ContextBank, ContextEntry};
pub use threshold::{threshold_rule, update_threshold, AdaptiveThresholdState};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{
    cosine_or_none, cosine_with_norms, ema_blend, ema_scalar, kmeans, norm, squared_distance,
    EmbeddingVector,
};

/// Version tag of the JSON tree dump.
pub const TREE_DUMP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct MemoryConfig<T: Scalar> {
    pub frame_capacity: usize,
    pub centroid_capacity: usize,
    pub prototype_capacity: usize,
    /// EMA factor applied to the incoming value in both centroid and prototype updates.
    pub alpha: T,
    pub tau0: T,
    pub tau_min: T,
    pub tau_max: T,
    pub novelty_window: usize,
    pub drift_rate: T,
    pub hetero_threshold: T,
    pub mini_kmeans_iters: usize,
    pub abstraction_kmeans_iters: usize,
    pub threshold_sim_gain: T,
    pub threshold_novelty_gain: T,
    pub similarity_target: T,
    pub sim_ema_decay: T,
    pub seed: u64,
}

impl<T: Scalar> Default for MemoryConfig<T> {
    fn default() -> Self {
        Self {
            frame_capacity: 24,
            centroid_capacity: 96,
            prototype_capacity: 12,
            alpha: T::lit(0.985),
            tau0: T::lit(0.60),
            tau_min: T::lit(0.40),
            tau_max: T::lit(0.85),
            novelty_window: 32,
            drift_rate: T::lit(0.5),
            hetero_threshold: T::lit(0.35),
            mini_kmeans_iters: 5,
            abstraction_kmeans_iters: 20,
            threshold_sim_gain: T::lit(0.5),
            threshold_novelty_gain: T::lit(0.5),
            similarity_target: T::lit(0.7),
            sim_ema_decay: T::lit(0.9),
            seed: 0,
        }
    }
}

impl<T: Scalar> MemoryConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.frame_capacity == 0 {
            return Err(Error::Config(
                "memory.frame_capacity must be positive".into(),
            ));
        }
        if self.prototype_capacity == 0 || self.prototype_capacity > self.centroid_capacity {
            return Err(Error::Config(
                "memory.prototype_capacity must satisfy 0 < U <= J".into(),
            ));
        }
        if !(self.tau_min <= self.tau0 && self.tau0 <= self.tau_max) {
            return Err(Error::Config(
                "memory thresholds must satisfy tau_min <= tau0 <= tau_max".into(),
            ));
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::Config("memory.alpha must lie in [0, 1]".into()));
        }
        if !(self.sim_ema_decay >= T::zero() && self.sim_ema_decay <= T::one()) {
            return Err(Error::Config(
                "memory.sim_ema_decay must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TimeSpan<T: Scalar> {
    pub earliest: T,
    pub latest: T,
}

impl<T: Scalar> TimeSpan<T> {
    pub fn point(t: T) -> Self {
        Self {
            earliest: t,
            latest: t,
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            earliest: self.earliest.min(other.earliest),
            latest: self.latest.max(other.latest),
        }
    }
}

/// Mid-level cluster of evicted frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Centroid<T: Scalar> {
    pub vector: EmbeddingVector<T>,
    /// Number of evicted frames merged into this centroid.
    pub weight: u64,
    pub time_mean: T,
    pub time_span: TimeSpan<T>,
    pub prototype_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Prototype<T: Scalar> {
    pub vector: EmbeddingVector<T>,
    /// Sorted indices into the centroid level.
    pub member_ids: Vec<usize>,
    pub weight: u64,
}

/// Immutable view of all three levels plus the threshold state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MemoryTreeSnapshot<T: Scalar> {
    pub dim: usize,
    pub frames: VecDeque<EmbeddingVector<T>>,
    pub centroids: Vec<Centroid<T>>,
    pub prototypes: Vec<Prototype<T>>,
    pub threshold_state: AdaptiveThresholdState<T>,
    pub stream_clock: T,
    /// Frames evicted from the FIFO so far.
    pub evicted: u64,
}

impl<T: Scalar> MemoryTreeSnapshot<T> {
    pub fn item_count(&self) -> usize {
        self.frames.len() + self.centroids.len() + self.prototypes.len()
    }

    pub fn total_centroid_weight(&self) -> u64 {
        self.centroids.iter().map(|c| c.weight).sum()
    }

    /// Mean cosine similarity between assigned centroids and their prototype.
    pub fn intra_prototype_similarity(&self) -> Option<T> {
        let mut total = T::zero();
        let mut n = 0usize;
        for c in &self.centroids {
            if let Some(pid) = c.prototype_id {
                if let Some(s) =
                    cosine_or_none(c.vector.as_slice(), self.prototypes[pid].vector.as_slice())
                {
                    total = total + s;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| total / T::from_usize_lossy(n))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "")]
struct TreeDump<T: Scalar> {
    version: u32,
    config: MemoryConfig<T>,
    state: MemoryTreeSnapshot<T>,
}

/// What happened to an evicted frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeOutcome {
    Merged { centroid: usize },
    Created { centroid: usize },
}

/// Summary of one ingest step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IngestEvent {
    pub evicted: Option<MergeOutcome>,
    pub abstraction: bool,
    pub realignment: bool,
}

/// Single-writer memory tree.
#[derive(Debug, Clone)]
pub struct MemoryTree<T: Scalar> {
    cfg: MemoryConfig<T>,
    state: MemoryTreeSnapshot<T>,
    last_time: Option<T>,
    abstractions: u64,
    // pairwise centroid cosines, kept in step with the centroid vectors
    pair_sim: Vec<Vec<T>>,
    norms: Vec<T>,
}

impl<T: Scalar> MemoryTree<T> {
    pub fn new(cfg: MemoryConfig<T>, dim: usize) -> Result<Self> {
        cfg.validate()?;
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let state = MemoryTreeSnapshot {
            dim,
            frames: VecDeque::with_capacity(cfg.frame_capacity + 1),
            centroids: Vec::with_capacity(cfg.centroid_capacity),
            prototypes: Vec::with_capacity(cfg.prototype_capacity),
            threshold_state: AdaptiveThresholdState::initial(&cfg),
            stream_clock: T::zero(),
            evicted: 0,
        };
        Ok(Self {
            cfg,
            state,
            last_time: None,
            abstractions: 0,
            pair_sim: Vec::new(),
            norms: Vec::new(),
        })
    }

    /// Builds a tree directly from centroid and prototype levels.
    ///
    /// Prototype member sets are rebuilt from each centroid's `prototype_id`.
    pub fn from_parts(
        cfg: MemoryConfig<T>,
        dim: usize,
        centroids: Vec<Centroid<T>>,
        prototypes: Vec<EmbeddingVector<T>>,
    ) -> Result<Self> {
        let mut tree = Self::new(cfg, dim)?;
        if centroids.len() > tree.cfg.centroid_capacity
            || prototypes.len() > tree.cfg.prototype_capacity
        {
            return Err(invalid("parts exceed configured capacities"));
        }
        for v in centroids.iter().map(|c| &c.vector).chain(&prototypes) {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
        }
        if centroids
            .iter()
            .any(|c| c.prototype_id.is_some_and(|p| p >= prototypes.len()))
        {
            return Err(invalid("centroid references a missing prototype"));
        }
        tree.state.evicted = centroids.iter().map(|c| c.weight).sum();
        tree.state.centroids = centroids;
        let n = tree.state.centroids.len();
        tree.pair_sim = vec![Vec::new(); n];
        tree.norms = vec![T::zero(); n];
        for j in 0..n {
            tree.refresh_pair_sim(j);
        }
        tree.state.prototypes = prototypes
            .into_iter()
            .map(|vector| Prototype {
                vector,
                member_ids: Vec::new(),
                weight: 0,
            })
            .collect();
        tree.rebuild_members();
        Ok(tree)
    }

    pub fn config(&self) -> &MemoryConfig<T> {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.state.dim
    }

    /// Borrowed view of the live levels, for the writer's own thread.
    pub fn levels(&self) -> &MemoryTreeSnapshot<T> {
        &self.state
    }

    pub fn snapshot(&self) -> Arc<MemoryTreeSnapshot<T>> {
        Arc::new(self.state.clone())
    }

    /// Versioned JSON dump of configuration and state.
    pub fn to_json(&self) -> Result<String> {
        let dump = TreeDump {
            version: TREE_DUMP_VERSION,
            config: self.cfg.clone(),
            state: self.state.clone(),
        };
        Ok(serde_json::to_string_pretty(&dump)?)
    }

    pub fn ingest_frame(&mut self, frame: EmbeddingVector<T>, t: T) -> Result<IngestEvent> {
        if frame.dim() != self.state.dim {
            return Err(Error::DimensionMismatch {
                expected: self.state.dim,
                got: frame.dim(),
            });
        }
        if !t.is_finite() || t < T::zero() {
            return Err(invalid("frame timestamp must be finite and non-negative"));
        }
        if let Some(prev) = self.last_time {
            if t <= prev {
                return Err(invalid(format!("non-monotone timestamp {t} after {prev}")));
            }
        }
        self.last_time = Some(t);
        self.state.stream_clock = t;
        self.state.frames.push_back(frame.with_timestamp(t));

        let mut event = IngestEvent::default();
        if self.state.frames.len() > self.cfg.frame_capacity {
            let old = self
                .state
                .frames
                .pop_front()
                .expect("buffer is over capacity");
            let t_old = old.timestamp.unwrap_or(t);
            self.state.evicted += 1;
            let report = self.merge_evicted(old, t_old);
            event.evicted = Some(report.outcome);
            event.abstraction = report.abstraction;
            event.realignment = report.realignment;
        }
        Ok(event)
    }

    /// Routes one evicted frame into the centroid level.
    pub fn merge_evicted(&mut self, frame: EmbeddingVector<T>, t: T) -> MergeReport {
        let best = self.best_centroid(&frame);
        let tau = self.state.threshold_state.tau_t;
        let alpha = self.cfg.alpha;
        let mut report = MergeReport {
            outcome: MergeOutcome::Created { centroid: 0 },
            abstraction: false,
            realignment: false,
        };

        match best {
            Some((j, s)) if s >= tau => {
                let c = &mut self.state.centroids[j];
                c.vector.values = ema_blend(&c.vector.values, &frame.values, alpha)
                    .expect("validated dims and alpha");
                c.weight += 1;
                c.time_mean = ema_scalar(c.time_mean, t, alpha);
                c.time_span = c.time_span.union(&TimeSpan::point(t));
                // the EMA can overshoot the span only through rounding
                c.time_mean = c
                    .time_mean
                    .max(c.time_span.earliest)
                    .min(c.time_span.latest);
                if let Some(pid) = c.prototype_id {
                    self.state.prototypes[pid].weight += 1;
                }
                self.refresh_pair_sim(j);
                report.outcome = MergeOutcome::Merged { centroid: j };
            }
            _ => {
                let mut forced = false;
                let mut freed_prototype = None;
                if self.state.centroids.len() >= self.cfg.centroid_capacity {
                    self.abstract_to_prototypes();
                    report.realignment |= self.realign_prototypes();
                    forced = true;
                    freed_prototype = self.merge_closest_pair();
                }
                let j = self.create_centroid(frame, t, freed_prototype);
                report.outcome = MergeOutcome::Created { centroid: j };
                report.abstraction = forced;
                if !forced && self.state.centroids.len() == self.cfg.centroid_capacity {
                    self.run_abstraction(&mut report);
                }
            }
        }

        let created = matches!(report.outcome, MergeOutcome::Created { .. });
        update_threshold(
            &mut self.state.threshold_state,
            best.map(|b| b.1),
            created,
            &self.cfg,
        );
        if report.abstraction {
            self.state.threshold_state.clear_novelty();
        } else if self
            .state
            .threshold_state
            .novelty_rate(self.cfg.novelty_window)
            > self.cfg.drift_rate
        {
            self.run_abstraction(&mut report);
            self.state.threshold_state.clear_novelty();
        }
        report
    }

    fn run_abstraction(&mut self, report: &mut MergeReport) {
        self.abstract_to_prototypes();
        report.abstraction = true;
        report.realignment |= self.realign_prototypes();
    }

    fn best_centroid(&self, frame: &EmbeddingVector<T>) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        let nf = frame.norm();
        for (j, c) in self.state.centroids.iter().enumerate() {
            if let Some(s) =
                cosine_with_norms(frame.as_slice(), nf, c.vector.as_slice(), self.norms[j])
            {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
        }
        best
    }

    fn create_centroid(
        &mut self,
        frame: EmbeddingVector<T>,
        t: T,
        freed_prototype: Option<usize>,
    ) -> usize {
        let vector = EmbeddingVector::from_raw(frame.values);
        let j = self.state.centroids.len();
        let prototype_id = if let Some(pid) = freed_prototype {
            // recycle the emptied slot for the new, unexplained content
            self.state.prototypes[pid].vector = vector.clone();
            Some(pid)
        } else if self.state.prototypes.is_empty() {
            None
        } else {
            Some(nearest_prototype(&vector.values, &self.state.prototypes))
        };
        self.state.centroids.push(Centroid {
            vector,
            weight: 1,
            time_mean: t,
            time_span: TimeSpan::point(t),
            prototype_id,
        });
        if let Some(pid) = prototype_id {
            let p = &mut self.state.prototypes[pid];
            p.member_ids.push(j);
            p.weight += 1;
        }
        self.pair_sim.push(Vec::new());
        self.norms.push(T::zero());
        self.refresh_pair_sim(j);
        j
    }

    /// Recomputes row and column `j` of the pairwise similarity cache.
    fn refresh_pair_sim(&mut self, j: usize) {
        let n = self.state.centroids.len();
        let vj = self.state.centroids[j].vector.as_slice();
        let nj = norm(vj);
        self.norms[j] = nj;
        let row: Vec<T> = (0..n)
            .map(|i| {
                cosine_with_norms(
                    vj,
                    nj,
                    self.state.centroids[i].vector.as_slice(),
                    self.norms[i],
                )
                .unwrap_or(-T::one())
            })
            .collect();
        for (i, &s) in row.iter().enumerate() {
            self.pair_sim[i].resize(n, -T::one());
            self.pair_sim[i][j] = s;
        }
        self.pair_sim[j] = row;
    }

    /// Merges the two most similar centroids into their weighted mean.
    /// Returns a prototype left without members, if any.
    fn merge_closest_pair(&mut self) -> Option<usize> {
        let n = self.state.centroids.len();
        if n < 2 {
            return None;
        }
        let mut best = (0, 1, -T::infinity());
        for i in 0..n {
            for j in (i + 1)..n {
                let s = self.pair_sim[i][j];
                if s > best.2 {
                    best = (i, j, s);
                }
            }
        }
        let (i, j, _) = best;
        let removed = self.state.centroids.remove(j);
        self.pair_sim.remove(j);
        self.norms.remove(j);
        for row in &mut self.pair_sim {
            row.remove(j);
        }
        let keep = &mut self.state.centroids[i];
        let wa = T::from_u64(keep.weight).expect("weight fits");
        let wb = T::from_u64(removed.weight).expect("weight fits");
        let total = wa + wb;
        keep.vector.values = keep
            .vector
            .values
            .iter()
            .zip(&removed.vector.values)
            .map(|(&a, &b)| (a * wa + b * wb) / total)
            .collect();
        keep.time_mean = (keep.time_mean * wa + removed.time_mean * wb) / total;
        keep.time_span = keep.time_span.union(&removed.time_span);
        keep.weight += removed.weight;
        self.refresh_pair_sim(i);

        let orphan = removed.prototype_id.filter(|&pid| {
            !self
                .state
                .centroids
                .iter()
                .any(|c| c.prototype_id == Some(pid))
        });
        self.rebuild_members();
        orphan
    }

    fn rebuild_members(&mut self) {
        for p in &mut self.state.prototypes {
            p.member_ids.clear();
            p.weight = 0;
        }
        for (j, c) in self.state.centroids.iter().enumerate() {
            if let Some(pid) = c.prototype_id {
                let p = &mut self.state.prototypes[pid];
                p.member_ids.push(j);
                p.weight += c.weight;
            }
        }
    }

    fn centroid_vectors(&self) -> Vec<Vec<T>> {
        self.state
            .centroids
            .iter()
            .map(|c| c.vector.values.clone())
            .collect()
    }

    fn rebuild_from_kmeans(&mut self, k: usize, iters: usize) {
        let points = self.centroid_vectors();
        let seed = self.cfg.seed.wrapping_add(self.abstractions);
        let km = kmeans(&points, k, iters, seed).expect("1 <= k <= |centroids|");
        self.state.prototypes = km
            .centroids
            .into_iter()
            .map(|v| Prototype {
                vector: EmbeddingVector::from_raw(v),
                member_ids: Vec::new(),
                weight: 0,
            })
            .collect();
        for (c, &a) in self.state.centroids.iter_mut().zip(&km.assignments) {
            c.prototype_id = Some(a);
        }
        self.fill_empty_prototypes();
        self.rebuild_members();
        self.set_prototypes_to_member_means();
    }

    fn set_prototypes_to_member_means(&mut self) {
        for p in &mut self.state.prototypes {
            if let Some(mean) = member_mean(&self.state.centroids, &p.member_ids) {
                p.vector.values = mean;
            }
        }
    }

    /// Gives every empty prototype the centroid farthest from its current
    /// prototype, taken from a prototype that has more than one member.
    fn fill_empty_prototypes(&mut self) {
        loop {
            let mut counts = vec![0usize; self.state.prototypes.len()];
            for c in &self.state.centroids {
                if let Some(pid) = c.prototype_id {
                    counts[pid] += 1;
                }
            }
            let Some(empty) = counts.iter().position(|&n| n == 0) else {
                return;
            };
            let mut donor: Option<(usize, T)> = None;
            for (j, c) in self.state.centroids.iter().enumerate() {
                let Some(pid) = c.prototype_id else { continue };
                if counts[pid] < 2 {
                    continue;
                }
                let d =
                    squared_distance(&c.vector.values, &self.state.prototypes[pid].vector.values);
                if donor.is_none_or(|(_, bd)| d > bd) {
                    donor = Some((j, d));
                }
            }
            let Some((j, _)) = donor else {
                // fewer centroids than prototypes: drop the empty slot
                self.drop_prototype(empty);
                continue;
            };
            self.state.centroids[j].prototype_id = Some(empty);
            self.state.prototypes[empty].vector.values =
                self.state.centroids[j].vector.values.clone();
        }
    }

    fn drop_prototype(&mut self, pid: usize) {
        self.state.prototypes.remove(pid);
        for c in &mut self.state.centroids {
            c.prototype_id = match c.prototype_id {
                Some(p) if p > pid => Some(p - 1),
                Some(p) if p == pid => None,
                other => other,
            };
        }
    }

    /// Summarizes the centroid level into prototypes.
    ///
    /// With no (or too few) prototypes this seeds them by k-means with
    /// `k = min(U, |centroids|)`; otherwise each prototype moves by the EMA
    /// rule towards the mean of its members and memberships are refreshed by
    /// nearest prototype. Centroids are retained either way.
    pub fn abstract_to_prototypes(&mut self) -> usize {
        let n = self.state.centroids.len();
        if n == 0 {
            return 0;
        }
        self.abstractions += 1;
        let k = self.cfg.prototype_capacity.min(n);
        if self.state.prototypes.is_empty() {
            self.rebuild_from_kmeans(k, self.cfg.abstraction_kmeans_iters);
            return self.state.prototypes.len();
        }

        let alpha = self.cfg.alpha;
        for p in &mut self.state.prototypes {
            if let Some(mean) = member_mean(&self.state.centroids, &p.member_ids) {
                p.vector.values =
                    ema_blend(&p.vector.values, &mean, alpha).expect("validated dims and alpha");
            }
        }
        // an early, small abstraction leaves spare slots; seed them at the
        // centroids worst explained by the current prototypes
        while self.state.prototypes.len() < k {
            let mut pick = (0, -T::one());
            for (j, c) in self.state.centroids.iter().enumerate() {
                let d = self
                    .state
                    .prototypes
                    .iter()
                    .map(|p| squared_distance(&c.vector.values, &p.vector.values))
                    .fold(T::infinity(), T::min);
                if d > pick.1 {
                    pick = (j, d);
                }
            }
            let v = self.state.centroids[pick.0].vector.clone();
            self.state.prototypes.push(Prototype {
                vector: v,
                member_ids: Vec::new(),
                weight: 0,
            });
        }
        let prototypes = &self.state.prototypes;
        for c in &mut self.state.centroids {
            c.prototype_id = Some(nearest_prototype(&c.vector.values, prototypes));
        }
        self.fill_empty_prototypes();
        self.rebuild_members();
        self.state.prototypes.len()
    }

    /// Same value as [`MemoryTreeSnapshot::intra_prototype_similarity`],
    /// reusing the cached centroid norms.
    fn intra_similarity_cached(&self) -> Option<T> {
        let proto_norms: Vec<T> = self
            .state
            .prototypes
            .iter()
            .map(|p| p.vector.norm())
            .collect();
        let mut total = T::zero();
        let mut n = 0usize;
        for (j, c) in self.state.centroids.iter().enumerate() {
            let Some(pid) = c.prototype_id else { continue };
            let p = self.state.prototypes[pid].vector.as_slice();
            if let Some(s) =
                cosine_with_norms(c.vector.as_slice(), self.norms[j], p, proto_norms[pid])
            {
                total = total + s;
                n += 1;
            }
        }
        (n > 0).then(|| total / T::from_usize_lossy(n))
    }

    /// Re-clusters prototypes with a short k-means when members have drifted
    /// away from their prototypes.
    pub fn realign_prototypes(&mut self) -> bool {
        if self.state.prototypes.is_empty() {
            return false;
        }
        let Some(mean_sim) = self.intra_similarity_cached() else {
            return false;
        };
        if mean_sim >= self.cfg.hetero_threshold {
            return false;
        }
        self.abstractions += 1;
        let k = self.cfg.prototype_capacity.min(self.state.centroids.len());
        self.rebuild_from_kmeans(k, self.cfg.mini_kmeans_iters);
        true
    }
}

/// Outcome of routing one evicted frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeReport {
    pub outcome: MergeOutcome,
    pub abstraction: bool,
    pub realignment: bool,
}

/// First prototype at the smallest squared distance, as in `nearest_center`.
fn nearest_prototype<T: Scalar>(point: &[T], prototypes: &[Prototype<T>]) -> usize {
    let mut best = (0, T::infinity());
    for (i, p) in prototypes.iter().enumerate() {
        let d = squared_distance(point, &p.vector.values);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

fn member_mean<T: Scalar>(centroids: &[Centroid<T>], members: &[usize]) -> Option<Vec<T>> {
    let first = members.first()?;
    let mut acc = vec![T::zero(); centroids[*first].vector.dim()];
    for &m in members {
        for (a, &v) in acc.iter_mut().zip(&centroids[m].vector.values) {
            *a = *a + v;
        }
    }
    let n = T::from_usize_lossy(members.len());
    Some(acc.into_iter().map(|a| a / n).collect())
}
