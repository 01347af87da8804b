//! Deterministic numeric primitives: similarity, smooth min/max, seeded
//! Lloyd k-means and EMA blending.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Fixed-dimension real vector with an optional stream timestamp (seconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingVector<T: Scalar> {
    pub values: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Builds a vector, rejecting empty or non-finite input.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DegenerateInput("empty vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite vector entry".into()));
        }
        Ok(Self {
            values,
            timestamp: None,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
            timestamp: None,
        }
    }

    pub fn with_timestamp(mut self, t: T) -> Self {
        self.timestamp = Some(t);
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn dot(&self, other: &Self) -> T {
        dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> T {
        norm(&self.values)
    }

    /// Returns a unit-norm copy, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n <= T::zero() {
            return None;
        }
        Some(Self {
            values: self.values.iter().map(|&v| v / n).collect(),
            timestamp: self.timestamp,
        })
    }

    pub(crate) fn from_raw(values: Vec<T>) -> Self {
        Self {
            values,
            timestamp: None,
        }
    }
}

impl<T: Scalar> AsRef<[T]> for EmbeddingVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

/// Sums `f(a[i], b[i])` over four interleaved accumulators so the loop
/// vectorizes; the summation order is fixed, so results are deterministic.
#[inline]
fn lane_sum<T: Scalar>(a: &[T], b: &[T], f: impl Fn(T, T) -> T) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        let (x, y): (&[T; 4], &[T; 4]) = (
            x.try_into().expect("chunk of 4"),
            y.try_into().expect("chunk of 4"),
        );
        acc = [
            acc[0] + f(x[0], y[0]),
            acc[1] + f(x[1], y[1]),
            acc[2] + f(x[2], y[2]),
            acc[3] + f(x[3], y[3]),
        ];
    }
    let tail = ra.iter().zip(rb).fold(T::zero(), |t, (&x, &y)| t + f(x, y));
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    lane_sum(a, b, |x, y| x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    lane_sum(a, b, |x, y| (x - y) * (x - y))
}

/// Cosine similarity of two nonzero vectors of equal dimension.
pub fn cosine_similarity<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    cosine_with_norms(a, norm(a), b, norm(b))
        .ok_or_else(|| Error::DegenerateInput("zero-norm vector in cosine similarity".into()))
}

/// Cosine similarity from precomputed norms; `None` if either is zero.
#[inline]
pub(crate) fn cosine_with_norms<T: Scalar>(a: &[T], na: T, b: &[T], nb: T) -> Option<T> {
    if na <= T::zero() || nb <= T::zero() {
        return None;
    }
    let c = dot(a, b) / (na * nb);
    // rounding can push |c| a hair past 1
    Some(c.max(-T::one()).min(T::one()))
}

/// Cosine similarity that maps degenerate input to `None` instead of an error.
#[inline]
pub(crate) fn cosine_or_none<T: Scalar>(a: &[T], b: &[T]) -> Option<T> {
    cosine_similarity(a, b).ok()
}

/// Temperature and mode for the smooth min/max operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct SmoothingConfig<T: Scalar> {
    pub beta: T,
    pub hard_mode: bool,
}

impl<T: Scalar> SmoothingConfig<T> {
    pub fn hard() -> Self {
        Self {
            beta: T::lit(20.0),
            hard_mode: true,
        }
    }

    pub fn smooth(beta: T) -> Self {
        Self {
            beta,
            hard_mode: false,
        }
    }

    /// Largest possible gap between the smooth and hard operators.
    pub fn max_gap(&self) -> T {
        if self.hard_mode {
            T::zero()
        } else {
            T::LN_2() / self.beta
        }
    }
}

impl<T: Scalar> Default for SmoothingConfig<T> {
    fn default() -> Self {
        Self::hard()
    }
}

/// `-(1/β)·ln(e^{-βa} + e^{-βb})`, or the exact minimum in hard mode.
pub fn smooth_min<T: Scalar>(a: T, b: T, cfg: &SmoothingConfig<T>) -> T {
    if cfg.hard_mode {
        return a.min(b);
    }
    let lo = a.min(b);
    let gap = (a - b).abs();
    // stable form: min - ln(1 + e^{-β|a-b|}) / β
    lo - (-cfg.beta * gap).exp().ln_1p() / cfg.beta
}

/// `(1/β)·ln(e^{βa} + e^{βb})`, or the exact maximum in hard mode.
pub fn smooth_max<T: Scalar>(a: T, b: T, cfg: &SmoothingConfig<T>) -> T {
    -smooth_min(-a, -b, cfg)
}

/// Result of a k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<T: Scalar> {
    pub centroids: Vec<Vec<T>>,
    pub assignments: Vec<usize>,
    /// Lloyd iterations actually performed.
    pub iterations: usize,
}

impl<T: Scalar> KMeans<T> {
    pub fn inertia<P: AsRef<[T]>>(&self, points: &[P]) -> T {
        within_cluster_ss(points, &self.centroids, &self.assignments)
    }
}

/// Total squared distance of every point to its assigned centroid.
pub fn within_cluster_ss<T: Scalar, P: AsRef<[T]>>(
    points: &[P],
    centroids: &[Vec<T>],
    assignments: &[usize],
) -> T {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| squared_distance(p.as_ref(), &centroids[a]))
        .sum()
}

/// Index of the nearest center by squared Euclidean distance; lowest index wins ties.
pub fn nearest_center<T: Scalar>(point: &[T], centers: &[Vec<T>]) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Seeded farthest-point initialization followed by Lloyd iterations.
///
/// Identical `(points, k, max_iters, seed)` give bit-identical output.
/// A cluster that loses all of its points keeps its previous center.
pub fn kmeans<T: Scalar, P: AsRef<[T]>>(
    points: &[P],
    k: usize,
    max_iters: usize,
    seed: u64,
) -> Result<KMeans<T>> {
    if points.is_empty() {
        return Err(invalid("kmeans needs at least one point"));
    }
    if k == 0 {
        return Err(invalid("kmeans needs k >= 1"));
    }
    if k > points.len() {
        return Err(invalid(format!(
            "kmeans k = {k} exceeds point count {}",
            points.len()
        )));
    }
    let dim = points[0].as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.as_ref().len(),
        });
    }

    let mut centers = farthest_point_init(points, k, seed);
    let mut assignments: Vec<usize> = points
        .iter()
        .map(|p| nearest_center(p.as_ref(), &centers))
        .collect();
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        update_means(points, &assignments, &mut centers);
        let next: Vec<usize> = points
            .iter()
            .map(|p| nearest_center(p.as_ref(), &centers))
            .collect();
        let converged = next == assignments;
        assignments = next;
        if converged {
            break;
        }
    }

    Ok(KMeans {
        centroids: centers,
        assignments,
        iterations,
    })
}

fn farthest_point_init<T: Scalar, P: AsRef<[T]>>(points: &[P], k: usize, seed: u64) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..points.len());
    let mut chosen = vec![false; points.len()];
    chosen[first] = true;
    let mut centers = vec![points[first].as_ref().to_vec()];
    let mut min_dist: Vec<T> = points
        .iter()
        .map(|p| squared_distance(p.as_ref(), &centers[0]))
        .collect();

    while centers.len() < k {
        let mut pick = None;
        let mut pick_d = -T::one();
        for (i, &d) in min_dist.iter().enumerate() {
            if !chosen[i] && d > pick_d {
                pick_d = d;
                pick = Some(i);
            }
        }
        // k <= n guarantees an unchosen point exists
        let i = pick.expect("unchosen point available");
        chosen[i] = true;
        let c = points[i].as_ref().to_vec();
        for (j, p) in points.iter().enumerate() {
            let d = squared_distance(p.as_ref(), &c);
            if d < min_dist[j] {
                min_dist[j] = d;
            }
        }
        centers.push(c);
    }
    centers
}

fn update_means<T: Scalar, P: AsRef<[T]>>(
    points: &[P],
    assignments: &[usize],
    centers: &mut [Vec<T>],
) {
    let dim = centers[0].len();
    let mut sums = vec![vec![T::zero(); dim]; centers.len()];
    let mut counts = vec![0usize; centers.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, &v) in sums[a].iter_mut().zip(p.as_ref()) {
            *s = *s + v;
        }
    }
    for ((center, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
        if count > 0 {
            let n = T::from_usize_lossy(count);
            *center = sum.into_iter().map(|s| s / n).collect();
        }
    }
}

/// `(1 - α)·old + α·new`, componentwise.
pub fn ema_blend<T: Scalar>(old: &[T], new: &[T], alpha: T) -> Result<Vec<T>> {
    if old.len() != new.len() {
        return Err(Error::DimensionMismatch {
            expected: old.len(),
            got: new.len(),
        });
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(invalid("ema alpha must lie in [0, 1]"));
    }
    let keep = T::one() - alpha;
    Ok(old
        .iter()
        .zip(new)
        .map(|(&o, &n)| keep * o + alpha * n)
        .collect())
}

/// Scalar version of [`ema_blend`], used for time metadata.
#[inline]
pub fn ema_scalar<T: Scalar>(old: T, new: T, alpha: T) -> T {
    (T::one() - alpha) * old + alpha * new
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Softmax weights; empty input gives empty output.
pub fn softmax<T: Scalar>(scores: &[T]) -> Vec<T> {
    let Some(max) = scores.iter().copied().reduce(T::max) else {
        return Vec::new();
    };
    let exps: Vec<T> = scores.iter().map(|&s| (s - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    #[allow(clippy::approx_constant)]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        // 1 / (sqrt(2) * 1)
        let expected = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(
            cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            expected,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(expected, 0.70710678, epsilon = 1e-8);
    }

    #[test]
    fn cosine_rejects_zero_and_mismatch() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cosine_works_for_f32() {
        let c: f32 = cosine_similarity(&[3.0f32, 4.0], &[4.0, 3.0]).unwrap();
        assert!((c - 0.96).abs() < 1e-6);
    }

    #[test]
    fn smooth_min_examples() {
        assert_eq!(smooth_min(1.0, 5.0, &SmoothingConfig::hard()), 1.0);
        let cfg = SmoothingConfig::smooth(20.0);
        assert_abs_diff_eq!(
            smooth_min(0.3, 0.3, &cfg),
            0.3 - 2f64.ln() / 20.0,
            epsilon = 1e-12
        );
        // direct log-sum-exp
        let direct = -(1.0 / 20.0) * ((-20.0f64 * 0.2).exp() + (-20.0f64 * 0.9).exp()).ln();
        assert_abs_diff_eq!(smooth_min(0.2, 0.9, &cfg), direct, epsilon = 1e-12);
        assert!((smooth_min(0.2, 0.9, &cfg) - 0.2).abs() <= 2f64.ln() / 20.0);
        assert_abs_diff_eq!(
            smooth_max(0.2, 0.9, &cfg),
            -smooth_min(-0.2, -0.9, &cfg),
            epsilon = 1e-15
        );
    }

    #[test]
    fn smooth_min_converges_with_beta() {
        for beta in [1.0, 10.0, 100.0, 1000.0] {
            let cfg = SmoothingConfig::smooth(beta);
            let v = smooth_min(0.4, 0.7, &cfg);
            assert!(v <= 0.4 && v >= 0.4 - 2f64.ln() / beta);
        }
    }

    #[test]
    fn kmeans_degenerate_cases() {
        let pts = vec![vec![2.0, 3.0]; 5];
        let km = kmeans(&pts, 1, 10, 7).unwrap();
        assert_eq!(km.centroids, vec![vec![2.0, 3.0]]);

        let pts = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![-3.0, 2.0]];
        let km = kmeans(&pts, 3, 10, 1).unwrap();
        let mut got = km.centroids.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = pts.clone();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got, want);

        assert!(matches!(
            kmeans(&pts, 4, 10, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(kmeans::<f64, Vec<f64>>(&[], 1, 10, 1).is_err());
    }

    /// Exhaustive search over all 2-partitions of a small point set.
    fn best_two_partition(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = points.len();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1..(1u32 << n) - 1 {
            let groups: Vec<Vec<&Vec<f64>>> = (0..2)
                .map(|g| {
                    (0..n)
                        .filter(|&i| ((mask >> i) & 1) as usize == g)
                        .map(|i| &points[i])
                        .collect()
                })
                .collect();
            let mut cost = 0.0;
            let mut means = vec![];
            for g in &groups {
                let mean: Vec<f64> = (0..2)
                    .map(|d| g.iter().map(|p| p[d]).sum::<f64>() / g.len() as f64)
                    .collect();
                cost += g.iter().map(|p| squared_distance(p, &mean)).sum::<f64>();
                means.push(mean);
            }
            if cost < best.0 {
                best = (cost, means);
            }
        }
        let mut m = best.1;
        m.sort_by(|a, b| a.partial_cmp(b).unwrap());
        m
    }

    #[test]
    fn kmeans_two_blobs_matches_exhaustive_partition() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 0.0],
            vec![10.0, 1.0],
        ];
        let oracle = best_two_partition(&pts);
        assert_eq!(oracle, vec![vec![0.0, 0.5], vec![10.0, 0.5]]);
        for seed in 0..8 {
            let km = kmeans(&pts, 2, 20, seed).unwrap();
            let mut got = km.centroids.clone();
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(got, oracle);
        }
    }

    #[test]
    fn ema_blend_examples() {
        assert_eq!(
            ema_blend(&[1.0, 2.0], &[5.0, 5.0], 0.0).unwrap(),
            vec![1.0, 2.0]
        );
        assert_eq!(
            ema_blend(&[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap(),
            vec![0.5, 0.5]
        );
        let v = ema_blend(&[1.0, 0.0], &[0.0, 1.0], 0.985).unwrap();
        assert_abs_diff_eq!(v[0], 0.015, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1], 0.985, epsilon = 1e-12);
        assert!(ema_blend(&[1.0], &[1.0], 1.5).is_err());
        assert!(ema_blend(&[1.0], &[1.0], -0.1).is_err());
    }

    #[test]
    fn softmax_and_logistic() {
        let w = softmax(&[1.0, 1.0]);
        assert_eq!(w, vec![0.5, 0.5]);
        assert!(softmax::<f64>(&[]).is_empty());
        assert_eq!(logistic(0.0), 0.5);
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
    }

    fn nonzero_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12)
            .prop_flat_map(|d| {
                (
                    prop::collection::vec(-100.0..100.0f64, d),
                    prop::collection::vec(-100.0..100.0f64, d),
                )
            })
            .prop_filter("nonzero", |(a, b)| norm(a) > 1e-6 && norm(b) > 1e-6)
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded((a, b) in nonzero_pair()) {
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ab.abs() <= 1.0 + 1e-12);
        }

        #[test]
        fn smooth_min_bracketed(a in -50.0..50.0f64, b in -50.0..50.0f64, bi in 0usize..4) {
            let beta = [1.0, 10.0, 100.0, 1000.0][bi];
            let cfg = SmoothingConfig::smooth(beta);
            let m = a.min(b);
            let s = smooth_min(a, b, &cfg);
            prop_assert!(s <= m + 1e-12);
            prop_assert!(s >= m - 2f64.ln() / beta - 1e-12);
        }

        #[test]
        fn ema_blend_is_convex(
            (old, new) in (1usize..8).prop_flat_map(|d| (
                prop::collection::vec(-10.0..10.0f64, d),
                prop::collection::vec(-10.0..10.0f64, d))),
            alpha in 0.0..=1.0f64,
        ) {
            let out = ema_blend(&old, &new, alpha).unwrap();
            for ((o, n), v) in old.iter().zip(&new).zip(&out) {
                prop_assert!(*v >= o.min(*n) - 1e-12 && *v <= o.max(*n) + 1e-12);
            }
        }

        #[test]
        fn kmeans_deterministic_and_monotone(
            pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 4..30),
            k in 1usize..4,
            seed in 0u64..1000,
        ) {
            let a = kmeans(&pts, k, 10, seed).unwrap();
            let b = kmeans(&pts, k, 10, seed).unwrap();
            prop_assert_eq!(&a, &b);
            // objective never increases as the iteration cap grows
            let mut prev = f64::INFINITY;
            for iters in 0..6 {
                let km = kmeans(&pts, k, iters, seed).unwrap();
                let obj = km.inertia(&pts);
                prop_assert!(obj <= prev + 1e-9);
                prev = obj;
            }
            for (p, &a_i) in pts.iter().zip(&a.assignments) {
                prop_assert_eq!(nearest_center(p, &a.centroids), a_i);
            }
        }
    }
}
