//! Answer readiness: a learned readiness state plus a small head scoring each
//! step, pseudo-labels mined from memory, the contrastive training objective
//! and the trigger policy.

mod labels;
mod train;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;
use crate::vecmath::{logistic, EmbeddingVector};

pub use labels::{
    build_pseudo_labels, interval_measure, merge_intervals, temporal_iou, PseudoLabelSet,
};
pub use train::{
    loss_ctr, loss_rdy, loss_rdy_parts, objective_and_gradient, sample_pairs, train_readiness,
    write_loss_curve_csv, LossPoint, ReadinessTrainConfig, TrainingEpisode, TrainingOutcome,
};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Readiness state vector and a `2d → h → 1` perceptron with `tanh` hidden
/// units and a logistic output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", deny_unknown_fields)]
pub struct ReadinessModel<T: Scalar> {
    pub version: u32,
    pub dim: usize,
    pub hidden: usize,
    pub threshold: T,
    pub rdy_embedding: Vec<T>,
    /// Row-major `hidden × 2·dim`; columns `dim..` multiply the readiness state.
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub w2: Vec<T>,
    pub b2: T,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct Forward<T> {
    pub input: Vec<T>,
    pub hidden: Vec<T>,
    pub score: T,
}

impl<T: Scalar> ReadinessModel<T> {
    pub fn new(dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(invalid("readiness model needs dim >= 1 and hidden >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize, scale: f64| -> Vec<T> {
            (0..n)
                .map(|_| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    T::lit(g * scale)
                })
                .collect()
        };
        let rdy_embedding = draw(dim, 1.0 / (dim as f64).sqrt());
        // columns on z_l start at zero so the untrained trace is flat
        let mut w1 = draw(hidden * 2 * dim, 1.0 / ((2 * dim) as f64).sqrt());
        for row in w1.chunks_mut(2 * dim) {
            row[..dim].fill(T::zero());
        }
        let w2 = draw(hidden, 1.0 / (hidden as f64).sqrt());
        Ok(Self {
            version: MODEL_FORMAT_VERSION,
            dim,
            hidden,
            threshold: T::lit(0.35),
            rdy_embedding,
            w1,
            b1: vec![T::zero(); hidden],
            w2,
            b2: T::zero(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported readiness model version {}",
                self.version
            )));
        }
        let (d, h) = (self.dim, self.hidden);
        let shapes = [
            ("rdy_embedding", self.rdy_embedding.len(), d),
            ("w1", self.w1.len(), h * 2 * d),
            ("b1", self.b1.len(), h),
            ("w2", self.w2.len(), h),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Config(format!(
                    "{name}: expected {want} values, got {got}"
                )));
            }
        }
        if self.to_flat().iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateInput("non-finite readiness weight".into()));
        }
        if !(self.threshold > T::zero() && self.threshold < T::one()) {
            return Err(Error::Config(
                "readiness threshold must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.dim + self.w1.len() + self.hidden * 2 + 1
    }

    /// Parameters flattened as `rdy, w1, b1, w2, b2`.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.rdy_embedding);
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut rest = flat;
        for part in [
            &mut self.rdy_embedding,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
        ] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        self.b2 = rest[0];
        Ok(())
    }

    pub(crate) fn forward(&self, z_l: &[T]) -> Forward<T> {
        let d = self.dim;
        let x = head_input(z_l);
        let mut hidden = Vec::with_capacity(self.hidden);
        let mut out = self.b2;
        for k in 0..self.hidden {
            let row = &self.w1[k * 2 * d..(k + 1) * 2 * d];
            let mut a = self.b1[k];
            for i in 0..d {
                a = a + row[i] * x[i] + row[d + i] * self.rdy_embedding[i];
            }
            let h = a.tanh();
            out = out + self.w2[k] * h;
            hidden.push(h);
        }
        Forward {
            input: x,
            hidden,
            score: logistic(out),
        }
    }

    /// Accumulates `upstream · ∂R/∂θ` into `grad` (flat layout).
    pub(crate) fn backward(&self, fwd: &Forward<T>, upstream: T, grad: &mut [T]) {
        let d = self.dim;
        let two_d = 2 * d;
        let r = fwd.score;
        let g_out = upstream * r * (T::one() - r);
        let off_w1 = d;
        let off_b1 = off_w1 + self.w1.len();
        let off_w2 = off_b1 + self.hidden;
        let off_b2 = off_w2 + self.hidden;
        grad[off_b2] = grad[off_b2] + g_out;
        for k in 0..self.hidden {
            let h = fwd.hidden[k];
            grad[off_w2 + k] = grad[off_w2 + k] + g_out * h;
            let g_a = g_out * self.w2[k] * (T::one() - h * h);
            if g_a == T::zero() {
                continue;
            }
            grad[off_b1 + k] = grad[off_b1 + k] + g_a;
            let row = &self.w1[k * two_d..(k + 1) * two_d];
            let grow = &mut grad[off_w1 + k * two_d..off_w1 + (k + 1) * two_d];
            for i in 0..d {
                grow[i] = grow[i] + g_a * fwd.input[i];
                grow[d + i] = grow[d + i] + g_a * self.rdy_embedding[i];
            }
            for i in 0..d {
                grad[i] = grad[i] + g_a * row[d + i];
            }
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        model.validate()?;
        Ok(model)
    }
}

/// `z_l` rescaled to norm `√d`, so the head sees unit-RMS coordinates
/// whatever the pooled magnitude. The zero vector passes through.
pub fn head_input<T: Scalar>(z_l: &[T]) -> Vec<T> {
    let norm = z_l.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
    if norm == T::zero() {
        return z_l.to_vec();
    }
    let scale = T::from_usize_lossy(z_l.len()).sqrt() / norm;
    z_l.iter().map(|&v| v * scale).collect()
}

/// `R_pred = σ(head([ẑ_l; rdy]))` with `ẑ_l` from [`head_input`].
pub fn readiness_score<T: Scalar>(
    model: &ReadinessModel<T>,
    z_l: &EmbeddingVector<T>,
) -> Result<T> {
    if z_l.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: z_l.dim(),
        });
    }
    Ok(model.forward(z_l.as_slice()).score)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerDecision {
    AnswerNow,
    KeepWaiting,
}

/// Fires when the latest score reaches the threshold.
pub fn trigger<T: Scalar>(threshold: T, latest_score: T) -> TriggerDecision {
    if latest_score >= threshold {
        TriggerDecision::AnswerNow
    } else {
        TriggerDecision::KeepWaiting
    }
}

/// Readiness scores of one pending question over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ReadinessTrace<T: Scalar> {
    pub question_id: String,
    /// `(time, R_pred)` pairs in stream order.
    pub scores: Vec<(T, T)>,
    pub t_a: Option<T>,
    pub triggered: bool,
}

impl<T: Scalar> ReadinessTrace<T> {
    pub fn new(question_id: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            scores: Vec::new(),
            t_a: None,
            triggered: false,
        }
    }

    /// Appends a score and applies the trigger rule; only the first firing
    /// sets `t_a`.
    pub fn push(&mut self, t_now: T, score: T, threshold: T) -> TriggerDecision {
        self.scores.push((t_now, score));
        if self.triggered {
            return TriggerDecision::AnswerNow;
        }
        let decision = trigger(threshold, score);
        if decision == TriggerDecision::AnswerNow {
            self.triggered = true;
            self.t_a = Some(t_now);
        }
        decision
    }

    /// First time the trace reaches `threshold`, replayed offline.
    pub fn first_crossing(&self, threshold: T) -> Option<T> {
        self.scores
            .iter()
            .find(|(_, s)| *s >= threshold)
            .map(|(t, _)| *t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn zero_model(d: usize) -> ReadinessModel<f64> {
        let mut m = ReadinessModel::new(d, 4, 0).unwrap();
        let n = m.param_count();
        m.set_flat(&vec![0.0; n]).unwrap();
        m
    }

    /// Straight-line forward pass over explicit concatenation.
    fn reference_score(m: &ReadinessModel<f64>, z: &[f64]) -> f64 {
        let rms = (z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64).sqrt();
        let x: Vec<f64> = z
            .iter()
            .map(|v| if rms > 0.0 { v / rms } else { *v })
            .chain(m.rdy_embedding.iter().copied())
            .collect();
        let mut o = m.b2;
        for k in 0..m.hidden {
            let a: f64 = m.b1[k]
                + (0..x.len())
                    .map(|i| m.w1[k * x.len() + i] * x[i])
                    .sum::<f64>();
            o += m.w2[k] * a.tanh();
        }
        1.0 / (1.0 + (-o).exp())
    }

    #[test]
    fn score_examples() {
        let z = EmbeddingVector::new(vec![0.3, -1.0, 2.0]).unwrap();
        let mut m = zero_model(3);
        assert_eq!(readiness_score(&m, &z).unwrap(), 0.5);
        m.b2 = 50.0;
        assert!(readiness_score(&m, &z).unwrap() >= 0.999);

        let m = ReadinessModel::<f64>::new(8, 16, 7).unwrap();
        let z: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let got = readiness_score(&m, &EmbeddingVector::new(z.clone()).unwrap()).unwrap();
        assert_abs_diff_eq!(got, reference_score(&m, &z), epsilon = 1e-9);
        assert!(readiness_score(&m, &EmbeddingVector::new(vec![1.0; 3]).unwrap()).is_err());
    }

    #[test]
    fn trigger_examples() {
        let mut tr = ReadinessTrace::new("q");
        let decisions: Vec<_> = [0.1, 0.2, 0.36]
            .iter()
            .enumerate()
            .map(|(i, &s)| tr.push(i as f64, s, 0.35))
            .collect();
        assert_eq!(decisions[2], TriggerDecision::AnswerNow);
        assert_eq!(tr.t_a, Some(2.0));

        let mut never = ReadinessTrace::new("q");
        for i in 0..10 {
            never.push(i as f64, 0.34, 0.35);
        }
        assert!(!never.triggered && never.t_a.is_none());

        let mut zero = ReadinessTrace::new("q");
        assert_eq!(zero.push(5.0, 0.0, 0.0), TriggerDecision::AnswerNow);
        assert_eq!(zero.t_a, Some(5.0));
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = ReadinessModel::<f64>::new(5, 3, 1).unwrap();
        m.save_json(&path).unwrap();
        assert_eq!(ReadinessModel::load_json(&path).unwrap(), m);

        let mut bad: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        bad["w2"] = serde_json::json!([1.0]);
        std::fs::write(&path, bad.to_string()).unwrap();
        assert!(ReadinessModel::<f64>::load_json(&path).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let m = ReadinessModel::<f64>::new(4, 3, 2).unwrap();
        let mut other = zero_model(4);
        other.hidden = 3;
        other.w1 = vec![0.0; 24];
        other.b1 = vec![0.0; 3];
        other.w2 = vec![0.0; 3];
        other.set_flat(&m.to_flat()).unwrap();
        assert_eq!(other, m);
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(seed in 0u64..1000, z in prop::collection::vec(-50.0..50.0f64, 6)) {
            let m = ReadinessModel::<f64>::new(6, 8, seed).unwrap();
            let s = readiness_score(&m, &EmbeddingVector::new(z).unwrap()).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn raising_threshold_never_triggers_earlier(
            scores in prop::collection::vec(0.0..1.0f64, 1..40),
            lo in 0.0..1.0f64,
            bump in 0.0..0.5f64,
        ) {
            let mut a = ReadinessTrace::new("q");
            let mut b = ReadinessTrace::new("q");
            for (i, &s) in scores.iter().enumerate() {
                a.push(i as f64, s, lo);
                b.push(i as f64, s, lo + bump);
            }
            if let Some(tb) = b.t_a {
                prop_assert!(a.t_a.is_some_and(|ta| ta <= tb));
            }
        }
    }
}
