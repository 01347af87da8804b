use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PseudoLabelSet, ReadinessModel};
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct ReadinessTrainConfig<T: Scalar> {
    pub lambda_reg: T,
    pub pos_quantile: T,
    pub neg_quantile: T,
    pub learning_rate: T,
    pub epochs: usize,
    pub pairs_per_episode: usize,
    /// Hidden width of a freshly initialized head.
    pub hidden: usize,
    pub seed: u64,
}

impl<T: Scalar> Default for ReadinessTrainConfig<T> {
    fn default() -> Self {
        Self {
            lambda_reg: T::lit(0.1),
            pos_quantile: T::lit(0.2),
            neg_quantile: T::lit(0.4),
            learning_rate: T::lit(0.05),
            epochs: 200,
            pairs_per_episode: 64,
            hidden: 16,
            seed: 0,
        }
    }
}

impl<T: Scalar> ReadinessTrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let open = |q: T| q > T::zero() && q < T::one();
        if !open(self.pos_quantile)
            || !open(self.neg_quantile)
            || self.pos_quantile + self.neg_quantile > T::one()
        {
            return Err(Error::Config(
                "quantiles must lie in (0, 1) and sum to at most 1".into(),
            ));
        }
        if !(self.lambda_reg >= T::zero()) {
            return Err(Error::Config("lambda_reg must be >= 0".into()));
        }
        if !(self.learning_rate > T::zero()) || self.pairs_per_episode == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "learning_rate, pairs_per_episode and hidden must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A frozen-reasoner trajectory for one question with its pseudo-labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainingEpisode<T: Scalar> {
    pub question_id: String,
    pub times: Vec<T>,
    /// `z_l` at each entry of `times`.
    pub trajectory: Vec<Vec<T>>,
    pub labels: PseudoLabelSet<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct LossPoint<T: Scalar> {
    pub epoch: usize,
    pub l_ctr: T,
    pub tv: T,
    pub total: T,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome<T: Scalar> {
    pub model: ReadinessModel<T>,
    pub curve: Vec<LossPoint<T>>,
    /// Episodes that yielded at least one (positive, negative) pair.
    pub used_episodes: usize,
}

/// `−ln σ(r⁺ − r⁻)`, evaluated as a softplus.
pub fn loss_ctr<T: Scalar>(r_pos: T, r_neg: T) -> T {
    let x = r_pos - r_neg;
    // ln(1 + e^{-x}) without overflow for large |x|
    if x >= T::zero() {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// Mean contrastive loss over `pairs` and the total variation of `trace`.
///
/// Pairs index into `trace` as `(positive, negative)`.
pub fn loss_rdy_parts<T: Scalar>(trace: &[T], pairs: &[(usize, usize)]) -> Result<(T, T)> {
    if pairs.is_empty() {
        return Err(invalid("readiness loss needs at least one pair"));
    }
    if pairs
        .iter()
        .any(|&(p, n)| p >= trace.len() || n >= trace.len())
    {
        return Err(invalid("pair index outside the trace"));
    }
    let ctr = pairs
        .iter()
        .map(|&(p, n)| loss_ctr(trace[p], trace[n]))
        .sum::<T>()
        / T::from_usize_lossy(pairs.len());
    let tv = trace.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<T>();
    Ok((ctr, tv))
}

/// `L_ctr + λ·Σ_t |R(t+1) − R(t)|`.
pub fn loss_rdy<T: Scalar>(trace: &[T], pairs: &[(usize, usize)], lambda_reg: T) -> Result<T> {
    if lambda_reg > T::zero() && trace.len() < 2 {
        return Err(invalid(
            "temporal coherence term needs a trace of length >= 2",
        ));
    }
    let (ctr, tv) = loss_rdy_parts(trace, pairs)?;
    Ok(ctr + lambda_reg * tv)
}

/// Uniformly samples `n` (positive, negative) index pairs from the labeled
/// steps of an episode; empty when either side has no steps.
pub fn sample_pairs<T: Scalar>(
    episode: &TrainingEpisode<T>,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    let pos: Vec<usize> = (0..episode.times.len())
        .filter(|&i| episode.labels.is_positive(episode.times[i]))
        .collect();
    let neg: Vec<usize> = (0..episode.times.len())
        .filter(|&i| episode.labels.is_negative(episode.times[i]))
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Vec::new();
    }
    (0..n)
        .map(|_| {
            (
                pos[rng.random_range(0..pos.len())],
                neg[rng.random_range(0..neg.len())],
            )
        })
        .collect()
}

/// Objective averaged over episodes, as `(L_ctr, TV, total, ∂total/∂θ)`.
pub fn objective_and_gradient<T: Scalar>(
    model: &ReadinessModel<T>,
    episodes: &[(&TrainingEpisode<T>, Vec<(usize, usize)>)],
    lambda_reg: T,
) -> Result<(T, T, T, Vec<T>)> {
    if episodes.is_empty() {
        return Err(invalid("no episodes to evaluate"));
    }
    let mut grad = vec![T::zero(); model.param_count()];
    let (mut ctr_sum, mut tv_sum) = (T::zero(), T::zero());
    let inv_e = T::one() / T::from_usize_lossy(episodes.len());
    for (ep, pairs) in episodes {
        let fwd: Vec<_> = ep.trajectory.iter().map(|z| model.forward(z)).collect();
        let trace: Vec<T> = fwd.iter().map(|f| f.score).collect();
        let (ctr, tv) = loss_rdy_parts(&trace, pairs)?;
        ctr_sum = ctr_sum + ctr;
        tv_sum = tv_sum + tv;

        let mut upstream = vec![T::zero(); trace.len()];
        let inv_p = T::one() / T::from_usize_lossy(pairs.len());
        for &(p, n) in pairs {
            // d/dx softplus(−x) = −σ(−x)
            let g = -crate::vecmath::logistic(trace[n] - trace[p]) * inv_p;
            upstream[p] = upstream[p] + g;
            upstream[n] = upstream[n] - g;
        }
        if lambda_reg > T::zero() {
            for t in 0..trace.len().saturating_sub(1) {
                let diff = trace[t + 1] - trace[t];
                let s = if diff > T::zero() {
                    T::one()
                } else if diff < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                };
                upstream[t + 1] = upstream[t + 1] + lambda_reg * s;
                upstream[t] = upstream[t] - lambda_reg * s;
            }
        }
        for (f, &u) in fwd.iter().zip(&upstream) {
            if u != T::zero() {
                model.backward(f, u * inv_e, &mut grad);
            }
        }
    }
    let ctr = ctr_sum * inv_e;
    let tv = tv_sum * inv_e;
    Ok((ctr, tv, ctr + lambda_reg * tv, grad))
}

/// Plain gradient descent on the readiness loss. Only the readiness state and
/// head are touched; the trajectories come from a frozen reasoner.
pub fn train_readiness<T: Scalar>(
    episodes: &[TrainingEpisode<T>],
    model: &ReadinessModel<T>,
    cfg: &ReadinessTrainConfig<T>,
) -> Result<TrainingOutcome<T>> {
    cfg.validate()?;
    if episodes.is_empty() {
        return Err(invalid("no training episodes"));
    }
    for ep in episodes {
        if ep.times.len() != ep.trajectory.len() {
            return Err(invalid(format!(
                "episode {}: times and trajectory lengths differ",
                ep.question_id
            )));
        }
        if let Some(z) = ep.trajectory.iter().find(|z| z.len() != model.dim) {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                got: z.len(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let batch: Vec<_> = episodes
        .iter()
        .filter(|ep| !ep.labels.is_empty() && ep.trajectory.len() >= 2)
        .map(|ep| (ep, sample_pairs(ep, cfg.pairs_per_episode, &mut rng)))
        .filter(|(_, pairs)| !pairs.is_empty())
        .collect();
    if batch.is_empty() {
        return Err(Error::TrainingSkipped(
            "every episode has a degenerate label set".into(),
        ));
    }

    let mut model = model.clone();
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut params = model.to_flat();
    for epoch in 0..cfg.epochs {
        let (l_ctr, tv, total, grad) = objective_and_gradient(&model, &batch, cfg.lambda_reg)?;
        curve.push(LossPoint {
            epoch,
            l_ctr,
            tv,
            total,
        });
        for (p, g) in params.iter_mut().zip(&grad) {
            *p = *p - cfg.learning_rate * *g;
        }
        model.set_flat(&params)?;
    }
    Ok(TrainingOutcome {
        model,
        curve,
        used_episodes: batch.len(),
    })
}

/// CSV with columns `epoch,l_ctr,tv,total`.
pub fn write_loss_curve_csv<T: Scalar>(path: &Path, curve: &[LossPoint<T>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in curve {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
