use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::MemoryConfig;
use crate::scalar::Scalar;

/// Adaptive merge threshold and the statistics driving it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct AdaptiveThresholdState<T: Scalar> {
    pub tau_t: T,
    /// EMA of best-match similarities seen at eviction time.
    pub sim_ema: T,
    /// `true` where an eviction created a new centroid; oldest first.
    pub novelty_events: VecDeque<bool>,
}

impl<T: Scalar> AdaptiveThresholdState<T> {
    pub fn initial(cfg: &MemoryConfig<T>) -> Self {
        Self {
            tau_t: cfg.tau0,
            sim_ema: cfg.similarity_target,
            novelty_events: VecDeque::with_capacity(cfg.novelty_window),
        }
    }

    /// Fraction of new-centroid events over the full window length `W`.
    ///
    /// A partially filled window counts missing slots as non-events, so a
    /// handful of early creations cannot look like drift.
    pub fn novelty_rate(&self, window: usize) -> T {
        if window == 0 {
            return T::zero();
        }
        let hits = self.novelty_events.iter().filter(|&&e| e).count();
        T::from_usize_lossy(hits) / T::from_usize_lossy(window)
    }

    pub fn clear_novelty(&mut self) {
        self.novelty_events.clear();
    }
}

/// `clamp(tau0 + a·(sim_ema − s_target) − b·ν, tau_min, tau_max)`.
pub fn threshold_rule<T: Scalar>(sim_ema: T, novelty: T, cfg: &MemoryConfig<T>) -> T {
    let raw = cfg.tau0 + cfg.threshold_sim_gain * (sim_ema - cfg.similarity_target)
        - cfg.threshold_novelty_gain * novelty;
    raw.max(cfg.tau_min).min(cfg.tau_max)
}

/// Folds one eviction outcome into the threshold state and returns the new `τ_t`.
///
/// `best_sim` is `None` when there was nothing to compare against (empty
/// centroid level); the similarity EMA is then left alone.
pub fn update_threshold<T: Scalar>(
    state: &mut AdaptiveThresholdState<T>,
    best_sim: Option<T>,
    created_new: bool,
    cfg: &MemoryConfig<T>,
) -> T {
    if let Some(s) = best_sim {
        let d = cfg.sim_ema_decay;
        state.sim_ema = d * state.sim_ema + (T::one() - d) * s;
    }
    if cfg.novelty_window > 0 {
        if state.novelty_events.len() == cfg.novelty_window {
            state.novelty_events.pop_front();
        }
        state.novelty_events.push_back(created_new);
    }
    let nu = state.novelty_rate(cfg.novelty_window);
    state.tau_t = threshold_rule(state.sim_ema, nu, cfg);
    state.tau_t
}
