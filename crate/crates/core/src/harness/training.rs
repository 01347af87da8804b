//! Glue between simulated episodes and readiness training: frozen-reasoner
//! `z_l` trajectories and pseudo-labels mined from the final memory.

use super::pipeline::{check_dimensions, frame_time, record_queries, PipelineConfig};
use super::sim::Episode;
use crate::error::Result;
use crate::memory::{MemoryTree, TimeSpan};
use crate::readiness::{
    build_pseudo_labels, temporal_iou, train_readiness, ReadinessModel, ReadinessTrainConfig,
    TrainingEpisode, TrainingOutcome,
};
use crate::reasoner::{reason, ProjectionPair};

/// One question's training data plus how well its labels match the planted window.
#[derive(Debug, Clone)]
pub struct LabeledQuestion {
    pub record_id: String,
    pub data: TrainingEpisode<f64>,
    /// Temporal IoU between the positive region and the true evidence window;
    /// `None` for unanswerable records.
    pub label_iou: Option<f64>,
}

/// Replays each episode through a fresh memory, recording `z_l` for every
/// question at every `readiness_stride`-th frame. Pseudo-labels come from the
/// end-of-stream memory and trajectories stop at the end of the positive region.
pub fn build_training_set(
    episodes: &[Episode],
    cfg: &PipelineConfig,
    proj: &ProjectionPair<f64>,
    train_cfg: &ReadinessTrainConfig<f64>,
) -> Result<Vec<LabeledQuestion>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for ep in episodes {
        check_dimensions(ep, proj)?;
        let queries = record_queries(ep)?;
        let mut tree = MemoryTree::new(cfg.memory.clone(), ep.dim())?;
        let mut times = Vec::new();
        let mut trajectories: Vec<Vec<Vec<f64>>> = vec![Vec::new(); queries.len()];
        for (fi, frame) in ep.frames.iter().enumerate() {
            let t = frame_time(ep, fi);
            tree.ingest_frame(frame.clone(), t)?;
            if fi % cfg.readiness_stride != 0 {
                continue;
            }
            times.push(t);
            for (traj, q) in trajectories.iter_mut().zip(&queries) {
                traj.push(reason(q, tree.levels(), proj, &cfg.retrieval)?.z_l.values);
            }
        }
        for ((record, q), traj) in ep.records.iter().zip(&queries).zip(trajectories) {
            let z_final = reason(q, tree.levels(), proj, &cfg.retrieval)?.z_l;
            let labels = build_pseudo_labels(&z_final, tree.levels(), train_cfg);
            let cut = labels
                .positive_end()
                .map_or(0, |end| times.partition_point(|&t| t <= end));
            let label_iou = (!record.window.is_sentinel()).then(|| {
                temporal_iou(
                    &labels.positive,
                    &[TimeSpan {
                        earliest: record.window.t_s,
                        latest: record.window.t_e,
                    }],
                )
            });
            out.push(LabeledQuestion {
                record_id: record.id(),
                data: TrainingEpisode {
                    question_id: record.id(),
                    times: times[..cut].to_vec(),
                    trajectory: traj[..cut].to_vec(),
                    labels,
                },
                label_iou,
            });
        }
    }
    Ok(out)
}

/// Builds the training set and fits a freshly initialized readiness model.
pub fn train_on_episodes(
    episodes: &[Episode],
    cfg: &PipelineConfig,
    proj: &ProjectionPair<f64>,
    train_cfg: &ReadinessTrainConfig<f64>,
) -> Result<(TrainingOutcome<f64>, Vec<LabeledQuestion>)> {
    let set = build_training_set(episodes, cfg, proj, train_cfg)?;
    let dim = episodes.first().map_or(proj.dim, |e| e.dim());
    let init = ReadinessModel::new(dim, train_cfg.hidden, train_cfg.seed)?;
    let data: Vec<TrainingEpisode<f64>> = set.iter().map(|q| q.data.clone()).collect();
    let outcome = train_readiness(&data, &init, train_cfg)?;
    Ok((outcome, set))
}
