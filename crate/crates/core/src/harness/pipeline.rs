//! End-to-end streaming loop: ingest, reason, score readiness, answer.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::sim::Episode;
use crate::ars::TimedAnswer;
use crate::error::{Error, Result};
use crate::memory::{ContextBank, ContextEntry, MemoryConfig, MemoryTree, MemoryTreeSnapshot};
use crate::readiness::{readiness_score, ReadinessModel, ReadinessTrace, TriggerDecision};
use crate::reasoner::{fuse_context, reason, ProjectionPair, ReasoningState, RetrievalConfig};
use crate::vecmath::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextConfig {
    pub capacity: Option<usize>,
    /// Minimum question similarity for a past interaction to be fused.
    pub gate: f64,
    pub top_n: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        Self {
            capacity: Some(256),
            gate: 0.5,
            top_n: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub memory: MemoryConfig<f64>,
    pub retrieval: RetrievalConfig,
    pub context: ContextConfig,
    /// Readiness is scored every `readiness_stride` frames while a question waits.
    pub readiness_stride: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            memory: MemoryConfig::default(),
            retrieval: RetrievalConfig::default(),
            context: ContextConfig::default(),
            readiness_stride: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.memory.validate()?;
        self.retrieval.validate()?;
        if self.readiness_stride == 0
            || self.context.top_n == 0
            || !(-1.0..=1.0).contains(&self.context.gate)
        {
            return Err(Error::Config(
                "readiness_stride and context.top_n must be >= 1, context.gate in [-1, 1]".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Answer when the learned readiness score crosses the model threshold.
    Readiness(&'a ReadinessModel<f64>),
    /// Answer as soon as the question is asked.
    AnswerImmediately,
    /// Answer at the last frame of the stream.
    AnswerAtEnd,
    /// Answer the key exactly at evidence onset.
    OracleTiming,
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Readiness(_) => "readiness",
            Policy::AnswerImmediately => "answer_immediately",
            Policy::AnswerAtEnd => "answer_at_end",
            Policy::OracleTiming => "oracle_timing",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// One entry per record, in record order.
    pub answers: Vec<TimedAnswer<f64>>,
    /// Readiness traces (readiness policy only).
    pub traces: Vec<ReadinessTrace<f64>>,
}

/// Label of the scene that produced the best retrieved centroid, or an empty
/// string when nothing was retrieved.
pub fn toy_answer(
    state: &ReasoningState<f64>,
    snapshot: &MemoryTreeSnapshot<f64>,
    episode: &Episode,
) -> String {
    state
        .retrieved_centroid_ids
        .first()
        .and_then(|&j| episode.scene_at(snapshot.centroids[j].time_mean))
        .map(|s| s.label.clone())
        .unwrap_or_default()
}

pub(crate) fn check_dimensions(episode: &Episode, proj: &ProjectionPair<f64>) -> Result<()> {
    let d = episode.dim();
    let bad = |got: usize| {
        Error::Config(format!(
            "dimension mismatch: engine expects {d}, found {got}"
        ))
    };
    if proj.dim != d {
        return Err(bad(proj.dim));
    }
    if let Some(f) = episode.frames.iter().find(|f| f.dim() != d) {
        return Err(bad(f.dim()));
    }
    if let Some(q) = episode.queries.iter().find(|q| q.vector.len() != d) {
        return Err(bad(q.vector.len()));
    }
    Ok(())
}

pub(crate) fn record_queries(episode: &Episode) -> Result<Vec<EmbeddingVector<f64>>> {
    episode
        .records
        .iter()
        .map(|r| {
            let q = episode
                .query(&r.id())
                .ok_or_else(|| Error::Config(format!("no query vector for record {}", r.id())))?;
            EmbeddingVector::new(q.to_vec())
        })
        .collect()
}

pub(crate) fn frame_time(episode: &Episode, idx: usize) -> f64 {
    episode.frames[idx]
        .timestamp
        .unwrap_or(idx as f64 / episode.config.frame_rate)
}

struct Answerer<'a> {
    episode: &'a Episode,
    bank: ContextBank<f64>,
    ctx: &'a ContextConfig,
}

impl Answerer<'_> {
    fn answer(
        &mut self,
        idx: usize,
        q: &EmbeddingVector<f64>,
        state: &ReasoningState<f64>,
        snap: &MemoryTreeSnapshot<f64>,
        t_a: f64,
    ) -> Result<TimedAnswer<f64>> {
        let record = &self.episode.records[idx];
        let past = self.bank.lookup(q, self.ctx.gate, self.ctx.top_n)?;
        let a_i = fuse_context(&state.z_l, &past)?;
        self.bank.store(ContextEntry {
            question_embedding: q.clone(),
            answer_representation: a_i,
            turn_id: record.turn_id.clone(),
        })?;
        Ok(TimedAnswer {
            question_id: record.id(),
            predicted_answer: toy_answer(state, snap, self.episode),
            t_a: Some(t_a),
        })
    }
}

pub fn run_pipeline(
    episode: &Episode,
    cfg: &PipelineConfig,
    proj: &ProjectionPair<f64>,
    policy: Policy<'_>,
) -> Result<PipelineOutput> {
    cfg.validate()?;
    check_dimensions(episode, proj)?;
    if let Policy::Readiness(m) = policy {
        if m.dim != episode.dim() {
            return Err(Error::Config(format!(
                "readiness model dimension {} does not match stream dimension {}",
                m.dim,
                episode.dim()
            )));
        }
    }
    let records = &episode.records;
    let mut answers: Vec<Option<TimedAnswer<f64>>> = vec![None; records.len()];

    if let Policy::OracleTiming = policy {
        let answers = records
            .iter()
            .map(|r| TimedAnswer {
                question_id: r.id(),
                predicted_answer: r.answer_key.clone(),
                t_a: Some(r.window.t_s),
            })
            .collect();
        return Ok(PipelineOutput {
            answers,
            traces: Vec::new(),
        });
    }

    let queries = record_queries(episode)?;
    let mut tree = MemoryTree::new(cfg.memory.clone(), episode.dim())?;
    let mut answerer = Answerer {
        episode,
        bank: ContextBank::new(cfg.context.capacity),
        ctx: &cfg.context,
    };
    let mut traces: Vec<ReadinessTrace<f64>> = records
        .iter()
        .map(|r| ReadinessTrace::new(r.id()))
        .collect();
    let mut pending_since: HashMap<usize, usize> = HashMap::new();

    for (fi, frame) in episode.frames.iter().enumerate() {
        let t = frame_time(episode, fi);
        tree.ingest_frame(frame.clone(), t)?;
        for (ri, r) in records.iter().enumerate() {
            if answers[ri].is_some() || r.question_time > t {
                continue;
            }
            let since = *pending_since.entry(ri).or_insert(fi);
            match policy {
                Policy::AnswerImmediately => {
                    let state = reason(&queries[ri], tree.levels(), proj, &cfg.retrieval)?;
                    answers[ri] = Some(answerer.answer(
                        ri,
                        &queries[ri],
                        &state,
                        tree.levels(),
                        r.question_time,
                    )?);
                }
                Policy::Readiness(model) if (fi - since).is_multiple_of(cfg.readiness_stride) => {
                    let state = reason(&queries[ri], tree.levels(), proj, &cfg.retrieval)?;
                    let score = readiness_score(model, &state.z_l)?;
                    if traces[ri].push(t, score, model.threshold) == TriggerDecision::AnswerNow {
                        answers[ri] =
                            Some(answerer.answer(ri, &queries[ri], &state, tree.levels(), t)?);
                    }
                }
                _ => {}
            }
        }
    }

    if let Policy::AnswerAtEnd = policy {
        let t_end = episode.end_time();
        for (ri, r) in records.iter().enumerate() {
            if r.question_time <= t_end && !episode.frames.is_empty() {
                let state = reason(&queries[ri], tree.levels(), proj, &cfg.retrieval)?;
                answers[ri] =
                    Some(answerer.answer(ri, &queries[ri], &state, tree.levels(), t_end)?);
            }
        }
    }

    let answers = answers
        .into_iter()
        .zip(records)
        .map(|(a, r)| {
            a.unwrap_or_else(|| TimedAnswer {
                question_id: r.id(),
                predicted_answer: String::new(),
                t_a: None,
            })
        })
        .collect();
    let traces = if matches!(policy, Policy::Readiness(_)) {
        traces
    } else {
        Vec::new()
    };
    Ok(PipelineOutput { answers, traces })
}
