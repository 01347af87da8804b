//! Synthetic scene streams with planted evidence windows.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::pipeline::PipelineConfig;
use super::schema::{QARecord, Scope, Task};
use crate::ars::EvidenceWindow;
use crate::error::{Error, Result};
use crate::readiness::ReadinessTrainConfig;
use crate::vecmath::{dot, EmbeddingVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dim: usize,
    /// Frames per second.
    pub frame_rate: f64,
    pub scene_count: usize,
    /// Inclusive range of frames per scene.
    pub scene_length: [usize; 2],
    /// When set, scenes are generated until the stream reaches this many
    /// frames and the last one is cut; `scene_count` is then ignored.
    pub stream_length: Option<usize>,
    pub noise_sigma: f64,
    pub questions_per_stream: usize,
    /// Inclusive range, in seconds, between a question and its evidence onset.
    pub evidence_lead: [f64; 2],
    /// Number of distinct scene concepts.
    pub vocabulary: usize,
    /// Cosine between a query and its evidence concept; the rest of the
    /// query lies along a shared question direction.
    pub query_alignment: f64,
    /// Weight of the cue direction mixed into evidence scene latents
    /// (`latent = normalize(concept + cue_strength · cue)`); 0 disables it.
    pub cue_strength: f64,
    /// Chance that a question depends on the previous turn.
    pub followup_rate: f64,
    /// Seeds the concept vectors and the shared query offset, so episodes
    /// with different `seed`s still draw from one vocabulary.
    pub vocabulary_seed: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            frame_rate: 1.0,
            scene_count: 8,
            scene_length: [40, 60],
            stream_length: None,
            noise_sigma: 0.05,
            questions_per_stream: 3,
            evidence_lead: [20.0, 60.0],
            vocabulary: 12,
            query_alignment: 0.95,
            cue_strength: 0.5,
            followup_rate: 0.0,
            vocabulary_seed: 0,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("sim: {m}")));
        if self.dim == 0 || self.scene_count == 0 || self.vocabulary < 2 {
            return fail("dim and scene_count must be positive and vocabulary at least 2");
        }
        if self.vocabulary + 2 > self.dim {
            return fail("vocabulary + 2 must not exceed dim");
        }
        if self.scene_length[0] == 0 || self.scene_length[0] > self.scene_length[1] {
            return fail("scene_length must be an ordered range of positive lengths");
        }
        if self.stream_length == Some(0) {
            return fail("stream_length must be positive");
        }
        if !(self.frame_rate > 0.0) || !(self.noise_sigma >= 0.0) || !(self.cue_strength >= 0.0) {
            return fail("frame_rate must be positive, noise_sigma and cue_strength nonnegative");
        }
        if !(self.evidence_lead[0] >= 0.0 && self.evidence_lead[0] <= self.evidence_lead[1]) {
            return fail("evidence_lead must be an ordered, nonnegative range");
        }
        if !(self.query_alignment > 0.0 && self.query_alignment <= 1.0)
            || !(0.0..=1.0).contains(&self.followup_rate)
        {
            return fail("query_alignment must lie in (0, 1] and followup_rate in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub label: String,
    pub concept: usize,
    pub latent: Vec<f64>,
    /// Time of the first frame.
    pub start: f64,
    /// Time of the last frame.
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryVector {
    pub record_id: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub video_id: String,
    pub config: SimConfig,
    /// Timestamped frame embeddings in stream order.
    pub frames: Vec<EmbeddingVector<f64>>,
    pub scenes: Vec<Scene>,
    pub records: Vec<QARecord>,
    pub queries: Vec<QueryVector>,
}

impl Episode {
    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn query(&self, record_id: &str) -> Option<&[f64]> {
        self.queries
            .iter()
            .find(|q| q.record_id == record_id)
            .map(|q| q.vector.as_slice())
    }

    pub fn end_time(&self) -> f64 {
        self.frames.last().and_then(|f| f.timestamp).unwrap_or(0.0)
    }

    /// The scene covering `t`, or the nearest one when `t` falls in no span.
    pub fn scene_at(&self, t: f64) -> Option<&Scene> {
        self.scenes
            .iter()
            .find(|s| s.start <= t && t <= s.end)
            .or_else(|| {
                self.scenes.iter().min_by(|a, b| {
                    let da = (a.start - t).abs().min((a.end - t).abs());
                    let db = (b.start - t).abs().min((b.end - t).abs());
                    da.total_cmp(&db)
                })
            })
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `n` orthonormal vectors in `dim` dimensions (Gram-Schmidt on Gaussian draws).
fn orthonormal_basis(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v: Vec<f64> = (0..dim).map(|_| gauss(rng)).collect();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-6 {
            basis.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    basis
}

fn concept_label(concept: usize) -> String {
    format!("concept-{concept:02}")
}

/// Generates one episode. The same config always yields the same episode.
pub fn simulate_stream(cfg: &SimConfig) -> Result<Episode> {
    cfg.validate()?;
    let mut basis = orthonormal_basis(
        cfg.vocabulary + 2,
        cfg.dim,
        &mut ChaCha8Rng::seed_from_u64(cfg.vocabulary_seed),
    );
    let cue = basis.pop().expect("basis has vocabulary + 2 vectors");
    let question_dir = basis.pop().expect("basis has vocabulary + 1 vectors");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // scene concepts: a shuffled vocabulary, then draws that avoid the previous concept
    let mut concepts: Vec<usize> = (0..cfg.vocabulary).collect();
    concepts.shuffle(&mut rng);
    let mut lengths = Vec::new();
    let mut scene_concepts = Vec::new();
    let mut total = 0usize;
    loop {
        let done = match cfg.stream_length {
            Some(n) => total >= n,
            None => scene_concepts.len() >= cfg.scene_count,
        };
        if done {
            break;
        }
        let concept = if scene_concepts.len() < concepts.len() {
            concepts[scene_concepts.len()]
        } else {
            let prev = *scene_concepts.last().unwrap();
            let c = rng.random_range(0..cfg.vocabulary - 1);
            if c >= prev {
                c + 1
            } else {
                c
            }
        };
        let mut len = rng.random_range(cfg.scene_length[0]..=cfg.scene_length[1]);
        if let Some(n) = cfg.stream_length {
            len = len.min(n - total);
        }
        scene_concepts.push(concept);
        lengths.push(len);
        total += len;
    }
    let starts: Vec<usize> = lengths
        .iter()
        .scan(0, |acc, &l| {
            let s = *acc;
            *acc += l;
            Some(s)
        })
        .collect();
    let start_time = |s: usize| starts[s] as f64 / cfg.frame_rate;

    // evidence scenes: not the last scene, concept seen nowhere else, room for the lead
    let mut eligible: Vec<usize> = (0..lengths.len().saturating_sub(1))
        .filter(|&s| {
            scene_concepts
                .iter()
                .filter(|&&c| c == scene_concepts[s])
                .count()
                == 1
        })
        .filter(|&s| start_time(s) >= cfg.evidence_lead[0])
        .collect();
    eligible.shuffle(&mut rng);
    eligible.truncate(cfg.questions_per_stream);

    let mut frames = Vec::with_capacity(total);
    let mut scenes = Vec::with_capacity(lengths.len());
    for (s, (&concept, &len)) in scene_concepts.iter().zip(&lengths).enumerate() {
        let mut latent = basis[concept].clone();
        if eligible.contains(&s) && cfg.cue_strength > 0.0 {
            latent
                .iter_mut()
                .zip(&cue)
                .for_each(|(x, &u)| *x += cfg.cue_strength * u);
            let norm = dot(&latent, &latent).sqrt();
            latent.iter_mut().for_each(|x| *x /= norm);
        }
        for i in 0..len {
            let idx = starts[s] + i;
            let values: Vec<f64> = latent
                .iter()
                .map(|&x| x + cfg.noise_sigma * gauss(&mut rng))
                .collect();
            frames.push(EmbeddingVector::new(values)?.with_timestamp(idx as f64 / cfg.frame_rate));
        }
        let end = (starts[s] + len - 1) as f64 / cfg.frame_rate;
        scenes.push(Scene {
            label: concept_label(concept),
            concept,
            latent,
            start: start_time(s),
            end,
        });
    }

    let mut planned: Vec<(f64, usize)> = eligible
        .into_iter()
        .map(|s| {
            let lead = rng
                .random_range(cfg.evidence_lead[0]..=cfg.evidence_lead[1])
                .round();
            ((scenes[s].start - lead).max(0.0), s)
        })
        .collect();
    planned.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let a = cfg.query_alignment;
    let b = (1.0 - a * a).sqrt();
    let video_id = format!("sim-{}", cfg.seed);
    let mut records = Vec::with_capacity(planned.len());
    let mut queries = Vec::with_capacity(planned.len());
    for (i, (question_time, s)) in planned.into_iter().enumerate() {
        let scene = &scenes[s];
        let turn_id = format!("{}", i + 1);
        let depends_on = if i > 0 && rng.random_bool(cfg.followup_rate) {
            vec![format!("{i}")]
        } else {
            vec![]
        };
        let record = QARecord {
            video_id: video_id.clone(),
            turn_id,
            task: Task::ALL[i % Task::ALL.len()],
            question: format!(
                "Which concept is shown once the cue for probe {} appears?",
                i + 1
            ),
            question_time,
            options: None,
            answer_key: scene.label.clone(),
            window: EvidenceWindow::new(scene.start, scene.end),
            depends_on,
            scope: Scope::Local,
        };
        let vector = basis[scene.concept]
            .iter()
            .zip(&question_dir)
            .map(|(&e, &u)| a * e + b * u)
            .collect();
        queries.push(QueryVector {
            record_id: record.id(),
            vector,
        });
        records.push(record);
    }
    Ok(Episode {
        video_id,
        config: cfg.clone(),
        frames,
        scenes,
        records,
        queries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Eval,
}

/// One difficulty tier: a base config, fixed episode seeds, and the pipeline
/// and training settings its experiments run with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteTier {
    pub name: String,
    pub sim: SimConfig,
    pub train_seeds: Vec<u64>,
    pub eval_seeds: Vec<u64>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub train: ReadinessTrainConfig<f64>,
}

impl SuiteTier {
    pub fn seeds(&self, split: Split) -> &[u64] {
        match split {
            Split::Train => &self.train_seeds,
            Split::Eval => &self.eval_seeds,
        }
    }

    pub fn episodes(&self, split: Split) -> Result<Vec<Episode>> {
        self.seeds(split)
            .iter()
            .map(|&seed| {
                simulate_stream(&SimConfig {
                    seed,
                    ..self.sim.clone()
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub version: u32,
    pub tiers: Vec<SuiteTier>,
}

impl SuiteManifest {
    /// The easy, medium and hard tiers shipped with the engine.
    pub fn bundled() -> Self {
        // one question per stream: the cue of an answered question stays in memory
        let easy = SimConfig {
            questions_per_stream: 1,
            noise_sigma: 0.01,
            scene_length: [80, 120],
            ..SimConfig::default()
        };
        let medium = SimConfig {
            scene_count: 10,
            scene_length: [30, 60],
            noise_sigma: 0.1,
            questions_per_stream: 4,
            evidence_lead: [15.0, 75.0],
            vocabulary: 16,
            query_alignment: 0.9,
            cue_strength: 0.4,
            followup_rate: 0.2,
            ..SimConfig::default()
        };
        let hard = SimConfig {
            scene_count: 16,
            scene_length: [20, 60],
            noise_sigma: 0.15,
            questions_per_stream: 5,
            evidence_lead: [10.0, 90.0],
            vocabulary: 20,
            query_alignment: 0.8,
            cue_strength: 0.3,
            followup_rate: 0.3,
            ..SimConfig::default()
        };
        let tier = |name: &str, sim: SimConfig, base: u64| SuiteTier {
            name: name.into(),
            sim: SimConfig {
                vocabulary_seed: base,
                ..sim
            },
            train_seeds: (base..base + 20).collect(),
            eval_seeds: (base + 1000..base + 1020).collect(),
            // centroids follow the newest frame, so per-frame scoring mostly sees noise
            pipeline: PipelineConfig {
                readiness_stride: 10,
                ..PipelineConfig::default()
            },
            train: ReadinessTrainConfig {
                learning_rate: 0.5,
                ..ReadinessTrainConfig::default()
            },
        };
        Self {
            version: 1,
            tiers: vec![
                tier("easy", easy, 100),
                tier("medium", medium, 200),
                tier("hard", hard, 300),
            ],
        }
    }

    pub fn tier(&self, name: &str) -> Result<&SuiteTier> {
        self.tiers
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Config(format!("unknown suite tier {name:?}")))
    }
}
