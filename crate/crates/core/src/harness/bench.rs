//! Per-step latency and live-memory benchmark over long synthetic streams.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::sim::{simulate_stream, SimConfig};
use crate::error::{invalid, Result};
use crate::memory::{MemoryConfig, MemoryTree};
use crate::reasoner::{reason, ProjectionPair, RetrievalConfig};
use crate::vecmath::EmbeddingVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sim: SimConfig,
    pub memory: MemoryConfig<f64>,
    pub retrieval: RetrievalConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        // noisy frames keep creating centroids, so the middle level stays full
        let sim = SimConfig {
            noise_sigma: 0.3,
            vocabulary: 24,
            ..SimConfig::default()
        };
        Self {
            sim,
            memory: MemoryConfig::default(),
            retrieval: RetrievalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub length: usize,
    pub p50_us: f64,
    pub p95_us: f64,
    pub peak_items: usize,
    /// Frame index at which the centroid level first filled up.
    pub warmup_frames: Option<usize>,
    /// Smallest and largest live item count after warmup.
    pub steady_items_min: Option<usize>,
    pub steady_items_max: Option<usize>,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank]
}

/// Times one ingest plus one query reasoning pass per frame. Stream
/// generation happens before the timed loop.
pub fn bench(lengths: &[usize], cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if lengths.is_empty() || lengths.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("bench lengths must be nonempty and ascending"));
    }
    let mut rows = Vec::with_capacity(lengths.len());
    for &length in lengths {
        let ep = simulate_stream(&SimConfig {
            stream_length: Some(length),
            questions_per_stream: 0,
            ..cfg.sim.clone()
        })?;
        let proj = ProjectionPair::identity(ep.dim());
        let query = EmbeddingVector::new(ep.scenes[0].latent.clone())?;
        let mut tree = MemoryTree::new(cfg.memory.clone(), ep.dim())?;
        let mut latencies = Vec::with_capacity(length);
        let (mut peak, mut warmup) = (0usize, None);
        let (mut lo, mut hi) = (usize::MAX, 0usize);
        for (i, frame) in ep.frames.into_iter().enumerate() {
            let t = frame.timestamp.unwrap_or(i as f64);
            let start = Instant::now();
            tree.ingest_frame(frame, t)?;
            let state = reason(&query, tree.levels(), &proj, &cfg.retrieval)?;
            latencies.push(start.elapsed().as_secs_f64() * 1e6);
            std::hint::black_box(&state);

            let items = tree.levels().item_count();
            peak = peak.max(items);
            if warmup.is_none() && tree.levels().centroids.len() == cfg.memory.centroid_capacity {
                warmup = Some(i);
            }
            if warmup.is_some() {
                lo = lo.min(items);
                hi = hi.max(items);
            }
        }
        latencies.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            length,
            p50_us: percentile(&latencies, 0.5),
            p95_us: percentile(&latencies, 0.95),
            peak_items: peak,
            warmup_frames: warmup,
            steady_items_min: warmup.map(|_| lo),
            steady_items_max: warmup.map(|_| hi),
        });
    }
    Ok(rows)
}

pub fn write_bench_csv(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_length_gives_one_bounded_row() {
        let rows = bench(&[1000], &BenchConfig::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].peak_items <= 24 + 96 + 12);
        assert!(rows[0].p50_us <= rows[0].p95_us);
        assert!(bench(&[10, 5], &BenchConfig::default()).is_err());
    }
}
