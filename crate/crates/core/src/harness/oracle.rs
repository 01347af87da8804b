//! Brute-force reference implementations used to cross-check the engine.
//! They refuse instances larger than [`ORACLE_MAX_ITEMS`].

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ars::{ArsConfig, ArsQuestion, TauTable, TimedAnswer};
use crate::error::{Error, Result};
use crate::memory::MemoryTreeSnapshot;
use crate::reasoner::ProjectionPair;

pub const ORACLE_MAX_ITEMS: usize = 1000;
pub const KMEANS_RESTARTS: usize = 50;

fn cap(n: usize) -> Result<()> {
    if n > ORACLE_MAX_ITEMS {
        return Err(Error::OracleRefused(format!(
            "{n} items exceeds the limit of {ORACLE_MAX_ITEMS}"
        )));
    }
    Ok(())
}

fn matvec(m: &[f64], d: usize, v: &[f64]) -> Vec<f64> {
    (0..d)
        .map(|r| (0..d).map(|c| m[r * d + c] * v[c]).sum())
        .collect()
}

fn inner(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Full sort of every score, highest first, lower index first on ties.
fn ranked(scores: Vec<(usize, f64)>, n: usize) -> Vec<usize> {
    let mut s = scores;
    s.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    s.into_iter().take(n).map(|(i, _)| i).collect()
}

/// Prototype ids and centroid ids by exhaustive scoring.
pub fn oracle_retrieval(
    q: &[f64],
    snapshot: &MemoryTreeSnapshot<f64>,
    proj: &ProjectionPair<f64>,
    k: usize,
    m: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    cap(snapshot.centroids.len() + snapshot.prototypes.len())?;
    let d = q.len();
    let pq = matvec(&proj.prototype_proj, d, q);
    let cq = matvec(&proj.centroid_proj, d, q);
    if snapshot.prototypes.is_empty() {
        let all = snapshot
            .centroids
            .iter()
            .enumerate()
            .map(|(j, c)| (j, inner(&cq, &c.vector.values)))
            .collect();
        return Ok((Vec::new(), ranked(all, m)));
    }
    let protos = ranked(
        snapshot
            .prototypes
            .iter()
            .enumerate()
            .map(|(u, p)| (u, inner(&pq, &p.vector.values)))
            .collect(),
        k,
    );
    let pool = snapshot
        .centroids
        .iter()
        .enumerate()
        .filter(|(j, _)| {
            protos
                .iter()
                .any(|&u| snapshot.prototypes[u].member_ids.contains(j))
        })
        .map(|(j, c)| (j, inner(&cq, &c.vector.values)))
        .collect();
    Ok((protos, ranked(pool, m)))
}

#[derive(Debug, Clone)]
pub struct OracleClustering {
    pub centroids: Vec<Vec<f64>>,
    pub objective: f64,
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best of [`KMEANS_RESTARTS`] Lloyd runs from uniformly random distinct seeds.
pub fn oracle_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<OracleClustering> {
    cap(points.len())?;
    if k == 0 || points.is_empty() {
        return Err(Error::InvalidArgument(
            "oracle k-means needs k >= 1 and points".into(),
        ));
    }
    let k = k.min(points.len());
    let d = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<OracleClustering> = None;
    for _ in 0..KMEANS_RESTARTS {
        let mut centers: Vec<Vec<f64>> = sample(&mut rng, points.len(), k)
            .into_iter()
            .map(|i| points[i].clone())
            .collect();
        let mut assign = vec![usize::MAX; points.len()];
        for _ in 0..200 {
            let next: Vec<usize> = points
                .iter()
                .map(|p| {
                    (0..k)
                        .min_by(|&a, &b| sq(p, &centers[a]).total_cmp(&sq(p, &centers[b])))
                        .unwrap()
                })
                .collect();
            if next == assign {
                break;
            }
            assign = next;
            for (c, center) in centers.iter_mut().enumerate() {
                let members: Vec<&Vec<f64>> = points
                    .iter()
                    .zip(&assign)
                    .filter(|(_, &a)| a == c)
                    .map(|(p, _)| p)
                    .collect();
                if !members.is_empty() {
                    *center = (0..d)
                        .map(|i| members.iter().map(|p| p[i]).sum::<f64>() / members.len() as f64)
                        .collect();
                }
            }
        }
        let objective = points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .map(|c| sq(p, c))
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(OracleClustering {
                centroids: centers,
                objective,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Straight-line hard-mode ARS: clamped formulas, chain means, then the mean
/// over chains. Unanswered questions score 0.
pub fn oracle_ars(
    answers: &[TimedAnswer<f64>],
    questions: &[ArsQuestion<f64>],
    tau: &TauTable<f64>,
    cfg: &ArsConfig<f64>,
) -> Result<f64> {
    cap(questions.len())?;
    if !cfg.smoothing.hard_mode {
        return Err(Error::OracleRefused(
            "the ARS oracle only evaluates hard mode".into(),
        ));
    }
    let mut chains: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for q in questions {
        let t_a = answers
            .iter()
            .find(|a| a.question_id == q.question_id)
            .and_then(|a| a.t_a);
        let tau_q = tau.for_question(q);
        let v = match t_a {
            None => 0.0,
            Some(t) => {
                let x = cfg.gamma_e * (t - q.window.t_s) / (tau_q + cfg.epsilon);
                let ep = f64::min(1.0, 2.0 / (1.0 + (-x).exp()));
                let lp = f64::min(
                    1.0,
                    f64::max(
                        0.0,
                        1.0 - cfg.gamma_l * (t - q.window.t_e) / (tau_q + cfg.epsilon),
                    ),
                );
                ep * lp
            }
        };
        let e = chains.entry(q.chain.as_str()).or_default();
        e.0 += v;
        e.1 += 1;
    }
    if chains.is_empty() {
        return Ok(0.0);
    }
    Ok(chains.values().map(|(s, n)| s / *n as f64).sum::<f64>() / chains.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ars::{ars_aggregate, EvidenceWindow};
    use crate::memory::{Centroid, MemoryConfig, MemoryTree, TimeSpan};
    use crate::reasoner::{select_centroids, select_prototypes, RetrievalConfig};
    use crate::vecmath::{kmeans, EmbeddingVector};

    #[test]
    fn single_item_retrieval_agrees_with_engine() {
        let c = Centroid {
            vector: EmbeddingVector::new(vec![0.3, 0.4]).unwrap(),
            weight: 1,
            time_mean: 0.0,
            time_span: TimeSpan::point(0.0),
            prototype_id: Some(0),
        };
        let tree = MemoryTree::from_parts(
            MemoryConfig::default(),
            2,
            vec![c],
            vec![EmbeddingVector::new(vec![1.0, 0.0]).unwrap()],
        )
        .unwrap();
        let q = EmbeddingVector::new(vec![0.0, 1.0]).unwrap();
        let proj = ProjectionPair::identity(2);
        let cfg = RetrievalConfig::default();
        let sel = select_prototypes(&q, tree.levels(), &proj, &cfg);
        let engine = (
            sel.ids.clone(),
            select_centroids(&q, tree.levels(), &sel.ids, &proj, &cfg),
        );
        assert_eq!(
            oracle_retrieval(&q.values, tree.levels(), &proj, 8, 24).unwrap(),
            engine
        );
        assert_eq!(engine, (vec![0], vec![0]));
    }

    #[test]
    fn two_blob_kmeans_agrees_with_engine() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![10.0, 0.0],
            vec![10.0, 1.0],
        ];
        let o = oracle_kmeans(&pts, 2, 0).unwrap();
        let e = kmeans(&pts, 2, 20, 0).unwrap();
        let mut a = o.centroids.clone();
        let mut b = e.centroids.clone();
        a.sort_by(|x, y| x[0].total_cmp(&y[0]));
        b.sort_by(|x, y| x[0].total_cmp(&y[0]));
        assert_eq!(a, b);
        assert_eq!(o.objective, 1.0);
    }

    #[test]
    fn handcrafted_log_matches_ars_module() {
        let q = |id: &str, t_s: f64, t_e: f64| ArsQuestion {
            question_id: id.into(),
            task: "SSR".into(),
            chain: id.into(),
            window: EvidenceWindow::new(t_s, t_e),
        };
        let qs = vec![q("a", 10.0, 20.0), q("b", 30.0, 32.0), q("c", 5.0, 9.0)];
        let log = vec![
            TimedAnswer {
                question_id: "a".into(),
                predicted_answer: String::new(),
                t_a: Some(8.0),
            },
            TimedAnswer {
                question_id: "b".into(),
                predicted_answer: String::new(),
                t_a: Some(34.5),
            },
            TimedAnswer {
                question_id: "c".into(),
                predicted_answer: String::new(),
                t_a: Some(7.0),
            },
        ];
        let tau = TauTable::from_questions(&qs, Default::default());
        let cfg = ArsConfig::default();
        let engine = ars_aggregate(&log, &qs, &tau, &cfg, false).unwrap().ars;
        assert!((oracle_ars(&log, &qs, &tau, &cfg).unwrap() - engine).abs() < 1e-9);
    }

    #[test]
    fn oversized_instances_are_refused() {
        let pts = vec![vec![0.0]; ORACLE_MAX_ITEMS + 1];
        assert!(matches!(
            oracle_kmeans(&pts, 2, 0),
            Err(Error::OracleRefused(_))
        ));
    }
}
