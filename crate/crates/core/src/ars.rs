//! Answer Readiness Score: early and late timing penalties, per-question and
//! aggregate scores, effective accuracy and penalty-parameter sweeps.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, ValidationIssue};
use crate::scalar::Scalar;
use crate::vecmath::{logistic, smooth_max, smooth_min, SmoothingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauScope {
    #[default]
    Dataset,
    PerTask,
}

/// How questions without any answer enter the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnansweredPolicy {
    /// Scored 0.
    #[default]
    Zero,
    /// Left out of the timing score (accuracy still counts them as wrong).
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "", default, deny_unknown_fields)]
pub struct ArsConfig<T: Scalar> {
    pub gamma_e: T,
    pub gamma_l: T,
    pub epsilon: T,
    pub tau_scope: TauScope,
    pub smoothing: SmoothingConfig<T>,
    pub unanswered: UnansweredPolicy,
}

impl<T: Scalar> Default for ArsConfig<T> {
    fn default() -> Self {
        Self {
            gamma_e: T::lit(6.0),
            gamma_l: T::one(),
            epsilon: T::lit(1e-6),
            tau_scope: TauScope::Dataset,
            smoothing: SmoothingConfig::default(),
            unanswered: UnansweredPolicy::Zero,
        }
    }
}

impl<T: Scalar> ArsConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_e > T::zero() && self.gamma_l > T::zero() && self.epsilon > T::zero()) {
            return Err(Error::Config(
                "gamma_e, gamma_l and epsilon must be positive".into(),
            ));
        }
        if !self.smoothing.hard_mode && !(self.smoothing.beta > T::zero()) {
            return Err(Error::Config("smoothing.beta must be positive".into()));
        }
        Ok(())
    }

    pub fn mode_label(&self) -> String {
        if self.smoothing.hard_mode {
            "hard".into()
        } else {
            format!("smooth(beta={})", self.smoothing.beta)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EvidenceWindow<T: Scalar> {
    pub t_s: T,
    pub t_e: T,
}

impl<T: Scalar> EvidenceWindow<T> {
    pub fn new(t_s: T, t_e: T) -> Self {
        Self { t_s, t_e }
    }

    /// The unanswerable marker `t_s = t_e = 0`.
    pub fn is_sentinel(&self) -> bool {
        self.t_s == T::zero() && self.t_e == T::zero()
    }

    /// `t_e − t_s`, floored at zero for inverted (noisy) windows.
    pub fn duration(&self) -> T {
        (self.t_e - self.t_s).max(T::zero())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TimedAnswer<T: Scalar> {
    pub question_id: String,
    pub predicted_answer: String,
    /// `None` when the question was never answered.
    pub t_a: Option<T>,
}

/// What the metric needs to know about one question.
#[derive(Debug, Clone, PartialEq)]
pub struct ArsQuestion<T: Scalar> {
    pub question_id: String,
    pub task: String,
    /// Questions sharing a key form one multi-turn chain.
    pub chain: String,
    pub window: EvidenceWindow<T>,
}

/// Median of window durations; an even count averages the middle pair.
pub fn median_evidence_duration<T: Scalar>(windows: &[EvidenceWindow<T>]) -> Result<T> {
    if windows.is_empty() {
        return Err(invalid("median of an empty window list"));
    }
    let mut d: Vec<T> = windows.iter().map(|w| w.duration()).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = d.len();
    Ok(if n % 2 == 1 {
        d[n / 2]
    } else {
        (d[n / 2 - 1] + d[n / 2]) / T::lit(2.0)
    })
}

/// `τ` values used for scoring: one dataset-wide value and, under the
/// per-task scope, one per task tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct TauTable<T: Scalar> {
    pub scope: TauScope,
    pub dataset: T,
    pub per_task: BTreeMap<String, T>,
}

impl<T: Scalar> TauTable<T> {
    /// Medians over answerable windows only; a set with none gives `τ = 0`.
    pub fn from_questions(questions: &[ArsQuestion<T>], scope: TauScope) -> Self {
        let answerable = |qs: &mut dyn Iterator<Item = &ArsQuestion<T>>| -> T {
            let w: Vec<_> = qs
                .filter(|q| !q.window.is_sentinel())
                .map(|q| q.window)
                .collect();
            median_evidence_duration(&w).unwrap_or(T::zero())
        };
        let dataset = answerable(&mut questions.iter());
        let mut per_task = BTreeMap::new();
        if scope == TauScope::PerTask {
            let tasks: std::collections::BTreeSet<&str> =
                questions.iter().map(|q| q.task.as_str()).collect();
            for task in tasks {
                per_task.insert(
                    task.to_string(),
                    answerable(&mut questions.iter().filter(|q| q.task == task)),
                );
            }
        }
        Self {
            scope,
            dataset,
            per_task,
        }
    }

    pub fn fixed(tau: T) -> Self {
        Self {
            scope: TauScope::Dataset,
            dataset: tau,
            per_task: BTreeMap::new(),
        }
    }

    /// `τ` for a question; the unanswerable sentinel always uses 0.
    pub fn for_question(&self, q: &ArsQuestion<T>) -> T {
        if q.window.is_sentinel() {
            return T::zero();
        }
        match self.scope {
            TauScope::Dataset => self.dataset,
            TauScope::PerTask => self.per_task.get(&q.task).copied().unwrap_or(self.dataset),
        }
    }
}

fn unit_clamp<T: Scalar>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// `min(1, 2σ(γ_e(t_a − t_s)/(τ + ε)))`, smoothed unless in hard mode.
pub fn early_penalty<T: Scalar>(t_a: T, t_s: T, tau: T, cfg: &ArsConfig<T>) -> T {
    let x = T::lit(2.0) * logistic(cfg.gamma_e * (t_a - t_s) / (tau + cfg.epsilon));
    unit_clamp(smooth_min(T::one(), x, &cfg.smoothing))
}

/// `min(1, max(0, 1 − γ_ℓ(t_a − t_e)/(τ + ε)))`, smoothed unless in hard mode.
pub fn late_penalty<T: Scalar>(t_a: T, t_e: T, tau: T, cfg: &ArsConfig<T>) -> T {
    let inner = T::one() - cfg.gamma_l * (t_a - t_e) / (tau + cfg.epsilon);
    unit_clamp(smooth_min(
        T::one(),
        smooth_max(T::zero(), inner, &cfg.smoothing),
        &cfg.smoothing,
    ))
}

/// `EP · LP` for an answered question, 0 otherwise.
pub fn ars_single<T: Scalar>(
    t_a: Option<T>,
    window: &EvidenceWindow<T>,
    tau: T,
    cfg: &ArsConfig<T>,
) -> T {
    match t_a {
        Some(t) => early_penalty(t, window.t_s, tau, cfg) * late_penalty(t, window.t_e, tau, cfg),
        None => T::zero(),
    }
}

pub fn effective_accuracy<T: Scalar>(acc: T, ars: T) -> Result<T> {
    let unit = |x: T| x >= T::zero() && x <= T::one();
    if !unit(acc) || !unit(ars) {
        return Err(invalid("accuracy and ARS must lie in [0, 1]"));
    }
    Ok(acc * ars)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct QuestionScore<T: Scalar> {
    pub question_id: String,
    pub task: String,
    pub answered: bool,
    pub ars: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct ArsSummary<T: Scalar> {
    /// Mean over chains (a single-turn question is its own chain).
    pub ars: T,
    /// Chain means grouped by the task of the chain's first question.
    pub per_task: BTreeMap<String, T>,
    pub per_question: Vec<QuestionScore<T>>,
    pub tau: TauTable<T>,
    pub chains: usize,
    /// Answer ids with no matching question (only when excluded by flag).
    pub unmatched: Vec<String>,
}

/// Matches answers to questions, reporting unknown or repeated ids.
fn index_answers<'a, T: Scalar>(
    answers: &'a [TimedAnswer<T>],
    questions: &[ArsQuestion<T>],
    allow_unmatched: bool,
) -> Result<(HashMap<&'a str, &'a TimedAnswer<T>>, Vec<String>)> {
    let known: HashMap<&str, ()> = questions
        .iter()
        .map(|q| (q.question_id.as_str(), ()))
        .collect();
    let mut by_id = HashMap::new();
    let mut issues = Vec::new();
    let mut unmatched = Vec::new();
    for a in answers {
        if !known.contains_key(a.question_id.as_str()) {
            if allow_unmatched {
                unmatched.push(a.question_id.clone());
            } else {
                issues.push(ValidationIssue {
                    line: None,
                    field: "question_id".into(),
                    message: format!("answer for unknown question {:?}", a.question_id),
                });
            }
            continue;
        }
        if by_id.insert(a.question_id.as_str(), a).is_some() {
            issues.push(ValidationIssue {
                line: None,
                field: "question_id".into(),
                message: format!("more than one answer for {:?}", a.question_id),
            });
        }
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    Ok((by_id, unmatched))
}

/// Scores a full answer log against its questions.
pub fn ars_aggregate<T: Scalar>(
    answers: &[TimedAnswer<T>],
    questions: &[ArsQuestion<T>],
    tau: &TauTable<T>,
    cfg: &ArsConfig<T>,
    allow_unmatched: bool,
) -> Result<ArsSummary<T>> {
    cfg.validate()?;
    let (by_id, unmatched) = index_answers(answers, questions, allow_unmatched)?;

    let mut per_question = Vec::with_capacity(questions.len());
    // chain key → (task of first question, member values), in first-seen order
    let mut chains: Vec<(String, Vec<T>)> = Vec::new();
    let mut chain_index: HashMap<&str, usize> = HashMap::new();
    for q in questions {
        let t_a = by_id.get(q.question_id.as_str()).and_then(|a| a.t_a);
        let value = ars_single(t_a, &q.window, tau.for_question(q), cfg);
        per_question.push(QuestionScore {
            question_id: q.question_id.clone(),
            task: q.task.clone(),
            answered: t_a.is_some(),
            ars: value,
        });
        if t_a.is_none() && cfg.unanswered == UnansweredPolicy::Exclude {
            continue;
        }
        let idx = *chain_index.entry(q.chain.as_str()).or_insert_with(|| {
            chains.push((q.task.clone(), Vec::new()));
            chains.len() - 1
        });
        chains[idx].1.push(value);
    }

    let mean = |xs: &[T]| xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len());
    let chain_values: Vec<(String, T)> = chains
        .iter()
        .map(|(task, v)| (task.clone(), mean(v)))
        .collect();
    let ars = if chain_values.is_empty() {
        T::zero()
    } else {
        mean(&chain_values.iter().map(|c| c.1).collect::<Vec<_>>())
    };
    let mut grouped: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for (task, v) in &chain_values {
        grouped.entry(task.clone()).or_default().push(*v);
    }
    let per_task = grouped.into_iter().map(|(k, v)| (k, mean(&v))).collect();
    Ok(ArsSummary {
        ars,
        per_task,
        per_question,
        tau: tau.clone(),
        chains: chain_values.len(),
        unmatched,
    })
}

/// ARS over a `γ_e × γ_ℓ` grid; `values[i][j]` pairs `gamma_e[i]` with `gamma_l[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct SweepGrid<T: Scalar> {
    pub gamma_e: Vec<T>,
    pub gamma_l: Vec<T>,
    pub values: Vec<Vec<T>>,
}

pub fn penalty_sweep<T: Scalar>(
    answers: &[TimedAnswer<T>],
    questions: &[ArsQuestion<T>],
    tau: &TauTable<T>,
    gamma_e_grid: &[T],
    gamma_l_grid: &[T],
    cfg: &ArsConfig<T>,
) -> Result<SweepGrid<T>> {
    if gamma_e_grid.is_empty() || gamma_l_grid.is_empty() {
        return Err(invalid("sweep grids must be nonempty"));
    }
    let mut values = Vec::with_capacity(gamma_e_grid.len());
    for &ge in gamma_e_grid {
        let mut row = Vec::with_capacity(gamma_l_grid.len());
        for &gl in gamma_l_grid {
            let c = ArsConfig {
                gamma_e: ge,
                gamma_l: gl,
                ..cfg.clone()
            };
            row.push(ars_aggregate(answers, questions, tau, &c, true)?.ars);
        }
        values.push(row);
    }
    Ok(SweepGrid {
        gamma_e: gamma_e_grid.to_vec(),
        gamma_l: gamma_l_grid.to_vec(),
        values,
    })
}

impl<T: Scalar> SweepGrid<T> {
    /// CSV rows `gamma_e,gamma_l,ars`, `γ_e`-major.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["gamma_e", "gamma_l", "ars"])?;
        for (ge, row) in self.gamma_e.iter().zip(&self.values) {
            for (gl, v) in self.gamma_l.iter().zip(row) {
                w.write_record([ge.to_string(), gl.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Heatmap with `γ_ℓ` across and `γ_e` down; `highlight` outlines one cell.
    pub fn to_svg(&self, highlight: Option<(usize, usize)>) -> String {
        let cell = 48;
        let (left, top) = (70, 40);
        let width = left + cell * self.gamma_l.len() + 20;
        let height = top + cell * self.gamma_e.len() + 30;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{left}" y="15">ARS by gamma_l (columns) and gamma_e (rows)</text>"#
        );
        for (j, gl) in self.gamma_l.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{gl}</text>"#,
                left + j * cell + cell / 2,
                top - 6
            );
        }
        for (i, (ge, row)) in self.gamma_e.iter().zip(&self.values).enumerate() {
            let y = top + i * cell;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="end">{ge}</text>"#,
                left - 6,
                y + cell / 2 + 4
            );
            for (j, v) in row.iter().enumerate() {
                let x = left + j * cell;
                let shade = (255.0 * (1.0 - unit_clamp(*v).to_f64_lossy())).round() as u8;
                let stroke = if highlight == Some((i, j)) {
                    r#" stroke="red" stroke-width="3""#
                } else {
                    ""
                };
                let _ = writeln!(
                    s,
                    r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)"{stroke}/>"#
                );
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{}" text-anchor="middle">{:.3}</text>"#,
                    x + cell / 2,
                    y + cell / 2 + 4,
                    v.to_f64_lossy()
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg() -> ArsConfig<f64> {
        ArsConfig::default()
    }

    fn q(id: &str, task: &str, chain: &str, t_s: f64, t_e: f64) -> ArsQuestion<f64> {
        ArsQuestion {
            question_id: id.into(),
            task: task.into(),
            chain: chain.into(),
            window: EvidenceWindow::new(t_s, t_e),
        }
    }

    fn ans(id: &str, t_a: Option<f64>) -> TimedAnswer<f64> {
        TimedAnswer {
            question_id: id.into(),
            predicted_answer: "x".into(),
            t_a,
        }
    }

    /// Independent evaluation of the clamped formulas.
    fn oracle(t_a: f64, t_s: f64, t_e: f64, tau: f64, ge: f64, gl: f64) -> f64 {
        let ep = (2.0 / (1.0 + (-(ge * (t_a - t_s) / (tau + 1e-6))).exp())).min(1.0);
        let lp = (1.0 - gl * (t_a - t_e) / (tau + 1e-6)).clamp(0.0, 1.0);
        ep * lp
    }

    #[test]
    fn median_examples() {
        let w = |d: &[f64]| {
            d.iter()
                .map(|&x| EvidenceWindow::new(0.0, x))
                .collect::<Vec<_>>()
        };
        assert_eq!(median_evidence_duration(&w(&[1.0, 2.0, 9.0])).unwrap(), 2.0);
        assert_eq!(median_evidence_duration(&w(&[1.0, 3.0])).unwrap(), 2.0);
        assert_eq!(median_evidence_duration(&w(&[0.0, 0.0])).unwrap(), 0.0);
        assert!(median_evidence_duration::<f64>(&[]).is_err());
    }

    #[test]
    fn penalty_examples() {
        let c = cfg();
        let tau = 10.0;
        assert_eq!(early_penalty(5.0, 5.0, tau, &c), 1.0);
        // 2σ(−6) with τ+ε in the denominator
        let want = 2.0 / (1.0 + (6.0 * tau / (tau + 1e-6)).exp());
        assert_abs_diff_eq!(
            early_penalty(5.0 - tau, 5.0, tau, &c),
            want,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            early_penalty(5.0 - tau, 5.0, tau, &c),
            0.0049451,
            epsilon = 1e-6
        );
        assert_eq!(early_penalty(50.0, 5.0, tau, &c), 1.0);

        assert_eq!(late_penalty(3.0, 8.0, tau, &c), 1.0);
        assert_abs_diff_eq!(
            late_penalty(8.0 + 0.5 * tau, 8.0, tau, &c),
            0.5,
            epsilon = 1e-6
        );
        assert_eq!(late_penalty(8.0 + 2.0 * tau, 8.0, tau, &c), 0.0);
    }

    #[test]
    fn single_examples() {
        let c = cfg();
        let w = EvidenceWindow::new(10.0, 20.0);
        assert_eq!(ars_single(Some(15.0), &w, 10.0, &c), 1.0);
        assert_eq!(ars_single(None, &w, 10.0, &c), 0.0);
        assert_abs_diff_eq!(
            ars_single(Some(0.0), &w, 10.0, &c),
            0.0049451,
            epsilon = 1e-6
        );
        // any real answer to an unanswerable question is worth nothing
        let sentinel = EvidenceWindow::new(0.0, 0.0);
        assert!(ars_single(Some(3.0), &sentinel, 0.0, &c) < 1e-9);
    }

    #[test]
    fn aggregate_examples() {
        let c = cfg();
        let tau = TauTable::fixed(10.0);
        let qs = vec![
            q("a", "SSR", "a", 10.0, 20.0),
            q("b", "REC", "b", 10.0, 20.0),
        ];
        let s = ars_aggregate(
            &[ans("a", Some(15.0)), ans("b", None)],
            &qs,
            &tau,
            &c,
            false,
        )
        .unwrap();
        assert_eq!(s.ars, 0.5);
        assert_eq!(s.per_task["SSR"], 1.0);
        assert_eq!(s.per_task["REC"], 0.0);

        // chain of three with values 1, 1, 0.4 (answer 0.6τ after the end)
        let qs = vec![
            q("r", "CRR", "r", 10.0, 20.0),
            q("s", "CTD", "r", 10.0, 20.0),
            q("t", "CTD", "r", 10.0, 20.0),
        ];
        let log = [
            ans("r", Some(12.0)),
            ans("s", Some(20.0)),
            ans("t", Some(26.0)),
        ];
        let s = ars_aggregate(&log, &qs, &tau, &c, false).unwrap();
        assert_abs_diff_eq!(s.ars, 0.8, epsilon = 1e-6);
        assert_eq!(s.chains, 1);
        assert!(s.per_task.contains_key("CRR") && !s.per_task.contains_key("CTD"));

        let excl = ArsConfig {
            unanswered: UnansweredPolicy::Exclude,
            ..cfg()
        };
        let qs = vec![
            q("a", "SSR", "a", 10.0, 20.0),
            q("b", "REC", "b", 10.0, 20.0),
        ];
        let s = ars_aggregate(&[ans("a", Some(15.0))], &qs, &tau, &excl, false).unwrap();
        assert_eq!(s.ars, 1.0);
    }

    #[test]
    fn unmatched_and_duplicate_answers() {
        let tau = TauTable::fixed(10.0);
        let qs = vec![q("a", "SSR", "a", 10.0, 20.0)];
        let err = ars_aggregate(&[ans("zzz", Some(1.0))], &qs, &tau, &cfg(), false).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        let ok = ars_aggregate(&[ans("zzz", Some(1.0))], &qs, &tau, &cfg(), true).unwrap();
        assert_eq!(ok.unmatched, vec!["zzz".to_string()]);
        let dup = ars_aggregate(
            &[ans("a", Some(1.0)), ans("a", Some(2.0))],
            &qs,
            &tau,
            &cfg(),
            true,
        );
        assert!(dup.is_err());
    }

    #[test]
    fn aggregate_matches_brute_force_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut qs = Vec::new();
        let mut log = Vec::new();
        for i in 0..100 {
            let t_s: f64 = rng.random_range(0.0..100.0);
            let t_e = t_s + rng.random_range(1.0..30.0);
            qs.push(q(&i.to_string(), "GSD", &i.to_string(), t_s, t_e));
            let t_a = rng.random_bool(0.9).then(|| rng.random_range(0.0..150.0));
            log.push(ans(&i.to_string(), t_a));
        }
        let tau = TauTable::from_questions(&qs, TauScope::Dataset);
        let mut durations: Vec<f64> = qs.iter().map(|q| q.window.t_e - q.window.t_s).collect();
        durations.sort_by(f64::total_cmp);
        let med = 0.5 * (durations[49] + durations[50]);
        assert_eq!(tau.dataset, med);
        let mut total = 0.0;
        for (qq, a) in qs.iter().zip(&log) {
            total += a.t_a.map_or(0.0, |t| {
                oracle(t, qq.window.t_s, qq.window.t_e, med, 6.0, 1.0)
            });
        }
        let s = ars_aggregate(&log, &qs, &tau, &cfg(), false).unwrap();
        assert_abs_diff_eq!(s.ars, total / 100.0, epsilon = 1e-9);
    }

    #[test]
    fn per_task_tau() {
        let qs = vec![
            q("a", "SSR", "a", 0.0, 2.0),
            q("b", "SSR", "b", 0.0, 4.0),
            q("c", "REC", "c", 0.0, 10.0),
            q("u", "REC", "u", 0.0, 0.0),
        ];
        let t = TauTable::from_questions(&qs, TauScope::PerTask);
        assert_eq!(t.dataset, 4.0);
        assert_eq!(t.per_task["SSR"], 3.0);
        assert_eq!(t.per_task["REC"], 10.0);
        assert_eq!(t.for_question(&qs[3]), 0.0);
    }

    #[test]
    fn effective_accuracy_examples() {
        assert_abs_diff_eq!(effective_accuracy(0.5, 0.6).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(effective_accuracy(0.7, 1.0).unwrap(), 0.7);
        assert_eq!(effective_accuracy(0.0, 0.9).unwrap(), 0.0);
        assert!(effective_accuracy(1.2, 0.5).is_err());
    }

    #[test]
    fn sweep_examples() {
        let tau = TauTable::fixed(10.0);
        let qs: Vec<_> = (0..5)
            .map(|i| q(&i.to_string(), "SSR", &i.to_string(), 50.0, 60.0))
            .collect();
        let grid = [1.0, 3.0, 6.0];
        let early: Vec<_> = (0..5)
            .map(|i| ans(&i.to_string(), Some(40.0 + i as f64)))
            .collect();
        let g = penalty_sweep(&early, &qs, &tau, &grid, &grid, &cfg()).unwrap();
        assert_eq!(g.values.iter().flatten().count(), 9);
        for j in 0..3 {
            assert!(g.values[0][j] >= g.values[1][j] && g.values[1][j] >= g.values[2][j]);
        }
        let inside: Vec<_> = (0..5).map(|i| ans(&i.to_string(), Some(55.0))).collect();
        let g = penalty_sweep(&inside, &qs, &tau, &grid, &grid, &cfg()).unwrap();
        assert!(g.values.iter().flatten().all(|&v| v == 1.0));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        g.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("gamma_e,gamma_l,ars\n1,1,1\n"));
        assert!(g.to_svg(Some((2, 0))).contains("stroke=\"red\""));
    }

    proptest! {
        #[test]
        fn hard_mode_matches_oracle_and_stays_in_unit_interval(
            t_a in -100.0..200.0f64, t_s in 0.0..100.0f64, len in -20.0..50.0f64, tau in 0.0..40.0f64,
        ) {
            let t_e = t_s + len;
            let v = ars_single(Some(t_a), &EvidenceWindow::new(t_s, t_e), tau, &cfg());
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((v - oracle(t_a, t_s, t_e, tau, 6.0, 1.0)).abs() < 1e-12);
        }

        #[test]
        fn penalties_are_monotone(t_s in 0.0..50.0f64, a in -50.0..100.0f64, b in -50.0..100.0f64, tau in 0.5..20.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(early_penalty(lo, t_s, tau, &cfg()) <= early_penalty(hi, t_s, tau, &cfg()));
            prop_assert!(late_penalty(lo, t_s, tau, &cfg()) >= late_penalty(hi, t_s, tau, &cfg()));
        }

        #[test]
        fn smooth_penalties_stay_near_hard(t_a in -50.0..100.0f64, t_s in 0.0..50.0f64, len in 0.0..30.0f64, tau in 0.0..20.0f64) {
            let hard = cfg();
            let smooth = ArsConfig { smoothing: SmoothingConfig::smooth(20.0), ..cfg() };
            let bound = std::f64::consts::LN_2 / 20.0 + 1e-9;
            let t_e = t_s + len;
            prop_assert!((early_penalty(t_a, t_s, tau, &hard) - early_penalty(t_a, t_s, tau, &smooth)).abs() <= bound);
            prop_assert!((late_penalty(t_a, t_e, tau, &hard) - late_penalty(t_a, t_e, tau, &smooth)).abs() <= bound);
        }
    }
}
