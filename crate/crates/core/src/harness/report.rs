//! Per-task accuracy / ARS / effective-accuracy reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use super::schema::{QARecord, SCHEMA_VERSION};
use crate::ars::{
    ars_aggregate, effective_accuracy, ArsConfig, ArsQuestion, TauTable, TimedAnswer,
};
use crate::error::{Error, Result};

/// Whitespace-collapsed, case-folded exact match.
pub fn answers_match(predicted: &str, key: &str) -> bool {
    let norm = |s: &str| {
        s.split_whitespace()
            .collect::<Vec<_>>()
            .join(" ")
            .to_lowercase()
    };
    norm(predicted) == norm(key)
}

/// Metric inputs for each record; a chain is a connected component of
/// `depends_on` links within one video, keyed by its first record's id.
pub fn ars_questions(records: &[QARecord]) -> Vec<ArsQuestion<f64>> {
    let index: HashMap<(&str, &str), usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| ((r.video_id.as_str(), r.turn_id.as_str()), i))
        .collect();
    let mut uf = UnionFind::<usize>::new(records.len());
    for (i, r) in records.iter().enumerate() {
        for dep in &r.depends_on {
            if let Some(&j) = index.get(&(r.video_id.as_str(), dep.as_str())) {
                uf.union(i, j);
            }
        }
    }
    let mut first_of_set: HashMap<usize, usize> = HashMap::new();
    for i in 0..records.len() {
        first_of_set.entry(uf.find(i)).or_insert(i);
    }
    records
        .iter()
        .enumerate()
        .map(|(i, r)| ArsQuestion {
            question_id: r.id(),
            task: r.task.to_string(),
            chain: records[first_of_set[&uf.find(i)]].id(),
            window: r.window,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub task: String,
    pub questions: usize,
    pub acc: f64,
    pub ars: f64,
    pub acc_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMeta {
    pub schema_version: u32,
    pub tau: TauTable<f64>,
    pub gamma_e: f64,
    pub gamma_l: f64,
    pub epsilon: f64,
    pub mode: String,
    pub questions: usize,
    pub answered: usize,
    pub correct: usize,
    pub chains: usize,
    pub unmatched_answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArsReport {
    pub rows: Vec<ReportRow>,
    pub average: ReportRow,
    pub meta: ReportMeta,
}

pub fn evaluate(
    records: &[QARecord],
    answers: &[TimedAnswer<f64>],
    cfg: &ArsConfig<f64>,
    allow_unmatched: bool,
) -> Result<ArsReport> {
    evaluate_with(records, answers, cfg, allow_unmatched, answers_match)
}

/// [`evaluate`] with a caller-supplied correctness test `(predicted, key)`.
pub fn evaluate_with(
    records: &[QARecord],
    answers: &[TimedAnswer<f64>],
    cfg: &ArsConfig<f64>,
    allow_unmatched: bool,
    matcher: impl Fn(&str, &str) -> bool,
) -> Result<ArsReport> {
    let questions = ars_questions(records);
    let tau = TauTable::from_questions(&questions, cfg.tau_scope);
    let summary = ars_aggregate(answers, &questions, &tau, cfg, allow_unmatched)?;
    let by_id: HashMap<&str, &TimedAnswer<f64>> = answers
        .iter()
        .map(|a| (a.question_id.as_str(), a))
        .collect();
    let matched = records
        .iter()
        .filter(|r| by_id.contains_key(r.id().as_str()))
        .count();
    if records.is_empty() || matched == 0 {
        return Err(Error::EmptyReport);
    }

    let mut per_task: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let (mut answered, mut correct) = (0, 0);
    for r in records {
        let a = by_id.get(r.id().as_str()).filter(|a| a.t_a.is_some());
        let ok = a.is_some_and(|a| matcher(&a.predicted_answer, &r.answer_key));
        answered += usize::from(a.is_some());
        correct += usize::from(ok);
        let e = per_task.entry(r.task.to_string()).or_default();
        e.0 += 1;
        e.1 += usize::from(ok);
    }
    let row = |task: String, n: usize, c: usize, ars: f64| -> Result<ReportRow> {
        let acc = c as f64 / n as f64;
        Ok(ReportRow {
            task,
            questions: n,
            acc,
            ars,
            acc_e: effective_accuracy(acc, ars)?,
        })
    };
    let rows = per_task
        .into_iter()
        .map(|(task, (n, c))| {
            let ars = summary.per_task.get(&task).copied().unwrap_or(0.0);
            row(task, n, c, ars)
        })
        .collect::<Result<Vec<_>>>()?;
    let average = row("Average".into(), records.len(), correct, summary.ars)?;
    Ok(ArsReport {
        rows,
        average,
        meta: ReportMeta {
            schema_version: SCHEMA_VERSION,
            tau,
            gamma_e: cfg.gamma_e,
            gamma_l: cfg.gamma_l,
            epsilon: cfg.epsilon,
            mode: cfg.mode_label(),
            questions: records.len(),
            answered,
            correct,
            chains: summary.chains,
            unmatched_answers: summary.unmatched,
        },
    })
}

impl ArsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Per-task rows followed by the average row.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in self.rows.iter().chain(std::iter::once(&self.average)) {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Grouped bars of Acc, ARS and Acc_e per task.
    pub fn to_svg(&self) -> String {
        let rows: Vec<&ReportRow> = self
            .rows
            .iter()
            .chain(std::iter::once(&self.average))
            .collect();
        let (group, bar, plot_h, top, left) = (90usize, 22usize, 200.0f64, 30usize, 40usize);
        let width = left + group * rows.len() + 20;
        let height = top + plot_h as usize + 40;
        let colors = [("Acc", "#4c78a8"), ("ARS", "#f58518"), ("Acc_e", "#54a24b")];
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        for (k, (name, color)) in colors.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="8" width="10" height="10" fill="{color}"/><text x="{}" y="17">{name}</text>"#,
                left + k * 60,
                left + k * 60 + 14
            );
        }
        let base = top as f64 + plot_h;
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{base}" x2="{}" y2="{base}" stroke="black"/>"#,
            width - 10
        );
        for (i, r) in rows.iter().enumerate() {
            let x0 = left + i * group + 10;
            for (k, v) in [r.acc, r.ars, r.acc_e].into_iter().enumerate() {
                let h = plot_h * v.clamp(0.0, 1.0);
                let _ = writeln!(
                    s,
                    r#"<rect x="{}" y="{:.1}" width="{bar}" height="{h:.1}" fill="{}"/>"#,
                    x0 + k * bar,
                    base - h,
                    colors[k].1
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x0 + 3 * bar / 2,
                base as usize + 15,
                r.task
            );
        }
        s.push_str("</svg>\n");
        s
    }

    pub fn write_files(&self, dir: &Path, svg: bool) -> Result<()> {
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        std::fs::write(dir.join("report.csv"), self.to_csv()?)?;
        if svg {
            std::fs::write(dir.join("report.svg"), self.to_svg())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ars::EvidenceWindow;
    use crate::harness::schema::{Scope, Task};
    use approx::assert_abs_diff_eq;

    fn rec(turn: &str, task: Task, t_s: f64, t_e: f64, deps: &[&str]) -> QARecord {
        QARecord {
            video_id: "v".into(),
            turn_id: turn.into(),
            task,
            question: "q".into(),
            question_time: 0.0,
            options: None,
            answer_key: format!("key {turn}"),
            window: EvidenceWindow::new(t_s, t_e),
            depends_on: deps.iter().map(|d| d.to_string()).collect(),
            scope: Scope::Local,
        }
    }

    fn ans(turn: &str, pred: &str, t_a: Option<f64>) -> TimedAnswer<f64> {
        TimedAnswer {
            question_id: format!("v/{turn}"),
            predicted_answer: pred.into(),
            t_a,
        }
    }

    #[test]
    fn perfect_and_half_correct_logs() {
        let records = vec![
            rec("1", Task::SSR, 10.0, 20.0, &[]),
            rec("2", Task::REC, 10.0, 20.0, &[]),
        ];
        let good = vec![
            ans("1", " KEY   1", Some(15.0)),
            ans("2", "key 2", Some(10.0)),
        ];
        let r = evaluate(&records, &good, &ArsConfig::default(), false).unwrap();
        assert_eq!(
            (r.average.acc, r.average.ars, r.average.acc_e),
            (1.0, 1.0, 1.0)
        );

        let half = vec![ans("1", "key 1", Some(15.0)), ans("2", "wrong", Some(12.0))];
        let r = evaluate(&records, &half, &ArsConfig::default(), false).unwrap();
        assert_eq!(
            (r.average.acc, r.average.ars, r.average.acc_e),
            (0.5, 1.0, 0.5)
        );
        for row in r.rows.iter().chain([&r.average]) {
            assert_abs_diff_eq!(row.acc_e, row.acc * row.ars, epsilon = 1e-12);
        }
    }

    #[test]
    fn chains_follow_dependency_components() {
        let records = vec![
            rec("1", Task::CRR, 0.0, 10.0, &[]),
            rec("2", Task::SSR, 0.0, 10.0, &[]),
            rec("3", Task::CTD, 0.0, 10.0, &["1"]),
            rec("4", Task::GSD, 0.0, 10.0, &["3", "2"]),
        ];
        let qs = ars_questions(&records);
        assert!(qs.iter().all(|q| q.chain == "v/1"));
    }

    #[test]
    fn no_matched_answers_is_an_empty_report() {
        let records = vec![rec("1", Task::SSR, 10.0, 20.0, &[])];
        let err = evaluate(
            &records,
            &[ans("9", "x", Some(1.0))],
            &ArsConfig::default(),
            true,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyReport));
        assert!(matches!(
            evaluate(&[], &[], &ArsConfig::default(), true).unwrap_err(),
            Error::EmptyReport
        ));
    }

    #[test]
    fn csv_lists_tasks_then_average() {
        let records = vec![
            rec("1", Task::SSR, 10.0, 20.0, &[]),
            rec("2", Task::REC, 10.0, 20.0, &[]),
        ];
        let r = evaluate(
            &records,
            &[ans("1", "key 1", Some(15.0))],
            &ArsConfig::default(),
            false,
        )
        .unwrap();
        let csv = r.to_csv().unwrap();
        assert_eq!(csv, "task,questions,acc,ars,acc_e\nREC,1,0.0,0.0,0.0\nSSR,1,1.0,1.0,1.0\nAverage,2,0.5,0.5,0.25\n");
        assert!(r.to_svg().starts_with("<svg"));
    }
}
