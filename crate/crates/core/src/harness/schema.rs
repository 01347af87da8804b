//! JSON Lines datasets and answer logs.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ars::{EvidenceWindow, TimedAnswer};
use crate::error::{Error, Result, ValidationIssue};

/// Bumped whenever a dataset or answer-log field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Sequential steps recognition.
    SSR,
    /// Repetitive event counting.
    REC,
    /// Clue-triggered responding.
    CRR,
    /// Goal-state detection.
    GSD,
    /// Causal trigger detection.
    CTD,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::SSR, Task::REC, Task::CRR, Task::GSD, Task::CTD];
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Local,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QARecord {
    pub video_id: String,
    pub turn_id: String,
    pub task: Task,
    pub question: String,
    pub question_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub answer_key: String,
    pub window: EvidenceWindow<f64>,
    #[serde(default)]
    pub depends_on: Vec<String>,
    #[serde(default)]
    pub scope: Scope,
}

impl QARecord {
    /// Identifier used by answer logs: `video_id/turn_id`.
    pub fn id(&self) -> String {
        format!("{}/{}", self.video_id, self.turn_id)
    }
}

/// Records that passed validation plus non-fatal findings.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub records: Vec<QARecord>,
    pub warnings: Vec<ValidationIssue>,
    /// Ids of records kept despite an inverted evidence window.
    pub noisy: BTreeSet<String>,
}

fn issue(line: usize, field: impl Into<String>, message: impl Into<String>) -> ValidationIssue {
    ValidationIssue {
        line: Some(line),
        field: field.into(),
        message: message.into(),
    }
}

/// Parses non-blank lines as `T`, collecting one issue per bad line.
fn parse_lines<T: serde::de::DeserializeOwned>(
    reader: impl BufRead,
    issues: &mut Vec<ValidationIssue>,
) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(&line);
        match serde_path_to_error::deserialize::<_, T>(&mut de) {
            Ok(v) => match de.end() {
                Ok(()) => out.push((line_no, v)),
                Err(e) => issues.push(issue(line_no, "record", e.to_string())),
            },
            Err(e) => {
                let path = e.path().to_string();
                let field = if path == "." {
                    "record".to_string()
                } else {
                    path
                };
                issues.push(issue(line_no, field, e.into_inner().to_string()));
            }
        }
    }
    Ok(out)
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

/// Validates records in file order. Hard violations fail the whole load;
/// inverted windows and late questions are kept with a warning.
pub fn validate_records(
    parsed: Vec<(usize, QARecord)>,
    mut issues: Vec<ValidationIssue>,
) -> Result<Dataset> {
    let mut ds = Dataset::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut turns_by_video: HashMap<String, HashSet<String>> = HashMap::new();
    for (line, r) in parsed {
        let id = r.id();
        if r.video_id.is_empty() || r.turn_id.is_empty() {
            issues.push(issue(line, "video_id/turn_id", "must be nonempty"));
        }
        if !seen.insert(id.clone()) {
            issues.push(issue(line, "turn_id", format!("duplicate record {id}")));
            continue;
        }
        for (field, x) in [
            ("question_time", r.question_time),
            ("window.t_s", r.window.t_s),
            ("window.t_e", r.window.t_e),
        ] {
            if !finite_nonneg(x) {
                issues.push(issue(
                    line,
                    field,
                    format!("must be a finite, nonnegative number of seconds (got {x})"),
                ));
            }
        }
        let earlier = turns_by_video.entry(r.video_id.clone()).or_default();
        for dep in &r.depends_on {
            if !earlier.contains(dep) {
                issues.push(issue(
                    line,
                    "depends_on",
                    format!("{dep:?} is not an earlier turn of video {:?}", r.video_id),
                ));
            }
        }
        earlier.insert(r.turn_id.clone());
        if !r.window.is_sentinel() {
            if r.window.t_s > r.window.t_e {
                ds.warnings.push(issue(
                    line,
                    "window",
                    format!(
                        "t_s {} is after t_e {}; kept as noisy",
                        r.window.t_s, r.window.t_e
                    ),
                ));
                ds.noisy.insert(id.clone());
            }
            if r.question_time > r.window.t_s {
                ds.warnings.push(issue(
                    line,
                    "question_time",
                    "question is asked after evidence onset",
                ));
            }
        }
        ds.records.push(r);
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    Ok(ds)
}

pub fn read_dataset(reader: impl BufRead) -> Result<Dataset> {
    let mut issues = Vec::new();
    let parsed = parse_lines::<QARecord>(reader, &mut issues)?;
    validate_records(parsed, issues)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(BufReader::new(std::fs::File::open(path)?))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, records: &[QARecord]) -> Result<()> {
    write_jsonl(path, records)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerLine {
    question_id: String,
    predicted_answer: String,
    t_a: Option<f64>,
}

pub fn read_answers(reader: impl BufRead) -> Result<Vec<TimedAnswer<f64>>> {
    let mut issues = Vec::new();
    let parsed = parse_lines::<AnswerLine>(reader, &mut issues)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(parsed.len());
    for (line, a) in parsed {
        if !seen.insert(a.question_id.clone()) {
            issues.push(issue(
                line,
                "question_id",
                format!("duplicate answer for {}", a.question_id),
            ));
        }
        if a.t_a.is_some_and(|t| !finite_nonneg(t)) {
            issues.push(issue(
                line,
                "t_a",
                "must be null or a finite, nonnegative number of seconds",
            ));
        }
        out.push(TimedAnswer {
            question_id: a.question_id,
            predicted_answer: a.predicted_answer,
            t_a: a.t_a,
        });
    }
    if !issues.is_empty() {
        return Err(Error::Validation(issues));
    }
    Ok(out)
}

pub fn load_answers(path: &Path) -> Result<Vec<TimedAnswer<f64>>> {
    read_answers(BufReader::new(std::fs::File::open(path)?))
}

pub fn save_answers(path: &Path, answers: &[TimedAnswer<f64>]) -> Result<()> {
    let lines: Vec<AnswerLine> = answers
        .iter()
        .map(|a| AnswerLine {
            question_id: a.question_id.clone(),
            predicted_answer: a.predicted_answer.clone(),
            t_a: a.t_a,
        })
        .collect();
    write_jsonl(path, &lines)
}
