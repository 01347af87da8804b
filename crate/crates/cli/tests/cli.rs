use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ontime(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ontime"))
        .args(args)
        .output()
        .expect("spawn ontime")
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).expect("stderr is one JSON object")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn eval_reproduces_golden_report_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ontime(&[
        "eval",
        "--records",
        s(&golden("records.jsonl")),
        "--answers",
        s(&golden("answers.jsonl")),
        "--out",
        s(tmp.path()),
        "--svg",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["report.json", "report.csv", "report.svg"] {
        let got = std::fs::read(tmp.path().join(f)).unwrap();
        let want = std::fs::read(golden("expected").join(f)).unwrap();
        assert!(got == want, "{f} differs from the golden copy");
    }
}

/// Chain means of the clamped penalties, written out by hand for the golden
/// log. The median non-sentinel duration is 10 s.
#[test]
fn golden_average_matches_hand_computation() {
    let eps = 1e-6;
    let tau = 10.0;
    let ep =
        |t_a: f64, t_s: f64| f64::min(1.0, 2.0 / (1.0 + (-6.0 * (t_a - t_s) / (tau + eps)).exp()));
    let lp = |t_a: f64, t_e: f64| (1.0 - (t_a - t_e) / (tau + eps)).clamp(0.0, 1.0);
    let score = |t_a: f64, t_s: f64, t_e: f64| ep(t_a, t_s) * lp(t_a, t_e);
    let chains = [
        score(15.0, 10.0, 20.0),
        (score(25.0, 30.0, 40.0) + score(48.0, 30.0, 40.0)) / 2.0,
        0.0,
        score(30.0, 12.0, 30.0),
        score(70.0, 60.0, 64.0),
    ];
    let expected = chains.iter().sum::<f64>() / chains.len() as f64;

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(golden("expected/report.json")).unwrap()).unwrap();
    let avg = &report["average"];
    assert!((avg["ars"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert!((avg["acc"].as_f64().unwrap() - 4.0 / 6.0).abs() < 1e-12);
    assert!((avg["acc_e"].as_f64().unwrap() - expected * 4.0 / 6.0).abs() < 1e-12);
    assert_eq!(report["meta"]["chains"], 5);
}

#[test]
fn simulate_is_deterministic_and_stays_in_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = ontime(&["simulate", "--seed", "7", "--count", "2", "--out", s(dir)]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert_eq!(
        listing(&a),
        ["episode-sim-7.json", "episode-sim-8.json", "records.jsonl"]
    );
    for f in listing(&a) {
        assert_eq!(
            std::fs::read(a.join(&f)).unwrap(),
            std::fs::read(b.join(&f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(listing(tmp.path()), ["a", "b"]);
}

#[test]
fn single_cell_sweep_equals_eval_ars() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ontime(&[
        "sweep",
        "--records",
        s(&golden("records.jsonl")),
        "--answers",
        s(&golden("answers.jsonl")),
        "--gamma-e",
        "6",
        "--gamma-l",
        "1",
        "--out",
        s(tmp.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    let cell: f64 = lines[1].rsplit(',').next().unwrap().parse().unwrap();

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(golden("expected/report.json")).unwrap()).unwrap();
    assert_eq!(cell, report["average"]["ars"].as_f64().unwrap());
}

#[test]
fn workflow_runs_every_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |name: &str| tmp.path().join(name);
    let cfg = p("config.json");
    // short training keeps the test quick; the acceptance suite covers quality
    std::fs::write(&cfg, r#"{"version": 1, "train": {"epochs": 5}}"#).unwrap();
    let ok = |args: &[&str]| {
        let out = ontime(args);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    ok(&[
        "--config",
        s(&cfg),
        "simulate",
        "--seed",
        "3",
        "--count",
        "2",
        "--out",
        s(&p("sim")),
    ]);
    ok(&[
        "--config",
        s(&cfg),
        "train",
        "--episodes",
        s(&p("sim")),
        "--out",
        s(&p("model")),
    ]);
    assert_eq!(
        listing(&p("model")),
        ["loss.csv", "model.json", "training.json"]
    );
    let loss = std::fs::read_to_string(p("model/loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 6);

    for policy in [
        "readiness",
        "answer-immediately",
        "answer-at-end",
        "oracle-timing",
    ] {
        let run = p(&format!("run-{policy}"));
        ok(&[
            "--config",
            s(&cfg),
            "run",
            "--episodes",
            s(&p("sim")),
            "--policy",
            policy,
            "--model",
            s(&p("model/model.json")),
            "--out",
            s(&run),
        ]);
        let answers = std::fs::read_to_string(run.join("answers.jsonl")).unwrap();
        assert_eq!(answers.lines().count(), 2);
        assert_eq!(run.join("traces.jsonl").exists(), policy == "readiness");
        ok(&[
            "eval",
            "--records",
            s(&p("sim/records.jsonl")),
            "--answers",
            s(&run.join("answers.jsonl")),
            "--out",
            s(&run),
        ]);
    }
    let oracle: serde_json::Value =
        serde_json::from_slice(&std::fs::read(p("run-oracle-timing/report.json")).unwrap())
            .unwrap();
    assert_eq!(oracle["average"]["ars"], 1.0);
}

#[test]
fn bench_writes_one_row_per_length() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ontime(&["bench", "--lengths", "200,400", "--out", s(tmp.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("length,p50_us,p95_us,peak_items"));
}

#[test]
fn invalid_config_exits_2_with_field_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"version": 1, "sim": {"dim": 16, "nosie_sigma": 0.1}}"#,
    )
    .unwrap();
    let out = ontime(&[
        "--config",
        s(&cfg),
        "simulate",
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "invalid_config");
    assert_eq!(err["field"], "sim.nosie_sigma");
    assert!(!tmp.path().join("o").exists());

    std::fs::write(&cfg, r#"{"version": 1, "ars": {"gamma_e": -1.0}}"#).unwrap();
    let out = ontime(&[
        "--config",
        s(&cfg),
        "eval",
        "--records",
        "x",
        "--answers",
        "y",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["field"], "ars");
}

#[test]
fn missing_input_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.jsonl");
    let out = ontime(&[
        "eval",
        "--records",
        s(&missing),
        "--answers",
        s(&golden("answers.jsonl")),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "missing_input");
    assert_eq!(err["path"], s(&missing));

    let out = ontime(&["--config", s(&missing), "bench", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(3));
    let out = ontime(&[
        "train",
        "--episodes",
        s(tmp.path()),
        "--out",
        s(&tmp.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_records_exit_1_with_line_numbers() {
    let tmp = tempfile::tempdir().unwrap();
    let records = tmp.path().join("records.jsonl");
    let good = std::fs::read_to_string(golden("records.jsonl")).unwrap();
    let first = good.lines().next().unwrap();
    std::fs::write(&records, format!("{first}\n{{\"video_id\": 3}}\n")).unwrap();
    let out = ontime(&[
        "eval",
        "--records",
        s(&records),
        "--answers",
        s(&golden("answers.jsonl")),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "invalid_input");
    assert_eq!(err["issues"][0]["line"], 2);
}

#[test]
fn unmatched_answers_need_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let answers = tmp.path().join("answers.jsonl");
    let mut text = std::fs::read_to_string(golden("answers.jsonl")).unwrap();
    text.push_str("{\"question_id\":\"g9/1\",\"predicted_answer\":\"x\",\"t_a\":1.0}\n");
    std::fs::write(&answers, text).unwrap();
    let records = golden("records.jsonl");
    let base = [
        "eval",
        "--records",
        s(&records),
        "--answers",
        s(&answers),
        "--out",
        s(tmp.path()),
    ];
    assert_eq!(ontime(&base).status.code(), Some(1));
    let mut with_flag = base.to_vec();
    with_flag.push("--allow-unmatched");
    assert!(ontime(&with_flag).status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["meta"]["unmatched_answers"][0], "g9/1");
}

#[test]
fn version_lists_engine_and_schema() {
    let out = ontime(&["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(
        text.contains("engine 0.1.0") && text.contains("schema 1"),
        "{text}"
    );
}

#[test]
fn config_command_writes_easy_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ontime(&["config", "--out", s(tmp.path())]);
    assert!(out.status.success());
    let cfg: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["version"], 1);
    assert_eq!(cfg["pipeline"]["readiness_stride"], 10);
    assert_eq!(cfg["sim"]["questions_per_stream"], 1);
}
