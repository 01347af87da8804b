use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ontime::ars::{penalty_sweep, TauTable};
use ontime::harness::{
    ars_questions, bench, evaluate, load_answers, load_dataset, run_pipeline, save_answers,
    save_dataset, train_on_episodes, write_bench_csv, Episode, Policy, SimConfig, Split,
    SuiteManifest, SCHEMA_VERSION,
};
use ontime::readiness::{write_loss_curve_csv, MODEL_FORMAT_VERSION};
use ontime::{Model, Projections};
use serde::Serialize;

mod config;

use config::{CliConfig, CONFIG_VERSION};

static VERSION: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{} (engine {}, schema {SCHEMA_VERSION}, model format {MODEL_FORMAT_VERSION}, config {CONFIG_VERSION})",
        env!("CARGO_PKG_VERSION"),
        env!("CARGO_PKG_VERSION"),
    )
});

#[derive(Parser)]
#[command(name = "ontime", version = VERSION.as_str(), about = "Streaming evidence memory and answer-readiness toolkit")]
struct Cli {
    /// Versioned JSON config; omitted sections take the easy-tier defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Progress messages on stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic episodes and their QA records.
    Simulate(SimulateArgs),
    /// Fit a readiness model on simulated episodes.
    Train(TrainArgs),
    /// Stream episodes through the engine and log answers.
    Run(RunArgs),
    /// Score an answer log against a dataset.
    Eval(EvalArgs),
    /// ARS over a grid of early and late penalty sharpness.
    Sweep(SweepArgs),
    /// Per-step latency and memory over long streams.
    Bench(BenchArgs),
    /// Print the effective config as JSON.
    Config(OutArgs),
}

#[derive(Args)]
struct OutArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    out: PathBuf,
    /// First episode seed (ignored with --tier).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Use a bundled suite tier's config and seeds instead of the config file.
    #[arg(long)]
    tier: Option<String>,
    #[arg(long, value_enum, default_value_t = SplitArg::Eval)]
    split: SplitArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Eval,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of episode-*.json files.
    #[arg(long)]
    episodes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides train.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Readiness,
    AnswerImmediately,
    AnswerAtEnd,
    OracleTiming,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    episodes: PathBuf,
    #[arg(long, value_enum, default_value_t = PolicyArg::Readiness)]
    policy: PolicyArg,
    /// Trained model (readiness policy only).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Overrides the model's trigger threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    answers: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: bool,
    /// Accept answers whose id matches no record.
    #[arg(long)]
    allow_unmatched: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    answers: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 6.0, 8.0])]
    gamma_e: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 3.0, 4.0])]
    gamma_l: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1_000usize, 10_000])]
    lengths: Vec<usize>,
    /// Overrides bench.sim.seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config {
        field: Option<String>,
        message: String,
    },
    MissingInput(PathBuf),
    Engine(ontime::Error),
}

impl From<ontime::Error> for CliError {
    fn from(e: ontime::Error) -> Self {
        match e {
            ontime::Error::Config(message) => CliError::Config {
                field: None,
                message,
            },
            other => CliError::Engine(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Engine(e.into())
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    issues: Vec<ontime::error::ValidationIssue>,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::MissingInput(_) => 3,
            CliError::Engine(ontime::Error::Io(e)) if e.kind() == ErrorKind::NotFound => 3,
            CliError::Engine(_) => 1,
        }
    }

    fn report(&self) -> ErrorReport<'_> {
        let base = |error, message| ErrorReport {
            error,
            message,
            field: None,
            path: None,
            issues: Vec::new(),
        };
        match self {
            CliError::Config { field, message } => ErrorReport {
                field: field.clone(),
                ..base("invalid_config", message.clone())
            },
            CliError::MissingInput(p) => ErrorReport {
                path: Some(p.display().to_string()),
                ..base("missing_input", format!("{} does not exist", p.display()))
            },
            CliError::Engine(ontime::Error::Validation(issues)) => ErrorReport {
                issues: issues.clone(),
                ..base("invalid_input", self.engine_message())
            },
            CliError::Engine(ontime::Error::Io(e)) if e.kind() == ErrorKind::NotFound => {
                base("missing_input", e.to_string())
            }
            CliError::Engine(_) => base("engine", self.engine_message()),
        }
    }

    fn engine_message(&self) -> String {
        match self {
            CliError::Engine(e) => e.to_string(),
            _ => String::new(),
        }
    }
}

pub(crate) fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}

pub(crate) fn read_input(path: &Path) -> Result<String, CliError> {
    require(path)?;
    Ok(std::fs::read_to_string(path)?)
}

struct Ctx {
    cfg: CliConfig,
    verbose: u8,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose > 0 {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn out_dir(dir: &Path) -> Result<&Path, CliError> {
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(ontime::Error::from)? + "\n";
    std::fs::write(path, text)?;
    Ok(())
}

fn episode_file(video_id: &str) -> String {
    format!("episode-{video_id}.json")
}

/// Episodes in a directory, ordered by file name.
fn load_episodes(dir: &Path) -> Result<Vec<Episode>, CliError> {
    require(dir)?;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("episode-") && name.ends_with(".json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::MissingInput(dir.join("episode-*.json")));
    }
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| CliError::Engine(e.into()))
        })
        .collect()
}

fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<(), CliError> {
    let out = out_dir(&args.out)?;
    let episodes = match &args.tier {
        Some(name) => {
            let manifest = SuiteManifest::bundled();
            let split = match args.split {
                SplitArg::Train => Split::Train,
                SplitArg::Eval => Split::Eval,
            };
            manifest.tier(name)?.episodes(split)?
        }
        None => (args.seed..args.seed + args.count)
            .map(|seed| {
                ontime::harness::simulate_stream(&SimConfig {
                    seed,
                    ..ctx.cfg.sim.clone()
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let mut records = Vec::new();
    for ep in &episodes {
        write_json(&out.join(episode_file(&ep.video_id)), ep)?;
        records.extend(ep.records.iter().cloned());
        ctx.log(format!(
            "{}: {} frames, {} questions",
            ep.video_id,
            ep.frames.len(),
            ep.records.len()
        ));
    }
    save_dataset(&out.join("records.jsonl"), &records)?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    episodes: usize,
    questions: usize,
    used_questions: usize,
    mean_label_iou: Option<f64>,
    final_loss: Option<f64>,
}

fn cmd_train(ctx: &Ctx, args: &TrainArgs) -> Result<(), CliError> {
    let episodes = load_episodes(&args.episodes)?;
    let out = out_dir(&args.out)?;
    let mut train = ctx.cfg.train.clone();
    if let Some(seed) = args.seed {
        train.seed = seed;
    }
    let proj = Projections::identity(episodes[0].dim());
    let (outcome, set) = train_on_episodes(&episodes, &ctx.cfg.pipeline, &proj, &train)?;
    outcome.model.save_json(&out.join("model.json"))?;
    write_loss_curve_csv(&out.join("loss.csv"), &outcome.curve)?;
    let ious: Vec<f64> = set.iter().filter_map(|q| q.label_iou).collect();
    let summary = TrainSummary {
        episodes: episodes.len(),
        questions: set.len(),
        used_questions: outcome.used_episodes,
        mean_label_iou: (!ious.is_empty()).then(|| ious.iter().sum::<f64>() / ious.len() as f64),
        final_loss: outcome.curve.last().map(|p| p.total),
    };
    ctx.log(format!(
        "trained on {} of {} questions",
        summary.used_questions, summary.questions
    ));
    write_json(&out.join("training.json"), &summary)
}

fn cmd_run(ctx: &Ctx, args: &RunArgs) -> Result<(), CliError> {
    let model = match (args.policy, &args.model) {
        (PolicyArg::Readiness, None) => {
            return Err(CliError::Config {
                field: Some("--model".into()),
                message: "the readiness policy needs --model".into(),
            })
        }
        (PolicyArg::Readiness, Some(p)) => {
            require(p)?;
            let mut m = Model::load_json(p)?;
            if let Some(th) = args.threshold {
                m.threshold = th;
                m.validate().map_err(|e| CliError::Config {
                    field: Some("--threshold".into()),
                    message: e.to_string(),
                })?;
            }
            Some(m)
        }
        _ => None,
    };
    let episodes = load_episodes(&args.episodes)?;
    let out = out_dir(&args.out)?;
    let (mut answers, mut traces) = (Vec::new(), Vec::new());
    for ep in &episodes {
        let policy = match args.policy {
            PolicyArg::Readiness => Policy::Readiness(model.as_ref().expect("model loaded above")),
            PolicyArg::AnswerImmediately => Policy::AnswerImmediately,
            PolicyArg::AnswerAtEnd => Policy::AnswerAtEnd,
            PolicyArg::OracleTiming => Policy::OracleTiming,
        };
        let output = run_pipeline(
            ep,
            &ctx.cfg.pipeline,
            &Projections::identity(ep.dim()),
            policy,
        )?;
        ctx.log(format!("{}: {} answers", ep.video_id, output.answers.len()));
        answers.extend(output.answers);
        traces.extend(output.traces);
    }
    save_answers(&out.join("answers.jsonl"), &answers)?;
    if model.is_some() {
        let mut text = String::new();
        for t in &traces {
            text += &serde_json::to_string(t).map_err(ontime::Error::from)?;
            text.push('\n');
        }
        std::fs::write(out.join("traces.jsonl"), text)?;
    }
    Ok(())
}

fn load_eval_inputs(
    ctx: &Ctx,
    records: &Path,
    answers: &Path,
) -> Result<(Vec<ontime::harness::QARecord>, Vec<ontime::Answer>), CliError> {
    require(records)?;
    require(answers)?;
    let dataset = load_dataset(records)?;
    for w in &dataset.warnings {
        ctx.log(format!("warning: {w}"));
    }
    Ok((dataset.records, load_answers(answers)?))
}

fn cmd_eval(ctx: &Ctx, args: &EvalArgs) -> Result<(), CliError> {
    let (records, answers) = load_eval_inputs(ctx, &args.records, &args.answers)?;
    let report = evaluate(&records, &answers, &ctx.cfg.ars, args.allow_unmatched)?;
    report.write_files(out_dir(&args.out)?, args.svg)?;
    ctx.log(format!(
        "ARS {:.4}, Acc {:.4}",
        report.average.ars, report.average.acc
    ));
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, args: &SweepArgs) -> Result<(), CliError> {
    let (records, answers) = load_eval_inputs(ctx, &args.records, &args.answers)?;
    let questions = ars_questions(&records);
    let tau = TauTable::from_questions(&questions, ctx.cfg.ars.tau_scope);
    let grid = penalty_sweep(
        &answers,
        &questions,
        &tau,
        &args.gamma_e,
        &args.gamma_l,
        &ctx.cfg.ars,
    )?;
    let out = out_dir(&args.out)?;
    grid.write_csv(&out.join("sweep.csv"))?;
    if args.svg {
        let i = args.gamma_e.iter().position(|&g| g == ctx.cfg.ars.gamma_e);
        let j = args.gamma_l.iter().position(|&g| g == ctx.cfg.ars.gamma_l);
        std::fs::write(out.join("sweep.svg"), grid.to_svg(i.zip(j)))?;
    }
    Ok(())
}

fn cmd_bench(ctx: &Ctx, args: &BenchArgs) -> Result<(), CliError> {
    let mut cfg = ctx.cfg.bench.clone();
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    let rows = bench(&args.lengths, &cfg)?;
    for r in &rows {
        ctx.log(format!(
            "{} frames: p50 {:.1} us, p95 {:.1} us, peak {} items",
            r.length, r.p50_us, r.p95_us, r.peak_items
        ));
    }
    write_bench_csv(&out_dir(&args.out)?.join("bench.csv"), &rows)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        cfg: CliConfig::load(cli.config.as_deref())?,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Run(a) => cmd_run(&ctx, a),
        Command::Eval(a) => cmd_eval(&ctx, a),
        Command::Sweep(a) => cmd_sweep(&ctx, a),
        Command::Bench(a) => cmd_bench(&ctx, a),
        Command::Config(a) => write_json(&out_dir(&a.out)?.join("config.json"), &ctx.cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::to_string(&e.report())
                .unwrap_or_else(|_| r#"{"error":"engine"}"#.into());
            eprintln!("{report}");
            ExitCode::from(e.exit_code())
        }
    }
}
