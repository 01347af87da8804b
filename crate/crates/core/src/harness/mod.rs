//! Evaluation harness: dataset and answer-log I/O, the scene-stream
//! simulator, brute-force oracles, the streaming pipeline, reports and the
//! latency benchmark.

pub mod bench;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod schema;
pub mod sim;
pub mod training;

pub use bench::{bench, write_bench_csv, BenchConfig, BenchRow};
pub use pipeline::{
    run_pipeline, toy_answer, ContextConfig, PipelineConfig, PipelineOutput, Policy,
};
pub use report::{answers_match, ars_questions, evaluate, evaluate_with, ArsReport, ReportRow};
pub use schema::{
    load_answers, load_dataset, save_answers, save_dataset, Dataset, QARecord, Scope, Task,
    SCHEMA_VERSION,
};
pub use sim::{simulate_stream, Episode, SimConfig, Split, SuiteManifest, SuiteTier};
pub use training::{build_training_set, train_on_episodes, LabeledQuestion};
