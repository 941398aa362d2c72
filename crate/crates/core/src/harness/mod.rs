//! Datasets, metrics and experiment runners.

pub mod eval;
pub mod metrics;
pub mod stats;

pub use eval::{
    evaluate, BackendFactory, Backends, ErrorSource, ErrorTally, EvalConfig, EvalError, EvalReport,
    IterationMetrics, OracleReference, Sample, SampleOutcome,
};
pub use metrics::{answer_match, matches_ground_truth, normalize_answer, score, GroundTruth, TaskKind};
pub use stats::{dataset_stats, render_table, StatsRow};
