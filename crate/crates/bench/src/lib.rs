//! Benchmark harness for [`fiba`]: synthetic workloads over window size,
//! bulk size and out-of-order distance, plus replay of timestamped CSV data
//! through a time-based window.

pub mod agg;
pub mod generate;
pub mod replay;
pub mod stats;
pub mod workload;

pub use agg::{AggName, Lift};
pub use generate::{generate, GeneratorConfig};
pub use replay::{run_replay, Log2Histogram, ReplayConfig, ReplayReport, TsUnit};
pub use stats::{emit_stats, parse_stats, percentile, summarize, LatencyRecord, OpKind, StatsSummary};
pub use workload::{run_synthetic, run_with, Mode, Plan, RunResult, Step, WorkloadSpec};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid workload: {0}")]
    Spec(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Tree(#[from] fiba::FibaError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
