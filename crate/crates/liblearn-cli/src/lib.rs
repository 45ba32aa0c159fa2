//! Orchestration for the library learning loop: run configuration, the
//! online solve-compress-document loop with checkpointing and resume,
//! offline budget-curve evaluation, library graph export, and cross-run
//! reporting. The `liblearn` binary is a thin shell over this crate.

pub mod checkpoint;
pub mod config;
pub mod graph;
pub mod offline;
pub mod report;
pub mod run;

pub use checkpoint::{
    AbstractionRow, Checkpoint, CheckpointError, EntryRecord, FrontierRecord, MetricsRow, RunDir,
    StageTimings, UsageTotals,
};
pub use config::{
    BackendMode, BackendSpec, ConditionFlags, ConfigError, RunConfig, CONDITIONS,
};
pub use graph::export_graph;
pub use offline::{solve_curve, OfflinePoint, OfflineReport, DEFAULT_BUDGETS};
pub use report::{summarize_runs, ConditionSummary, ReportError};
pub use run::{
    build_backend, resume_online, run_online, run_online_with, AnyBackend, RunError, RunMeta,
    RunSummary,
};
