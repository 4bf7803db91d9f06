//! Monte-Carlo harness: replicated simulation and estimation, empty-space
//! tables, and CSV/JSON/text output.

mod config;
mod empty_space;
mod run;
mod tables;

pub use config::{ExperimentConfig, SamplerSettings, StudyConfig, StudyModel};
pub use empty_space::{
    empty_space_from_patterns, estimate_empty_space, poisson_empty_space, poisson_sigma2_planar, sigma2_theoretical,
    two_ball_union_volume, EmptySpaceDesign, EmptySpaceEstimates,
};
pub use run::{
    run_coverage_study, run_experiment, run_replication, run_replications, run_study, simulate, summarize, with_threads,
    ColumnData, ColumnSummary, CoverageStudy, ExperimentOutcome, Interval, RangeData, RangeSummary, ReplicationRecord,
    ReplicationSummary,
};
pub use tables::{emit_tables, failure_rows, read_summary, FailureRow, StudySummary};
