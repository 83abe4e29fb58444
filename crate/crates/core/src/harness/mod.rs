//! Experiment orchestration: configs, task data, training runs, searches,
//! partitioning and sweep grids, and report emission.

mod config;
mod experiment;
mod partition;
mod report;
mod sweep;
mod task;
pub mod write;

pub use config::{
    default_search_space, DataConfig, DiagnosticsConfig, ExperimentConfig, PartitionConfig,
    PsoConfig, RunMode, SweepConfig, SweepParameter, TaskName, TopologyConfig,
};
pub use experiment::{
    apply_assignment, fit_model, pso_search, run_experiment, run_pso_search, run_repetitions,
    summarize, ExperimentRun, FitOutcome, MetricSummary, PsoSummary, RepetitionRecord,
    ResultRecord, TrainedModel,
};
pub use partition::{factor_pairs, neuronal_partitioning, PartitionRow, PartitionTable};
pub use report::{
    emit_report, markdown_table, parse_markdown_table, render_report, report_rows, thousandths,
    ReportFormat, REPORT_COLUMNS,
};
pub use sweep::{param_sweep, SweepCell, SweepResult};
pub use task::{load_task, TaskData, TaskSplit};
