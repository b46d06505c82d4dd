//! Experiment runner, accuracy and space metrics, and report emission.

mod config;
mod experiment;
mod metrics;
mod report;

pub use config::{ExperimentConfig, MapConfig, SweepSpec, WorkloadConfig};
pub use experiment::{
    evaluate, run_experiment, run_experiment_file, run_sweep, simulate, ExperimentOutput,
    SummaryRow,
};
pub use metrics::{error_at, overhead, summarize, ErrorReport, ErrorSummary, OverheadReport};
pub use report::{
    emit_reports, progress_svg, swimlanes_svg, write_progress_csv, write_summary_csv,
    write_swimlanes_csv, write_sweep_summary_csv,
};
