//! Experiment harness for `dpglm`: instance generation, parameter sweeps
//! with CSV output, and rate summaries.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod runner;

pub use config::{AlgSpec, DeltaSpec, ExperimentConfig, LossSpec, RadiusSpec};
pub use report::{loglog_slope, median, render_text, summarize, write_summary_csv, GroupSummary};
pub use runner::{
    descriptors, execute, read_rows, replay_row, run_sweep, write_rows, ResultRow, RunDescriptor,
    RunOutcome, RunRecord, CSV_HEADER,
};
