//! Declarative experiments behind the `cbi2` binary.
//!
//! A config is a flat `key = value` file (`#` comments, dotted keys such as
//! `model.a1` or `sim.euler_dt`). [`run`] resolves it, echoes the resolved
//! values to `resolved_config.txt` and writes the artifacts of the chosen
//! experiment. Monte Carlo replicates run on a worker pool; replicate `r`
//! draws from stream `r` of the master seed and rows are collected in
//! replicate order, so reruns are byte-identical for any pool size.

mod config;
mod run;
mod summary;
mod table;

pub use config::{ExperimentConfig, ExperimentKind, LaplaceSettings};
pub use run::{
    emit_plotdata, laplace_experiment, mc_clt, mc_consistency, recompute_summary, run, McReport,
    RunOutcome,
};
pub use summary::{
    clt_scaled_errors, clt_summary, consistency_summary, regression_truth, studentize, Summary,
    REGRESSION_FIELDS,
};
pub use table::EstimateTable;
