//! Configuration, parallel execution and result files for each experiment kind.

mod config;
mod output;
mod run;

pub use config::{default_dt, ExperimentConfig, ExperimentKind, InitSpec};
pub use output::{
    emit_results, render, CONSTANTS_FILE, DISTANCE_NOTE, MANIFEST_FILE, REPORTS_FILE, REPORTS_JSON_FILE,
    SAMPLES_FILE,
};
pub use run::{run_experiment, ConstantRow, Outcome, ResultSet, SampleRow};
