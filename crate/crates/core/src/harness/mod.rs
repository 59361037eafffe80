//! Config loading, scenario construction, experiment execution and result
//! files.

mod config;
mod run;
mod scenario;

pub use config::{
    load_config, BandwidthSpec, DatasetSpec, ModelKind, OutputSpec, RunConfig, WorldSpec, DEFAULT_AP_CAPACITY_MBPS,
    DEFAULT_BACKBONE_MBPS, OUTPUT_ROOT_ENV, REQUIRED_FIELDS,
};
pub use run::{
    compare_runs, execute, expand_grid, format_comparison, run_experiment, run_sweep, ComparisonRow, RoundRow, RunLog,
    Summary, CONFIG_FILE, CSV_HEADER, ROUNDS_FILE, SUMMARY_FILE,
};
pub use scenario::{build_world, model_spec};
