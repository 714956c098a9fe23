//! Config-driven experiments: synthetic data, cross-validated training of
//! the proposed method and the baselines, sweeps over corruption levels and
//! repeats, and CSV/JSON output.

mod config;
mod output;
mod runner;
mod sweep;
mod synthetic;

pub use config::{
    default_lambda_grid, default_ridge_grid, CorruptionConfig, CsvPaths, DataSpec, ExperimentConfig, Method,
    SyntheticSpec,
};
pub use output::{companion_paths, results_csv, sidecar_json, summary_csv, write_outputs};
pub use runner::{pool_discrepancies, run_baseline, run_method, run_ours, CvSettings, FittedModel, Outcome, RunResult};
pub use sweep::{corrupted_pool, load_data, repeat_seed, run_cell, run_sweep, summarize, CellSummary};
pub use synthetic::{generate_synthetic_pool, sample_clean};
