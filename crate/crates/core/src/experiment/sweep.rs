use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::config::{DataSpec, ExperimentConfig, Method};
use super::runner::{run_method, CvSettings, Outcome, RunResult};
use super::synthetic::generate_synthetic_pool;
use crate::corruption::{corrupt_pool, CorruptionSpec};
use crate::data::{load_csv, Dataset, SourcePool};
use crate::error::{Error, Result};
use crate::rng;

const DATA_TAG: u64 = 1;
const CORRUPTION_TAG: u64 = 2;
const SELECTION_TAG: u64 = 3;

/// Seed of repeat `repeat` under master seed `seed`.
pub fn repeat_seed(master: u64, repeat: usize) -> u64 {
    rng::derive_seed(master, repeat as u64)
}

/// Clean pool and test set of one repeat.
pub fn load_data(config: &ExperimentConfig, repeat_seed: u64) -> Result<(SourcePool, Dataset)> {
    match &config.data {
        DataSpec::Synthetic(spec) => generate_synthetic_pool(spec, rng::derive_seed(repeat_seed, DATA_TAG)),
        DataSpec::CsvPaths(paths) => {
            let load = |p: &PathBuf| load_csv(p, &paths.label_column, paths.label_encoding);
            let sources = paths.sources.iter().map(load).collect::<Result<Vec<_>>>()?;
            let pool = SourcePool::new(sources, load(&paths.reference)?)?;
            let test = load(&paths.test)?;
            if test.n_features() != pool.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: pool.n_features(),
                    actual: test.n_features(),
                });
            }
            Ok((pool, test))
        }
    }
}

/// Apply the configured corruption to `n_corrupted` sources.
pub fn corrupted_pool(
    config: &ExperimentConfig,
    clean: &SourcePool,
    n_corrupted: usize,
    repeat_seed: u64,
) -> Result<SourcePool> {
    match &config.corruption {
        None if n_corrupted == 0 => Ok(clean.clone()),
        None => Err(Error::InvalidArgument(
            "corrupted sources requested without a corruption config".into(),
        )),
        Some(c) => {
            let spec = CorruptionSpec::new(c.kind, c.proportion, rng::derive_seed(repeat_seed, CORRUPTION_TAG))?;
            Ok(corrupt_pool(clean, n_corrupted, &spec, rng::derive_seed(repeat_seed, SELECTION_TAG))?.0)
        }
    }
}

/// One cell of the sweep: `method` on repeat `repeat` with `n_corrupted` bad sources.
pub fn run_cell(config: &ExperimentConfig, method: Method, n_corrupted: usize, repeat: usize) -> Result<Outcome> {
    let seed = repeat_seed(config.seed, repeat);
    let (clean, test) = load_data(config, seed)?;
    let pool = corrupted_pool(config, &clean, n_corrupted, seed)?;
    let mut out = run_method(&pool, &test, &CvSettings::from_config(config, seed), method)?;
    out.result.n_corrupted = n_corrupted;
    out.result.repeat = repeat;
    Ok(out)
}

/// Every method on every corrupted-source count and repeat. Rows are ordered
/// by method (as listed in the config), then count, then repeat.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<RunResult>> {
    config.validate()?;
    let n_grid = config.n_grid();
    let mut cells: Vec<(usize, usize, RunResult)> = Vec::new();
    for repeat in 0..config.repeats {
        let seed = repeat_seed(config.seed, repeat);
        let (clean, test) = load_data(config, seed)?;
        let settings = CvSettings::from_config(config, seed);
        for (ni, &n) in n_grid.iter().enumerate() {
            let pool = corrupted_pool(config, &clean, n, seed)?;
            for (mi, &method) in config.methods.iter().enumerate() {
                let mut result = run_method(&pool, &test, &settings, method)?.result;
                result.n_corrupted = n;
                result.repeat = repeat;
                cells.push((mi, ni, result));
            }
        }
    }
    cells.sort_by_key(|(mi, ni, r)| (*mi, *ni, r.repeat));
    Ok(cells.into_iter().map(|(_, _, r)| r).collect())
}

/// Mean and sample standard deviation of the test error in one (method, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: Method,
    pub n_corrupted: usize,
    pub count: usize,
    pub mean_test_error: f64,
    pub std_test_error: f64,
}

/// Per-cell statistics in order of first appearance.
pub fn summarize(results: &[RunResult]) -> Vec<CellSummary> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in results {
        if !keys.contains(&(r.method, r.n_corrupted)) {
            keys.push((r.method, r.n_corrupted));
        }
    }
    keys.into_iter()
        .map(|(method, n)| {
            let errs: Vec<f64> = results
                .iter()
                .filter(|r| r.method == method && r.n_corrupted == n)
                .map(|r| r.test_error)
                .collect();
            let count = errs.len();
            let mean = errs.iter().sum::<f64>() / count as f64;
            let std = if count > 1 {
                (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
            } else {
                0.0
            };
            CellSummary {
                method,
                n_corrupted: n,
                count,
                mean_test_error: mean,
                std_test_error: std,
            }
        })
        .collect()
}
