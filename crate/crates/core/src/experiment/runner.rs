use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::baselines::{
    apply_normalization, componentwise_median_predictor, fit_normalization, geometric_median_predictor,
    median_of_probabilities_error, self_normalize, NormalizationStats,
};
use crate::data::{kfold_indices, Dataset, SourcePool};
use crate::discrepancy::{default_relax_config, empirical_discrepancy};
use crate::error::{Error, Result};
use crate::linear::{train, train_single, zero_one_error, LinearPredictor, Loss, TrainConfig, WeightedSamples};
use crate::rng;
use crate::weights::{solve_weights, SimplexWeights, WeightProblem};

const FOLD_TAG: u64 = 4;

/// Hyperparameter grids and the seed of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSettings {
    pub lambda_grid: Vec<f64>,
    pub ridge_grid: Vec<f64>,
    pub cv_folds: usize,
    pub seed: u64,
}

impl CvSettings {
    pub fn from_config(config: &ExperimentConfig, seed: u64) -> Self {
        CvSettings {
            lambda_grid: config.lambda_grid.clone(),
            ridge_grid: config.ridge_grid.clone(),
            cv_folds: config.cv_folds,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub n_corrupted: usize,
    pub repeat: usize,
    pub seed: u64,
    pub test_error: f64,
    pub selected_lambda: Option<f64>,
    pub selected_ridge: f64,
    pub alpha: Option<SimplexWeights>,
    pub discrepancies: Option<Vec<f64>>,
    #[serde(skip)]
    pub wall_time: f64,
}

/// A trained predictor of any method.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Linear(LinearPredictor),
    MedianOfProbabilities(Vec<LinearPredictor>),
    /// Inputs are standardized with `stats` before prediction.
    Standardized {
        predictor: LinearPredictor,
        stats: NormalizationStats,
    },
}

impl FittedModel {
    pub fn error(&self, data: &Dataset) -> Result<f64> {
        match self {
            FittedModel::Linear(p) => zero_one_error(p, data),
            FittedModel::MedianOfProbabilities(models) => median_of_probabilities_error(models, data),
            FittedModel::Standardized { predictor, stats } => {
                zero_one_error(predictor, &apply_normalization(data, stats)?)
            }
        }
    }

    fn count_errors(&self, data: &Dataset) -> Result<usize> {
        Ok((self.error(data)? * data.n_samples() as f64).round() as usize)
    }

    /// The linear predictor, when the method produces a single one.
    pub fn linear(&self) -> Option<&LinearPredictor> {
        match self {
            FittedModel::Linear(p) | FittedModel::Standardized { predictor: p, .. } => Some(p),
            FittedModel::MedianOfProbabilities(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub result: RunResult,
    pub model: FittedModel,
}

fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// `(train, validation)` splits of the reference sample.
fn reference_folds(reference: &Dataset, settings: &CvSettings) -> Result<Vec<(Dataset, Dataset)>> {
    let folds = kfold_indices(
        reference.n_samples(),
        settings.cv_folds,
        rng::derive_seed(settings.seed, FOLD_TAG),
    )?;
    Ok((0..folds.len())
        .map(|k| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            (reference.select(&train), reference.select(&folds[k]))
        })
        .collect())
}

/// Discrepancy of every source of `pool` to its reference.
pub fn pool_discrepancies(pool: &SourcePool) -> Result<Vec<f64>> {
    let cfg = default_relax_config();
    pool.sources()
        .iter()
        .map(|s| Ok(empirical_discrepancy(s, pool.reference(), &cfg)?.value))
        .collect()
}

/// Index of the smallest value; the first one wins ties.
fn argmin(values: &[usize]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// The proposed method: the reference joins the pool as an extra source,
/// `lambda` and the ridge strength are chosen by cross-validation on the
/// reference, and the final model is the alpha-weighted ERM on the full pool.
pub fn run_ours(pool: &SourcePool, test: &Dataset, settings: &CvSettings) -> Result<Outcome> {
    let start = Instant::now();
    let lambdas = sorted_grid(&settings.lambda_grid)?;
    let ridges = sorted_grid(&settings.ridge_grid)?;
    let mut errors = vec![0usize; lambdas.len() * ridges.len()];

    if lambdas.len() * ridges.len() > 1 {
        for (train_ref, val) in reference_folds(pool.reference(), settings)? {
            let mut sources = pool.sources().to_vec();
            sources.push(train_ref.clone());
            let augmented = SourcePool::new(sources, train_ref)?;
            let discrepancies = pool_discrepancies(&augmented)?;
            let counts = augmented.sample_counts();
            let mut seen: HashMap<Vec<u64>, Vec<usize>> = HashMap::new();
            for (li, &lambda) in lambdas.iter().enumerate() {
                let problem = WeightProblem::new(discrepancies.clone(), counts.clone(), lambda)?;
                let alpha = solve_weights(&problem)?;
                let key: Vec<u64> = alpha.as_slice().iter().map(|a| a.to_bits()).collect();
                if !seen.contains_key(&key) {
                    let samples = WeightedSamples::from_pool(&augmented, &alpha)?;
                    let per_ridge = ridges
                        .iter()
                        .map(|&r| {
                            let model = train(&samples, Loss::Logistic, &TrainConfig::with_ridge(r))?;
                            model.count_errors(&val)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    seen.insert(key.clone(), per_ridge);
                }
                for (ri, e) in seen[&key].iter().enumerate() {
                    errors[li * ridges.len() + ri] += e;
                }
            }
        }
    }

    let best = argmin(&errors);
    let (lambda, ridge) = (lambdas[best / ridges.len()], ridges[best % ridges.len()]);
    let augmented = pool.with_reference_as_source();
    let discrepancies = pool_discrepancies(&augmented)?;
    let alpha = solve_weights(&WeightProblem::new(discrepancies.clone(), augmented.sample_counts(), lambda)?)?;
    let predictor = train(
        &WeightedSamples::from_pool(&augmented, &alpha)?,
        Loss::Logistic,
        &TrainConfig::with_ridge(ridge),
    )?;
    let model = FittedModel::Linear(predictor);
    Ok(Outcome {
        result: RunResult {
            method: Method::Ours,
            n_corrupted: 0,
            repeat: 0,
            seed: settings.seed,
            test_error: model.error(test)?,
            selected_lambda: Some(lambda),
            selected_ridge: ridge,
            alpha: Some(alpha),
            discrepancies: Some(discrepancies),
            wall_time: start.elapsed().as_secs_f64(),
        },
        model,
    })
}

/// Uniform per-sample weights over the sources and `reference`.
fn merged_samples(sources: &[Dataset], reference: &Dataset) -> Result<WeightedSamples> {
    let total: usize = sources.iter().map(Dataset::n_samples).sum::<usize>() + reference.n_samples();
    let w = 1.0 / total as f64;
    let mut parts: Vec<(&Dataset, f64)> = sources.iter().map(|s| (s, w)).collect();
    parts.push((reference, w));
    WeightedSamples::from_parts(&parts)
}

/// A comparison method. The ridge strength is chosen by cross-validation on
/// the reference; every method except `reference_only` also trains on the
/// sources, with the reference (or its training folds) as one more source.
pub fn run_baseline(pool: &SourcePool, test: &Dataset, settings: &CvSettings, method: Method) -> Result<Outcome> {
    let start = Instant::now();
    let ridges = sorted_grid(&settings.ridge_grid)?;

    let local_models: Vec<Vec<LinearPredictor>> = match method {
        Method::GeometricMedian | Method::ComponentwiseMedian | Method::MedianOfProbs => ridges
            .iter()
            .map(|&r| {
                let cfg = TrainConfig::with_ridge(r);
                pool.sources()
                    .iter()
                    .map(|s| train_single(s, Loss::Logistic, &cfg))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?,
        _ => Vec::new(),
    };
    let normalized_sources: Vec<Dataset> = if method == Method::BatchNorm {
        pool.sources().iter().map(self_normalize).collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let fit = |ri: usize, reference: &Dataset| -> Result<FittedModel> {
        let cfg = TrainConfig::with_ridge(ridges[ri]);
        Ok(match method {
            Method::Ours => {
                return Err(Error::InvalidArgument("`ours` is not a baseline".into()));
            }
            Method::ReferenceOnly => FittedModel::Linear(train_single(reference, Loss::Logistic, &cfg)?),
            Method::AllData => FittedModel::Linear(train(&merged_samples(pool.sources(), reference)?, Loss::Logistic, &cfg)?),
            Method::RobustLoss => FittedModel::Linear(train(&merged_samples(pool.sources(), reference)?, Loss::huber(), &cfg)?),
            Method::BatchNorm => {
                let own = self_normalize(reference)?;
                FittedModel::Standardized {
                    predictor: train(&merged_samples(&normalized_sources, &own)?, Loss::Logistic, &cfg)?,
                    stats: fit_normalization(reference)?,
                }
            }
            Method::GeometricMedian | Method::ComponentwiseMedian | Method::MedianOfProbs => {
                let mut models = local_models[ri].clone();
                models.push(train_single(reference, Loss::Logistic, &cfg)?);
                match method {
                    Method::GeometricMedian => FittedModel::Linear(geometric_median_predictor(&models)?),
                    Method::ComponentwiseMedian => FittedModel::Linear(componentwise_median_predictor(&models)?),
                    _ => FittedModel::MedianOfProbabilities(models),
                }
            }
        })
    };

    let mut errors = vec![0usize; ridges.len()];
    if ridges.len() > 1 {
        for (train_ref, val) in reference_folds(pool.reference(), settings)? {
            for (ri, e) in errors.iter_mut().enumerate() {
                *e += fit(ri, &train_ref)?.count_errors(&val)?;
            }
        }
    }
    let best = argmin(&errors);
    let model = fit(best, pool.reference())?;
    Ok(Outcome {
        result: RunResult {
            method,
            n_corrupted: 0,
            repeat: 0,
            seed: settings.seed,
            test_error: model.error(test)?,
            selected_lambda: None,
            selected_ridge: ridges[best],
            alpha: None,
            discrepancies: None,
            wall_time: start.elapsed().as_secs_f64(),
        },
        model,
    })
}

pub fn run_method(pool: &SourcePool, test: &Dataset, settings: &CvSettings, method: Method) -> Result<Outcome> {
    match method {
        Method::Ours => run_ours(pool, test, settings),
        other => run_baseline(pool, test, settings, other),
    }
}
