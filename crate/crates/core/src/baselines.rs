//! Comparison methods: robust aggregation of per-source models, the
//! Huber-type logistic loss and per-source standardization.

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, SourcePool};
use crate::error::{Error, Result};
use crate::linear::{huber_temper, train_single, LinearPredictor, Loss, TrainConfig};
use crate::linear::HUBER_THRESHOLD;

const WEISZFELD_EPSILON: f64 = 1e-10;
const WEISZFELD_MAX_ITERATIONS: usize = 10_000;
/// Default objective tolerance for [`geometric_median`].
pub const WEISZFELD_TOLERANCE: f64 = 1e-10;
const DEGENERATE_STD: f64 = 1e-12;

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let dim = points.first().ok_or(Error::Empty("no points to aggregate"))?.len();
    for p in points {
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.len(),
            });
        }
    }
    Ok(dim)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sum of Euclidean distances from `z` to every point.
pub fn sum_of_distances(z: &[f64], points: &[Vec<f64>]) -> f64 {
    points.iter().map(|p| distance(z, p)).sum()
}

/// Weiszfeld iteration from the centroid. Distances are floored at 1e-10 so
/// an iterate landing on a data point stays well defined. Stops when the
/// relative objective change drops below `tolerance`.
pub fn geometric_median(points: &[Vec<f64>], tolerance: f64) -> Result<Vec<f64>> {
    let dim = check_points(points)?;
    if points.len() == 1 {
        return Ok(points[0].clone());
    }
    let n = points.len() as f64;
    let mut z: Vec<f64> = (0..dim)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n)
        .collect();
    let mut value = sum_of_distances(&z, points);

    for _ in 0..WEISZFELD_MAX_ITERATIONS {
        let mut numerator = vec![0.0; dim];
        let mut denominator = 0.0;
        for p in points {
            let inv = 1.0 / distance(&z, p).max(WEISZFELD_EPSILON);
            denominator += inv;
            for (acc, v) in numerator.iter_mut().zip(p) {
                *acc += inv * v;
            }
        }
        let next: Vec<f64> = numerator.iter().map(|v| v / denominator).collect();
        let next_value = sum_of_distances(&next, points);
        let change = value - next_value;
        if next_value <= value {
            z = next;
            value = next_value;
        }
        if change.abs() <= tolerance * value.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // The smoothed iteration can stall a hair away from an optimal data point.
    for p in points {
        let v = sum_of_distances(p, points);
        if v < value {
            value = v;
            z = p.clone();
        }
    }
    Ok(z)
}

fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median of a nonempty list; even counts average the two middle values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("median of nothing"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(median_sorted(&v))
}

pub fn componentwise_median(points: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = check_points(points)?;
    (0..dim)
        .map(|j| median(&points.iter().map(|p| p[j]).collect::<Vec<_>>()))
        .collect()
}

/// Threshold the median of the models' positive-class probabilities at 0.5
/// (a median of exactly 0.5 gives `Positive`).
pub fn median_of_probabilities(models: &[LinearPredictor], x: ArrayView1<'_, f64>) -> Result<Label> {
    if models.is_empty() {
        return Err(Error::Empty("no models"));
    }
    let probs = models
        .iter()
        .map(|m| m.probability(x))
        .collect::<Result<Vec<_>>>()?;
    threshold_median(&probs)
}

/// `Positive` when the median probability is at least 0.5.
pub fn threshold_median(probabilities: &[f64]) -> Result<Label> {
    Ok(if median(probabilities)? >= 0.5 {
        Label::Positive
    } else {
        Label::Negative
    })
}

/// Test error of the median-of-probabilities ensemble.
pub fn median_of_probabilities_error(models: &[LinearPredictor], data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("cannot score an empty dataset"));
    }
    let mut errors = 0usize;
    for (x, y) in data.samples() {
        if median_of_probabilities(models, x)? != y {
            errors += 1;
        }
    }
    Ok(errors as f64 / data.n_samples() as f64)
}

/// Huber-type logistic loss with threshold `c`.
pub fn huber_logistic_loss(
    predictor: &LinearPredictor,
    x: ArrayView1<'_, f64>,
    y: Label,
    c: f64,
) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("huber threshold must be positive, got {c}")));
    }
    let z = predictor.score(x)?;
    Ok(huber_temper(Loss::Logistic.value(z, y.sign()), c))
}

/// Huber-type logistic loss at the default threshold `1.345^2`.
pub fn huber_logistic_loss_default(
    predictor: &LinearPredictor,
    x: ArrayView1<'_, f64>,
    y: Label,
) -> Result<f64> {
    huber_logistic_loss(predictor, x, y, HUBER_THRESHOLD)
}

/// Per-feature mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_normalization(data: &Dataset) -> Result<NormalizationStats> {
    if data.is_empty() {
        return Err(Error::Empty("cannot fit normalization on an empty dataset"));
    }
    let features = data.features();
    let mean = features
        .mean_axis(Axis(0))
        .ok_or(Error::Empty("cannot fit normalization on an empty dataset"))?;
    let std = features.std_axis(Axis(0), 0.0);
    Ok(NormalizationStats {
        mean: mean.to_vec(),
        std: std.to_vec(),
    })
}

/// `(x - mean) / std` per feature; features with `std < 1e-12` become 0.
pub fn apply_normalization(data: &Dataset, stats: &NormalizationStats) -> Result<Dataset> {
    data.check_dim(stats.mean.len())?;
    if stats.std.len() != stats.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: stats.mean.len(),
            actual: stats.std.len(),
        });
    }
    let mut out = Array2::zeros(data.features().raw_dim());
    for (mut row, x) in out.outer_iter_mut().zip(data.features().outer_iter()) {
        for j in 0..x.len() {
            row[j] = if stats.std[j] < DEGENERATE_STD {
                0.0
            } else {
                (x[j] - stats.mean[j]) / stats.std[j]
            };
        }
    }
    data.with_features(out)
}

/// Standardize a dataset by its own statistics.
pub fn self_normalize(data: &Dataset) -> Result<Dataset> {
    apply_normalization(data, &fit_normalization(data)?)
}

/// One regularized logistic model per source, each trained on that source only.
pub fn train_local_models(pool: &SourcePool, config: &TrainConfig) -> Result<Vec<LinearPredictor>> {
    pool.sources()
        .iter()
        .map(|s| train_single(s, Loss::Logistic, config))
        .collect()
}

/// `(w, b)` of each model as one vector.
pub fn stack_parameters(models: &[LinearPredictor]) -> Vec<Vec<f64>> {
    models.iter().map(LinearPredictor::params).collect()
}

/// Geometric median of the models' `(w, b)` vectors as a predictor.
pub fn geometric_median_predictor(models: &[LinearPredictor]) -> Result<LinearPredictor> {
    let z = geometric_median(&stack_parameters(models), WEISZFELD_TOLERANCE)?;
    Ok(LinearPredictor::from_params(&z))
}

/// Component-wise median of the models' `(w, b)` vectors as a predictor.
pub fn componentwise_median_predictor(models: &[LinearPredictor]) -> Result<LinearPredictor> {
    let z = componentwise_median(&stack_parameters(models))?;
    Ok(LinearPredictor::from_params(&z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn geometric_median_examples() {
        let same = vec![vec![1.5, -2.0]; 4];
        assert_eq!(geometric_median(&same, 1e-10).unwrap(), vec![1.5, -2.0]);

        let line = vec![vec![0.0], vec![0.0], vec![10.0]];
        let z = geometric_median(&line, 1e-10).unwrap();
        assert!(z[0].abs() < 1e-9, "{z:?}");

        let h = 3f64.sqrt() / 2.0;
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]];
        let z = geometric_median(&tri, 1e-12).unwrap();
        assert!((z[0] - 0.5).abs() < 1e-6 && (z[1] - h / 3.0).abs() < 1e-6, "{z:?}");

        assert!(geometric_median(&[], 1e-10).is_err());
        assert!(geometric_median(&[vec![1.0], vec![1.0, 2.0]], 1e-10).is_err());
    }

    #[test]
    fn componentwise_median_examples() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![5.0, 5.0]];
        assert_eq!(componentwise_median(&pts).unwrap(), vec![1.0, 1.0]);
        assert_eq!(componentwise_median(&[vec![3.0, 4.0]]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(componentwise_median(&[vec![0.0], vec![2.0]]).unwrap(), vec![1.0]);
        assert!(componentwise_median(&[]).is_err());
    }

    fn model_with_probability(p: f64) -> LinearPredictor {
        // score = logit(p) at x = 0 through the bias
        LinearPredictor::new(vec![0.0], (p / (1.0 - p)).ln()).unwrap()
    }

    #[test]
    fn median_of_probabilities_examples() {
        let x = array![0.0];
        let models: Vec<_> = [0.2, 0.6, 0.9].iter().map(|&p| model_with_probability(p)).collect();
        assert_eq!(median_of_probabilities(&models, x.view()).unwrap(), Label::Positive);

        assert_eq!(threshold_median(&[0.2, 0.6, 0.9]).unwrap(), Label::Positive);
        assert_eq!(median(&[0.4, 0.6]).unwrap(), 0.5);
        assert_eq!(threshold_median(&[0.4, 0.6]).unwrap(), Label::Positive);
        assert_eq!(threshold_median(&[0.1, 0.49]).unwrap(), Label::Negative);

        // the middle model scores exactly 0 -> probability exactly 0.5
        let tie: Vec<_> = [-5.0, 0.0, 5.0]
            .iter()
            .map(|&b| LinearPredictor::new(vec![0.0], b).unwrap())
            .collect();
        assert_eq!(median_of_probabilities(&tie, x.view()).unwrap(), Label::Positive);

        let m = LinearPredictor::new(vec![-2.0], 0.5).unwrap();
        let copies = vec![m.clone(); 3];
        for v in [-1.0, 0.0, 0.25, 3.0] {
            let x = array![v];
            assert_eq!(
                median_of_probabilities(&copies, x.view()).unwrap(),
                m.predict_label(x.view()).unwrap()
            );
        }
        assert!(median_of_probabilities(&[], x.view()).is_err());
    }

    #[test]
    fn huber_branches() {
        let c = HUBER_THRESHOLD;
        assert!((c - 1.809_025).abs() < 1e-15);
        let zero = LinearPredictor::zeros(1);
        let v = huber_logistic_loss_default(&zero, array![3.0].view(), Label::Positive).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((huber_temper(c, c) - c).abs() < 1e-15);
        assert!((huber_temper(4.0 * c, c) - 5.427_075).abs() < 1e-12);
        assert!(huber_logistic_loss(&zero, array![3.0].view(), Label::Positive, 0.0).is_err());
    }

    #[test]
    fn normalization_standardizes() {
        let d = Dataset::from_signed(
            array![[1.0, 5.0, 2.0], [2.0, 5.0, -1.0], [4.0, 5.0, 0.5], [9.0, 5.0, 3.0]],
            &[1.0, -1.0, 1.0, -1.0],
        )
        .unwrap();
        let stats = fit_normalization(&d).unwrap();
        let n = apply_normalization(&d, &stats).unwrap();
        let mean = n.features().mean_axis(Axis(0)).unwrap();
        let var = n.features().var_axis(Axis(0), 0.0);
        for j in [0, 2] {
            assert!(mean[j].abs() <= 1e-10);
            assert!((var[j] - 1.0).abs() <= 1e-10);
        }
        assert!(n.features().column(1).iter().all(|&v| v == 0.0));
        assert_eq!(n.labels(), d.labels());

        let empty = Dataset::new(Array2::zeros((0, 3)), vec![]).unwrap();
        assert!(fit_normalization(&empty).is_err());
    }
}
