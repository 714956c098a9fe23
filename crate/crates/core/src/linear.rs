//! Linear predictors, per-sample losses and the weighted regularized ERM
//! trainer.
//!
//! Training minimizes
//!
//! ```text
//! sum_j  weight_j * loss(w . x_j + b, y_j)  +  (ridge / 2) * |w|^2
//! ```
//!
//! over `(w, b)` by full-batch gradient descent from zero. For an
//! alpha-weighted pool, `weight_j = alpha_i / m_i` for every sample of
//! source `i`. The bias is not regularized.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, SourcePool};
use crate::error::{Error, Result};
use crate::weights::SimplexWeights;

/// Threshold of the Huber-type logistic loss, `1.345^2`.
pub const HUBER_THRESHOLD: f64 = 1.345 * 1.345;

/// `h(x) = sign(w . x + b)` with a logistic probability score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearPredictor {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("predictor parameters must be finite".into()));
        }
        Ok(LinearPredictor { weights, bias })
    }

    pub fn zeros(n_features: usize) -> Self {
        LinearPredictor {
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    /// Parameters packed as `[w..., b]`.
    pub fn from_params(params: &[f64]) -> Self {
        let (w, b) = params.split_at(params.len() - 1);
        LinearPredictor {
            weights: w.to_vec(),
            bias: b[0],
        }
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                actual,
            });
        }
        Ok(())
    }

    pub fn score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.score_unchecked(x))
    }

    fn score_unchecked(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    /// Predicted label; a zero score is classified as positive.
    pub fn predict_label(&self, x: ArrayView1<'_, f64>) -> Result<Label> {
        Ok(Label::of_score(self.score(x)?))
    }

    /// Logistic probability of the positive class.
    pub fn probability(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(sigmoid(self.score(x)?))
    }

    /// Labels for every row of a dataset.
    pub fn predict(&self, data: &Dataset) -> Result<Vec<Label>> {
        self.check_dim(data.n_features())?;
        Ok(data
            .features()
            .outer_iter()
            .map(|x| Label::of_score(self.score_unchecked(x)))
            .collect())
    }

    /// Number of rows whose predicted label differs from the given label.
    pub fn count_errors(&self, data: &Dataset) -> Result<usize> {
        Ok(self
            .predict(data)?
            .into_iter()
            .zip(data.labels())
            .filter(|(p, y)| p != *y)
            .count())
    }

    /// JSON object `{"weights":[...],"bias":b}` with 17 significant digits.
    pub fn to_json(&self) -> String {
        let weights: Vec<String> = self.weights.iter().map(|w| format!("{w:.16e}")).collect();
        format!(
            "{{\"weights\":[{}],\"bias\":{:.16e}}}",
            weights.join(","),
            self.bias
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: LinearPredictor = serde_json::from_str(text)?;
        LinearPredictor::new(raw.weights, raw.bias)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(t))` without overflow.
pub fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Huber-type tempering of a nonnegative loss value: identity up to `c`,
/// `2 sqrt(c l) - c` above it.
pub fn huber_temper(l: f64, c: f64) -> f64 {
    if l <= c {
        l
    } else {
        2.0 * (c * l).sqrt() - c
    }
}

/// Per-sample surrogate losses, as functions of the score `z = w . x + b`
/// and a signed label `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Logistic,
    HuberLogistic { c: f64 },
    Squared,
}

impl Loss {
    pub fn huber() -> Self {
        Loss::HuberLogistic { c: HUBER_THRESHOLD }
    }

    pub fn value(self, z: f64, y: f64) -> f64 {
        match self {
            Loss::Logistic => softplus(-y * z),
            Loss::HuberLogistic { c } => huber_temper(softplus(-y * z), c),
            Loss::Squared => (z - y) * (z - y),
        }
    }

    /// Derivative with respect to the score.
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Loss::Logistic => -y * sigmoid(-y * z),
            Loss::HuberLogistic { c } => {
                let l = softplus(-y * z);
                let outer = if l <= c { 1.0 } else { (c / l).sqrt() };
                -y * sigmoid(-y * z) * outer
            }
            Loss::Squared => 2.0 * (z - y),
        }
    }
}

/// `log(1 + exp(-y (w . x + b)))`.
pub fn logistic_loss(predictor: &LinearPredictor, x: ArrayView1<'_, f64>, y: Label) -> Result<f64> {
    let z = predictor.score(x)?;
    Ok(Loss::Logistic.value(z, y.sign()))
}

/// Fraction of misclassified samples.
pub fn zero_one_error(predictor: &LinearPredictor, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("cannot score an empty dataset"));
    }
    Ok(predictor.count_errors(data)? as f64 / data.n_samples() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed(f64),
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub ridge_strength: f64,
    pub max_iterations: usize,
    /// Stop when the relative objective change of one step falls below this.
    pub tolerance: f64,
    pub step_rule: StepRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            ridge_strength: 1e-3,
            max_iterations: 50_000,
            tolerance: 1e-10,
            step_rule: StepRule::Backtracking,
        }
    }
}

impl TrainConfig {
    pub fn with_ridge(ridge_strength: f64) -> Self {
        TrainConfig {
            ridge_strength,
            ..TrainConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || !(self.ridge_strength >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid train config {self:?}")));
        }
        if let StepRule::Fixed(s) = self.step_rule {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid fixed step {s}")));
            }
        }
        Ok(())
    }
}

/// Samples with signed targets and nonnegative per-sample weights.
#[derive(Debug, Clone)]
pub struct WeightedSamples {
    features: Array2<f64>,
    targets: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSamples {
    /// Merge datasets, giving every sample of part `k` the weight `parts[k].1`.
    /// Parts with zero weight are left out entirely.
    pub fn from_parts(parts: &[(&Dataset, f64)]) -> Result<Self> {
        let d = parts
            .first()
            .map(|(ds, _)| ds.n_features())
            .ok_or(Error::Empty("no training data"))?;
        let mut views = Vec::new();
        let mut targets = Vec::new();
        let mut weights = Vec::new();
        for &(ds, weight) in parts {
            ds.check_dim(d)?;
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid sample weight {weight}")));
            }
            if weight == 0.0 || ds.is_empty() {
                continue;
            }
            views.push(ds.features().view());
            targets.extend(ds.labels().iter().map(|l| l.sign()));
            weights.extend(std::iter::repeat_n(weight, ds.n_samples()));
        }
        if views.is_empty() {
            return Err(Error::Empty("all training weights are zero"));
        }
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .as_standard_layout()
            .into_owned();
        Ok(WeightedSamples {
            features,
            targets,
            weights,
        })
    }

    /// Explicit per-sample targets and weights.
    pub fn new(features: Array2<f64>, targets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if targets.len() != features.nrows() || weights.len() != features.nrows() {
            return Err(Error::LabelCountMismatch {
                labels: targets.len().min(weights.len()),
                rows: features.nrows(),
            });
        }
        Ok(WeightedSamples {
            features: features.as_standard_layout().into_owned(),
            targets,
            weights,
        })
    }

    /// The alpha-weighted pool: every sample of source `i` gets `alpha_i / m_i`.
    pub fn from_pool(pool: &SourcePool, alpha: &SimplexWeights) -> Result<Self> {
        if alpha.len() != pool.n_sources() {
            return Err(Error::DimensionMismatch {
                expected: pool.n_sources(),
                actual: alpha.len(),
            });
        }
        let parts: Vec<(&Dataset, f64)> = pool
            .sources()
            .iter()
            .zip(alpha.as_slice())
            .map(|(s, &a)| (s, a / s.n_samples() as f64))
            .collect();
        WeightedSamples::from_parts(&parts)
    }

    /// Uniform weights `1/m` over a single dataset.
    pub fn uniform(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("training dataset"));
        }
        WeightedSamples::from_parts(&[(data, 1.0 / data.n_samples() as f64)])
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    fn scores(&self, params: &[f64]) -> Array1<f64> {
        let d = self.n_features();
        let w = ArrayView1::from(&params[..d]);
        let mut z = self.features.dot(&w);
        z += params[d];
        z
    }

    fn ridge_term(&self, params: &[f64], ridge: f64) -> f64 {
        let d = self.n_features();
        0.5 * ridge * params[..d].iter().map(|w| w * w).sum::<f64>()
    }

    /// Regularized weighted objective at `params = [w..., b]`.
    pub fn objective(&self, loss: Loss, ridge: f64, params: &[f64]) -> f64 {
        let z = self.scores(params);
        let data_term: f64 = z
            .iter()
            .zip(&self.targets)
            .zip(&self.weights)
            .map(|((&z, &y), &w)| w * loss.value(z, y))
            .sum();
        data_term + self.ridge_term(params, ridge)
    }

    /// Gradient of [`objective`](Self::objective) with respect to `[w..., b]`.
    pub fn gradient(&self, loss: Loss, ridge: f64, params: &[f64]) -> Vec<f64> {
        let d = self.n_features();
        let z = self.scores(params);
        let coef: Array1<f64> = z
            .iter()
            .zip(&self.targets)
            .zip(&self.weights)
            .map(|((&z, &y), &w)| w * loss.derivative(z, y))
            .collect();
        let mut grad = self.features.t().dot(&coef).to_vec();
        for (g, w) in grad.iter_mut().zip(&params[..d]) {
            *g += ridge * w;
        }
        grad.push(coef.sum());
        grad
    }
}

/// Minimize the weighted objective from the zero predictor.
pub fn train(samples: &WeightedSamples, loss: Loss, config: &TrainConfig) -> Result<LinearPredictor> {
    config.validate()?;
    let ridge = config.ridge_strength;
    let mut params = vec![0.0; samples.n_features() + 1];
    let mut value = samples.objective(loss, ridge, &params);
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    let mut step = 1.0;

    for iteration in 1..=config.max_iterations {
        let grad = samples.gradient(loss, ridge, &params);
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        if grad_sq == 0.0 {
            break;
        }
        let trial = |t: f64| -> Vec<f64> { params.iter().zip(&grad).map(|(p, g)| p - t * g).collect() };

        let (next, next_value) = match config.step_rule {
            StepRule::Fixed(t) => {
                let next = trial(t);
                let v = samples.objective(loss, ridge, &next);
                (next, v)
            }
            StepRule::Backtracking => {
                step *= 2.0;
                loop {
                    let next = trial(step);
                    let v = samples.objective(loss, ridge, &next);
                    if v.is_finite() && v <= value - 0.5 * step * grad_sq {
                        break (next, v);
                    }
                    step *= 0.5;
                    if step < 1e-20 {
                        // No representable decrease along the gradient.
                        return LinearPredictor::new(
                            params[..params.len() - 1].to_vec(),
                            params[params.len() - 1],
                        );
                    }
                }
            }
        };
        if !next_value.is_finite() {
            return Err(Error::NonFiniteObjective { iteration });
        }
        let change = (value - next_value).abs();
        let scale = value.abs();
        params = next;
        value = next_value;
        if scale == 0.0 || change <= config.tolerance * scale {
            break;
        }
    }
    LinearPredictor::new(params[..params.len() - 1].to_vec(), params[params.len() - 1])
}

/// Alpha-weighted ERM over the sources of a pool.
pub fn train_weighted_erm(
    pool: &SourcePool,
    alpha: &SimplexWeights,
    loss: Loss,
    config: &TrainConfig,
) -> Result<LinearPredictor> {
    let samples = WeightedSamples::from_pool(pool, alpha)?;
    train(&samples, loss, config)
}

/// Plain regularized ERM on one dataset.
pub fn train_single(data: &Dataset, loss: Loss, config: &TrainConfig) -> Result<LinearPredictor> {
    train(&WeightedSamples::uniform(data)?, loss, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn logistic_loss_values() {
        let x = array![1.0, -2.0];
        let zero = LinearPredictor::zeros(2);
        let v = logistic_loss(&zero, x.view(), Label::Negative).unwrap();
        assert!(close(v, std::f64::consts::LN_2, 1e-15));

        // margin y (w.x + b) = +50
        let p = LinearPredictor::new(vec![50.0, 0.0], 0.0).unwrap();
        let v = logistic_loss(&p, array![1.0, 0.0].view(), Label::Positive).unwrap();
        assert!((0.0..1e-20).contains(&v));

        // margin -3: log(1 + e^3), high-precision value 3.048587351573742
        let v = logistic_loss(&p, array![0.06, 0.0].view(), Label::Negative).unwrap();
        assert!(close(v, 3.048_587_351_573_742, 1e-12));

        // very negative margins do not overflow
        let v = logistic_loss(&p, array![1000.0, 0.0].view(), Label::Negative).unwrap();
        assert!(close(v, 50_000.0, 1e-9));

        assert!(matches!(
            logistic_loss(&p, array![1.0].view(), Label::Positive),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_one_error_cases() {
        let data = Dataset::from_signed(
            array![[1.0], [2.0], [-1.0], [-3.0], [0.5], [-0.5]],
            &[1.0, 1.0, -1.0, -1.0, -1.0, 1.0],
        )
        .unwrap();
        let right = LinearPredictor::new(vec![1.0], 0.0).unwrap();
        // points 4 and 5 are misclassified by sign(x)
        assert!(close(zero_one_error(&right, &data).unwrap(), 2.0 / 6.0, 1e-15));
        let flipped = LinearPredictor::new(vec![-1.0], 0.0).unwrap();
        assert!(close(zero_one_error(&flipped, &data).unwrap(), 4.0 / 6.0, 1e-15));

        // hand enumeration for w = 0.3, b = -0.4: scores -0.1, 0.2, -0.7, -1.3, -0.25, -0.55
        // predictions -,+,-,-,-,- vs labels +,+,-,-,-,+ -> errors at rows 0 and 5
        let p = LinearPredictor::new(vec![0.3], -0.4).unwrap();
        assert!(close(zero_one_error(&p, &data).unwrap(), 2.0 / 6.0, 1e-15));

        let sep = Dataset::from_signed(array![[1.0], [-1.0]], &[1.0, -1.0]).unwrap();
        assert_eq!(zero_one_error(&right, &sep).unwrap(), 0.0);
        assert_eq!(zero_one_error(&flipped, &sep).unwrap(), 1.0);

        let empty = Dataset::new(Array2::zeros((0, 1)), vec![]).unwrap();
        assert!(zero_one_error(&right, &empty).is_err());
    }

    #[test]
    fn zero_score_is_positive() {
        let p = LinearPredictor::zeros(3);
        assert_eq!(p.predict_label(array![1.0, 2.0, 3.0].view()).unwrap(), Label::Positive);
    }

    #[test]
    fn json_round_trip() {
        let p = LinearPredictor::new(vec![0.1, -2.5e-8, 3.0], 1.0 / 3.0).unwrap();
        let text = p.to_json();
        assert!(text.starts_with("{\"weights\":["));
        assert_eq!(LinearPredictor::from_json(&text).unwrap(), p);
    }

    #[test]
    fn squared_loss_matches_least_squares() {
        // y = 2x - 1 exactly; with zero ridge the fit recovers it
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let samples = WeightedSamples::new(x, vec![-1.0, 1.0, 3.0, 5.0], vec![0.25; 4]).unwrap();
        let p = train(&samples, Loss::Squared, &TrainConfig::with_ridge(0.0)).unwrap();
        assert!(close(p.weights[0], 2.0, 1e-5), "{p:?}");
        assert!(close(p.bias, -1.0, 1e-5), "{p:?}");
    }

    #[test]
    fn fixed_step_rule_converges_on_quadratic() {
        let x = array![[1.0], [-1.0]];
        let samples = WeightedSamples::new(x, vec![1.0, -1.0], vec![0.5, 0.5]).unwrap();
        let config = TrainConfig {
            step_rule: StepRule::Fixed(0.1),
            ..TrainConfig::with_ridge(0.0)
        };
        let p = train(&samples, Loss::Squared, &config).unwrap();
        assert!(close(p.weights[0], 1.0, 1e-4));
    }

    #[test]
    fn rejects_bad_config() {
        let x = array![[1.0]];
        let samples = WeightedSamples::new(x, vec![1.0], vec![1.0]).unwrap();
        let bad = TrainConfig {
            tolerance: 0.0,
            ..TrainConfig::default()
        };
        assert!(train(&samples, Loss::Logistic, &bad).is_err());
    }
}
