//! Source weights on the probability simplex.
//!
//! The weights minimize
//!
//! ```text
//! sum_i alpha_i d_i  +  lambda * sqrt(sum_i alpha_i^2 / m_i)
//! ```
//!
//! subject to `alpha >= 0`, `sum alpha = 1`, where `d_i` is the estimated
//! discrepancy of source `i` to the reference sample and `m_i` its size.
//! The same quantities feed the excess-risk bound evaluator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;
const NEGATIVE_TOLERANCE: f64 = -1e-12;

/// A point of the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    /// Validates nonnegativity (entries down to -1e-12 are clamped to 0) and
    /// a unit sum within 1e-9.
    pub fn new(mut alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Empty("simplex weights"));
        }
        for a in alpha.iter_mut() {
            if !a.is_finite() || *a < NEGATIVE_TOLERANCE {
                return Err(Error::InvalidArgument(format!("invalid simplex weight {a}")));
            }
            if *a < 0.0 {
                *a = 0.0;
            }
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!("weights sum to {sum}, not 1")));
        }
        Ok(SimplexWeights(alpha))
    }

    pub fn uniform(n: usize) -> Self {
        SimplexWeights(vec![1.0 / n as f64; n])
    }

    /// Weights proportional to the given positive counts.
    pub fn proportional(counts: &[usize]) -> Self {
        let total: usize = counts.iter().sum();
        SimplexWeights(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn vertex(n: usize, index: usize) -> Self {
        let mut alpha = vec![0.0; n];
        alpha[index] = 1.0;
        SimplexWeights(alpha)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SimplexWeights {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        SimplexWeights::new(v)
    }
}

impl From<SimplexWeights> for Vec<f64> {
    fn from(w: SimplexWeights) -> Vec<f64> {
        w.0
    }
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Result<SimplexWeights> {
    if v.is_empty() {
        return Err(Error::Empty("vector to project"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("cannot project a non-finite vector".into()));
    }
    Ok(SimplexWeights(project_unchecked(v)))
}

fn project_unchecked(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - theta).max(0.0)).collect();
    // Renormalize away the rounding error of the threshold.
    let sum: f64 = out.iter().sum();
    for a in &mut out {
        *a /= sum;
    }
    out
}

/// Inputs of the weight program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightProblem {
    pub discrepancies: Vec<f64>,
    pub sample_counts: Vec<usize>,
    pub lambda: f64,
}

impl WeightProblem {
    pub fn new(discrepancies: Vec<f64>, sample_counts: Vec<usize>, lambda: f64) -> Result<Self> {
        let problem = WeightProblem {
            discrepancies,
            sample_counts,
            lambda,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        if self.discrepancies.is_empty() {
            return Err(Error::Empty("weight problem has no sources"));
        }
        if self.discrepancies.len() != self.sample_counts.len() {
            return Err(Error::DimensionMismatch {
                expected: self.discrepancies.len(),
                actual: self.sample_counts.len(),
            });
        }
        if let Some(d) = self.discrepancies.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::InvalidArgument(format!("discrepancy {d} outside [0, 1]")));
        }
        if self.sample_counts.contains(&0) {
            return Err(Error::InvalidArgument("sample counts must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid lambda {}", self.lambda)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.discrepancies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discrepancies.is_empty()
    }

    /// `sum alpha_i^2 / m_i`
    fn effective_size_term(&self, alpha: &[f64]) -> f64 {
        alpha
            .iter()
            .zip(&self.sample_counts)
            .map(|(a, &m)| a * a / m as f64)
            .sum()
    }

    /// Objective value at `alpha` (no feasibility check).
    pub fn objective(&self, alpha: &[f64]) -> f64 {
        let linear: f64 = alpha.iter().zip(&self.discrepancies).map(|(a, d)| a * d).sum();
        linear + self.lambda * self.effective_size_term(alpha).sqrt()
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        let root = self.effective_size_term(alpha).sqrt();
        alpha
            .iter()
            .zip(&self.discrepancies)
            .zip(&self.sample_counts)
            .map(|((a, d), &m)| d + self.lambda * a / (m as f64 * root))
            .collect()
    }
}

const MAX_SOLVER_ITERATIONS: usize = 100_000;
const SOLVER_TOLERANCE: f64 = 1e-12;

/// Minimize the weight program exactly.
///
/// Stationarity on the simplex gives `alpha_i = m_i (nu - d_i)_+ / Z` for a
/// level `nu` solving `sum_i m_i (nu - d_i)_+^2 = lambda^2`; the level is
/// found segment by segment over the sorted discrepancies. `lambda = 0`
/// puts all mass on the sources with the smallest discrepancy, split
/// proportionally to their sample counts (the limit as `lambda -> 0+`).
pub fn solve_weights(problem: &WeightProblem) -> Result<SimplexWeights> {
    problem.validate()?;
    let n = problem.len();
    if n == 1 {
        return Ok(SimplexWeights(vec![1.0]));
    }
    if problem.lambda == 0.0 {
        return Ok(closed_form_zero_lambda(problem));
    }
    let d = &problem.discrepancies;
    let m: Vec<f64> = problem.sample_counts.iter().map(|&m| m as f64).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let target = problem.lambda * problem.lambda;

    let mut level = f64::INFINITY;
    let mut k = 0;
    while k < n {
        // Grow the active set by every source tied at the next discrepancy.
        while k + 1 < n && d[order[k + 1]] == d[order[k]] {
            k += 1;
        }
        let active = &order[..=k];
        let mass: f64 = active.iter().map(|&i| m[i]).sum();
        let mean = active.iter().map(|&i| m[i] * d[i]).sum::<f64>() / mass;
        let spread: f64 = active.iter().map(|&i| m[i] * (d[i] - mean).powi(2)).sum();
        // sum m_i (nu - d_i)^2 = mass (nu - mean)^2 + spread on this segment.
        let candidate = mean + ((target - spread).max(0.0) / mass).sqrt();
        let next = order.get(k + 1).map_or(f64::INFINITY, |&i| d[i]);
        if candidate <= next {
            level = candidate;
            break;
        }
        k += 1;
    }
    let raw: Vec<f64> = (0..n).map(|i| m[i] * (level - d[i]).max(0.0)).collect();
    let total: f64 = raw.iter().sum();
    Ok(SimplexWeights(raw.into_iter().map(|r| r / total).collect()))
}

/// Projected gradient descent on the simplex from the uniform vector, with a
/// backtracking step. Stops when one step changes the objective by at most
/// `1e-12 * max(1, |f|)` or after 100,000 iterations. Slower and less
/// accurate than [`solve_weights`]; kept as an independent cross-check.
pub fn solve_weights_projected_gradient(problem: &WeightProblem) -> Result<SimplexWeights> {
    problem.validate()?;
    let n = problem.len();
    if n == 1 {
        return Ok(SimplexWeights(vec![1.0]));
    }
    if problem.lambda == 0.0 {
        return Ok(closed_form_zero_lambda(problem));
    }

    let mut alpha = vec![1.0 / n as f64; n];
    let mut value = problem.objective(&alpha);
    let mut step = 1.0 / problem.lambda;
    for _ in 0..MAX_SOLVER_ITERATIONS {
        let grad = problem.gradient(&alpha);
        step *= 2.0;
        let (next, next_value) = loop {
            let moved: Vec<f64> = alpha.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
            let next = project_unchecked(&moved);
            let next_value = problem.objective(&next);
            let diff: Vec<f64> = next.iter().zip(&alpha).map(|(x, a)| x - a).collect();
            let linear: f64 = diff.iter().zip(&grad).map(|(d, g)| d * g).sum();
            let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * step);
            if next_value <= value + linear + quad || step < 1e-300 {
                break (next, next_value);
            }
            step *= 0.5;
        };
        let change = (value - next_value).abs();
        let scale = value.abs().max(1.0);
        if next_value <= value {
            alpha = next;
            value = next_value;
        }
        if change <= SOLVER_TOLERANCE * scale {
            break;
        }
    }
    Ok(SimplexWeights(alpha))
}

fn closed_form_zero_lambda(problem: &WeightProblem) -> SimplexWeights {
    let best = problem
        .discrepancies
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let mass: usize = problem
        .discrepancies
        .iter()
        .zip(&problem.sample_counts)
        .filter(|(d, _)| **d == best)
        .map(|(_, &m)| m)
        .sum();
    SimplexWeights(
        problem
            .discrepancies
            .iter()
            .zip(&problem.sample_counts)
            .map(|(d, &m)| if *d == best { m as f64 / mass as f64 } else { 0.0 })
            .collect(),
    )
}

/// Inputs of the excess-risk bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha: SimplexWeights,
    pub discrepancies: Vec<f64>,
    pub sample_counts: Vec<usize>,
    /// Upper bounds on the per-source Rademacher complexities.
    pub rademacher_bounds: Vec<f64>,
    /// Bound on the loss function.
    pub loss_bound: f64,
    /// Confidence parameter.
    pub delta: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        let n = self.alpha.len();
        for len in [
            self.discrepancies.len(),
            self.sample_counts.len(),
            self.rademacher_bounds.len(),
        ] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: len,
                });
            }
        }
        if !(self.loss_bound > 0.0) {
            return Err(Error::InvalidArgument("loss bound must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument("delta must lie in (0, 1)".into()));
        }
        if self.sample_counts.contains(&0) {
            return Err(Error::InvalidArgument("sample counts must be positive".into()));
        }
        Ok(())
    }
}

/// Excess target risk of the alpha-weighted minimizer over the best
/// hypothesis, holding with probability at least `1 - delta`:
///
/// ```text
/// 4 sum a_i R_i + 2 sum a_i d_i + 6 sqrt(ln(4/delta) M^2 / 2) sqrt(sum a_i^2 / m_i)
/// ```
pub fn excess_risk_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let alpha = inputs.alpha.as_slice();
    let complexity: f64 = alpha
        .iter()
        .zip(&inputs.rademacher_bounds)
        .map(|(a, r)| a * r)
        .sum();
    let discrepancy: f64 = alpha.iter().zip(&inputs.discrepancies).map(|(a, d)| a * d).sum();
    let size: f64 = alpha
        .iter()
        .zip(&inputs.sample_counts)
        .map(|(a, &m)| a * a / m as f64)
        .sum();
    let m = inputs.loss_bound;
    let confidence = ((4.0 / inputs.delta).ln() * m * m / 2.0).sqrt();
    Ok(4.0 * complexity + 2.0 * discrepancy + 6.0 * confidence * size.sqrt())
}

/// Rademacher complexity bound `B D / sqrt(m)` for linear classifiers with
/// `|w| <= B` on inputs with `|x| <= D`.
pub fn linear_rademacher_bound(weight_norm_bound: f64, data_norm_bound: f64, m: usize) -> Result<f64> {
    if !(weight_norm_bound > 0.0 && data_norm_bound > 0.0) || m == 0 {
        return Err(Error::InvalidArgument(
            "norm bounds must be positive and m at least 1".into(),
        ));
    }
    Ok(weight_norm_bound * data_norm_bound / (m as f64).sqrt())
}
