//! Empirical discrepancy between a source sample and the reference sample.
//!
//! For the 0/1 loss and a hypothesis class closed under negation,
//!
//! ```text
//! sup_h |err_S(h) - err_T(h)| = 1 - inf_h [ err_S(h; flipped labels) + err_T(h) ]
//! ```
//!
//! so the supremum becomes a weighted ERM problem over the merged sample,
//! where source points carry negated labels and weight `1/m_S`, and
//! reference points keep their labels with weight `1/m_T`. The 0/1 ERM is
//! relaxed to ridge-regularized least squares on the signed labels, which is
//! solved exactly; the 0/1 risk of the resulting sign classifier gives the
//! estimate `clamp(1 - risk, 0, 1)`.
//!
//! [`exact_discrepancy_oracle`] enumerates every labeling a small 1-D or 2-D
//! family can produce and is meant for testing.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::linear::{LinearPredictor, TrainConfig};

/// Ridge used by the least-squares relaxation unless configured otherwise.
pub const DEFAULT_RELAX_RIDGE: f64 = 1e-6;

/// Default configuration of the relaxation (only the ridge is used).
pub fn default_relax_config() -> TrainConfig {
    TrainConfig::with_ridge(DEFAULT_RELAX_RIDGE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyEstimate {
    pub value: f64,
    /// Weighted 0/1 risk of the relaxed minimizer on the flipped problem.
    pub solver_risk: f64,
    pub source_id: String,
}

impl DiscrepancyEstimate {
    pub(crate) fn from_risk(solver_risk: f64, source_id: String) -> Self {
        DiscrepancyEstimate {
            value: (1.0 - solver_risk).clamp(0.0, 1.0),
            solver_risk,
            source_id,
        }
    }
}

/// `errors_s / m_s + errors_t / m_t`, with a single rounding. When the error
/// counts of paired samples add up to the sample size the result is exactly 1.
pub fn combined_risk(errors_s: usize, m_s: usize, errors_t: usize, m_t: usize) -> f64 {
    let numerator = errors_s as u128 * m_t as u128 + errors_t as u128 * m_s as u128;
    let denominator = m_s as u128 * m_t as u128;
    numerator as f64 / denominator as f64
}

/// Errors of `predictor` against the negated labels of `data`.
pub fn flipped_errors(predictor: &LinearPredictor, data: &Dataset) -> Result<usize> {
    Ok(predictor
        .predict(data)?
        .into_iter()
        .zip(data.labels())
        .filter(|(p, y)| *p != y.flipped())
        .count())
}

/// Accumulates the normal equations of the weighted least-squares relaxation.
#[derive(Debug, Clone)]
pub(crate) struct NormalEquations {
    dim: usize,
    gram: Vec<f64>,
    rhs: Vec<f64>,
}

impl NormalEquations {
    pub(crate) fn new(n_features: usize) -> Self {
        let dim = n_features + 1;
        NormalEquations {
            dim,
            gram: vec![0.0; dim * dim],
            rhs: vec![0.0; dim],
        }
    }

    /// Add `weight * (w.x + b - target)^2` for every row, with targets given
    /// by `target_of(label)`.
    pub(crate) fn add(&mut self, data: &Dataset, weight: f64, target_of: impl Fn(Label) -> f64) {
        let d = self.dim;
        let mut ext = vec![1.0; d];
        for (x, label) in data.samples() {
            for (e, v) in ext.iter_mut().zip(x.iter()) {
                *e = *v;
            }
            let y = target_of(label);
            for i in 0..d {
                let wi = weight * ext[i];
                self.rhs[i] += wi * y;
                for j in 0..=i {
                    self.gram[i * d + j] += wi * ext[j];
                }
            }
        }
    }

    /// Minimize `sum weight (z - y)^2 + (ridge / 2) |w|^2`; bias unregularized.
    pub(crate) fn solve(&self, ridge: f64) -> Result<LinearPredictor> {
        let d = self.dim;
        // Stationarity: (2 G + ridge I_w) theta = 2 r
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let v = 2.0 * self.gram[i * d + j];
                a[i * d + j] = v;
                a[j * d + i] = v;
            }
            if i + 1 < d {
                a[i * d + i] += ridge;
            }
        }
        let b: Vec<f64> = self.rhs.iter().map(|r| 2.0 * r).collect();
        let theta = solve_spd(&a, &b, d)?;
        LinearPredictor::new(theta[..d - 1].to_vec(), theta[d - 1])
    }
}

/// Solve a symmetric positive (semi)definite system by Gaussian elimination
/// with partial pivoting. Singular directions are set to zero.
fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    let mut m = a.to_vec();
    let mut rhs = b.to_vec();
    let scale = (0..n).map(|i| m[i * n + i].abs()).fold(0.0, f64::max).max(1.0);
    let mut pivot_ok = vec![true; n];
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| m[r * n + col].abs().total_cmp(&m[s * n + col].abs()))
            .unwrap_or(col);
        if m[pivot_row * n + col].abs() <= 1e-14 * scale {
            pivot_ok[col] = false;
            continue;
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            rhs.swap(col, pivot_row);
        }
        let p = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        if !pivot_ok[row] {
            continue;
        }
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= m[row * n + k] * x[k];
        }
        x[row] = s / m[row * n + row];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteObjective { iteration: 0 });
    }
    Ok(x)
}

/// Minimizer of the least-squares relaxation of the flipped-label problem.
pub fn relaxed_classifier(
    source: &Dataset,
    reference: &Dataset,
    relax_config: &TrainConfig,
) -> Result<LinearPredictor> {
    check_inputs(source, reference)?;
    let mut eq = NormalEquations::new(reference.n_features());
    eq.add(source, 1.0 / source.n_samples() as f64, |l| l.flipped().sign());
    eq.add(reference, 1.0 / reference.n_samples() as f64, Label::sign);
    eq.solve(relax_config.ridge_strength)
}

fn check_inputs(source: &Dataset, reference: &Dataset) -> Result<()> {
    source.check_dim(reference.n_features())?;
    if source.is_empty() || reference.is_empty() {
        return Err(Error::Empty("discrepancy needs two nonempty datasets"));
    }
    Ok(())
}

/// Estimate the empirical discrepancy of `source` to `reference`.
pub fn empirical_discrepancy(
    source: &Dataset,
    reference: &Dataset,
    relax_config: &TrainConfig,
) -> Result<DiscrepancyEstimate> {
    let h = relaxed_classifier(source, reference, relax_config)?;
    let risk = combined_risk(
        flipped_errors(&h, source)?,
        source.n_samples(),
        h.count_errors(reference)?,
        reference.n_samples(),
    );
    let id = source.source_id().unwrap_or("source").to_owned();
    Ok(DiscrepancyEstimate::from_risk(risk, id))
}

/// Hypothesis families the brute-force oracle can enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisFamily {
    /// Thresholds on the real line, both orientations.
    Thresholds1d,
    /// Affine half-planes in the plane.
    Lines2d,
}

/// Largest total sample count the oracle accepts.
pub const ORACLE_MAX_SAMPLES: usize = 200;

/// `sup_h |err_S(h) - err_T(h)|` over every labeling realizable by `family`.
pub fn exact_discrepancy_oracle(
    source: &Dataset,
    reference: &Dataset,
    family: HypothesisFamily,
) -> Result<f64> {
    check_inputs(source, reference)?;
    let dim = match family {
        HypothesisFamily::Thresholds1d => 1,
        HypothesisFamily::Lines2d => 2,
    };
    reference.check_dim(dim)?;
    let total = source.n_samples() + reference.n_samples();
    if total > ORACLE_MAX_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "oracle limited to {ORACLE_MAX_SAMPLES} samples, got {total}"
        )));
    }

    let points: Vec<[f64; 2]> = source
        .features()
        .outer_iter()
        .chain(reference.features().outer_iter())
        .map(|x| [x[0], if dim == 2 { x[1] } else { 0.0 }])
        .collect();
    let labels: Vec<Label> = source
        .labels()
        .iter()
        .chain(reference.labels())
        .copied()
        .collect();
    let m_s = source.n_samples();
    let m_t = reference.n_samples();

    let mut best = 0u128;
    let mut consider = |assign: &dyn Fn(usize) -> Label| {
        let mut err_s = 0u128;
        let mut err_t = 0u128;
        for (i, &y) in labels.iter().enumerate() {
            if assign(i) != y {
                if i < m_s {
                    err_s += 1;
                } else {
                    err_t += 1;
                }
            }
        }
        let a = err_s * m_t as u128;
        let b = err_t * m_s as u128;
        best = best.max(a.abs_diff(b));
    };

    consider(&|_| Label::Positive);
    consider(&|_| Label::Negative);

    match family {
        HypothesisFamily::Thresholds1d => {
            let coords: Vec<f64> = points.iter().map(|p| p[0]).collect();
            for cut in cut_points(&coords) {
                consider(&|i| if coords[i] > cut { Label::Positive } else { Label::Negative });
                consider(&|i| if coords[i] < cut { Label::Positive } else { Label::Negative });
            }
        }
        HypothesisFamily::Lines2d => {
            for p in 0..points.len() {
                for q in p + 1..points.len() {
                    let (a, b) = (points[p], points[q]);
                    let u = [b[0] - a[0], b[1] - a[1]];
                    if u == [0.0, 0.0] {
                        continue;
                    }
                    let side: Vec<f64> = points
                        .iter()
                        .map(|x| u[0] * (x[1] - a[1]) - u[1] * (x[0] - a[0]))
                        .collect();
                    let along: Vec<f64> = points
                        .iter()
                        .map(|x| u[0] * (x[0] - a[0]) + u[1] * (x[1] - a[1]))
                        .collect();
                    let on_line: Vec<f64> = (0..points.len())
                        .filter(|&i| side[i] == 0.0)
                        .map(|i| along[i])
                        .collect();
                    for cut in cut_points(&on_line) {
                        for orientation in [1.0, -1.0] {
                            for line_sign in [1.0, -1.0] {
                                consider(&|i| {
                                    if side[i] != 0.0 {
                                        Label::of_score(line_sign * side[i])
                                    } else if orientation * (along[i] - cut) > 0.0 {
                                        Label::Positive
                                    } else {
                                        Label::Negative
                                    }
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(best as f64 / (m_s as u128 * m_t as u128) as f64)
}

/// Cut positions strictly between consecutive distinct values, plus one
/// below and one above all of them.
fn cut_points(values: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.is_empty() {
        return vec![0.0];
    }
    let mut cuts = Vec::with_capacity(sorted.len() + 1);
    cuts.push(sorted[0] - 1.0);
    for pair in sorted.windows(2) {
        cuts.push(0.5 * (pair[0] + pair[1]));
    }
    cuts.push(sorted[sorted.len() - 1] + 1.0);
    cuts
}
