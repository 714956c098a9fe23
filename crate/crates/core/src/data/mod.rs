//! Datasets, source pools and deterministic index partitioning.
//!
//! A [`Dataset`] is validated once at construction and immutable afterwards:
//! labels are stored as [`Label`] values, features must be finite, and the
//! label count must match the number of feature rows.

mod csv_io;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use csv_io::{load_csv, save_csv, LabelEncoding};

/// Binary class label, stored as a sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_sign(value: f64) -> Option<Self> {
        if value == 1.0 {
            Some(Label::Positive)
        } else if value == -1.0 {
            Some(Label::Negative)
        } else {
            None
        }
    }

    /// Sign of a real score; zero is mapped to `Positive`.
    pub fn of_score(score: f64) -> Self {
        if score >= 0.0 {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

/// Feature matrix with one binary label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<Label>,
    source_id: Option<String>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<Label>) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(Error::NoFeatures);
        }
        if labels.len() != features.nrows() {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                rows: features.nrows(),
            });
        }
        for (row, values) in features.outer_iter().enumerate() {
            if let Some(column) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row, column });
            }
        }
        Ok(Dataset {
            features,
            labels,
            source_id: None,
        })
    }

    /// Build from signed labels; every value must be exactly -1 or +1.
    pub fn from_signed(features: Array2<f64>, labels: &[f64]) -> Result<Self> {
        let labels = labels
            .iter()
            .enumerate()
            .map(|(row, &value)| Label::from_sign(value).ok_or(Error::InvalidLabel { row, value }))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(features, labels)
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.source_id = Some(id.into());
        self
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn source_id(&self) -> Option<&str> {
        self.source_id.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, index: usize) -> ArrayView1<'_, f64> {
        self.features.row(index)
    }

    /// Iterate `(features, label)` pairs in row order.
    pub fn samples(&self) -> impl Iterator<Item = (ArrayView1<'_, f64>, Label)> + '_ {
        self.features.outer_iter().zip(self.labels.iter().copied())
    }

    /// Rows at `indices`, in the given order. Panics on out-of-range indices.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            source_id: self.source_id.clone(),
        }
    }

    /// Same features, new labels.
    pub fn with_labels(&self, labels: Vec<Label>) -> Result<Dataset> {
        let mut out = Dataset::new(self.features.clone(), labels)?;
        out.source_id = self.source_id.clone();
        Ok(out)
    }

    /// Same labels, new features (validated).
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset> {
        let mut out = Dataset::new(features, self.labels.clone())?;
        out.source_id = self.source_id.clone();
        Ok(out)
    }

    /// Row-wise concatenation; the result carries no source id.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or(Error::Empty("no datasets to concatenate"))?;
        let d = first.n_features();
        for part in parts {
            if part.n_features() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: part.n_features(),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| p.features.view()).collect();
        let features = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let labels = parts.iter().flat_map(|p| p.labels.iter().copied()).collect();
        Dataset::new(features, labels)
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.n_features() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.n_features(),
            });
        }
        Ok(())
    }
}

/// N untrusted sources plus one trusted reference sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePool {
    sources: Vec<Dataset>,
    reference: Dataset,
}

impl SourcePool {
    pub fn new(sources: Vec<Dataset>, reference: Dataset) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::EmptyPool);
        }
        let d = reference.n_features();
        for source in &sources {
            source.check_dim(d)?;
            if source.is_empty() {
                return Err(Error::Empty("every source needs at least one sample"));
            }
        }
        if reference.is_empty() {
            return Err(Error::Empty("reference dataset"));
        }
        Ok(SourcePool { sources, reference })
    }

    pub fn sources(&self) -> &[Dataset] {
        &self.sources
    }

    pub fn reference(&self) -> &Dataset {
        &self.reference
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_features(&self) -> usize {
        self.reference.n_features()
    }

    pub fn sample_counts(&self) -> Vec<usize> {
        self.sources.iter().map(Dataset::n_samples).collect()
    }

    /// A pool whose sources are this pool's sources followed by the reference.
    pub fn with_reference_as_source(&self) -> SourcePool {
        let mut sources = self.sources.clone();
        sources.push(self.reference.clone());
        SourcePool {
            sources,
            reference: self.reference.clone(),
        }
    }

    /// Same sources, different reference.
    pub fn with_reference(&self, reference: Dataset) -> Result<SourcePool> {
        SourcePool::new(self.sources.clone(), reference)
    }

    /// Same reference, different sources.
    pub fn with_sources(&self, sources: Vec<Dataset>) -> Result<SourcePool> {
        SourcePool::new(sources, self.reference.clone())
    }
}

/// Part sizes for `n` items by the largest-remainder rule. Ties in the
/// fractional remainder go to the earlier part.
pub fn largest_remainder_sizes(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Seeded partition of `0..n` into parts sized by `fractions`.
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.is_empty() {
        return Err(Error::InvalidFractions("no fractions given".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(f.is_finite() && **f > 0.0)) {
        return Err(Error::InvalidFractions(format!("fraction {f} is not positive")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidFractions(format!("fractions sum to {total}, not 1")));
    }
    if n < fractions.len() {
        return Err(Error::TooFewSamples {
            samples: n,
            parts: fractions.len(),
        });
    }
    let sizes = largest_remainder_sizes(n, fractions);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for size in sizes {
        parts.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(parts)
}

/// Seeded split of a dataset into disjoint parts covering every sample.
pub fn split(dataset: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    let parts = split_indices(dataset.n_samples(), fractions, seed)?;
    Ok(parts.iter().map(|idx| dataset.select(idx)).collect())
}

/// Seeded k-fold partition of `0..n`; fold sizes differ by at most one.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::TooFewSamples { samples: n, parts: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}
