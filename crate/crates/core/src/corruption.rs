//! Seeded corruption of source data: label bias, shuffled labels and
//! shuffled features, applied to a proportion `p` of each corrupted source.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label, SourcePool};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    /// Affected samples get the positive label.
    LabelBias,
    /// Labels of the affected samples are permuted among themselves.
    ShuffledLabels,
    /// One permutation of the feature indices is applied to every affected sample.
    ShuffledFeatures,
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorruptionKind::LabelBias => "label_bias",
            CorruptionKind::ShuffledLabels => "shuffled_labels",
            CorruptionKind::ShuffledFeatures => "shuffled_features",
        })
    }
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label_bias" => Ok(CorruptionKind::LabelBias),
            "shuffled_labels" => Ok(CorruptionKind::ShuffledLabels),
            "shuffled_features" => Ok(CorruptionKind::ShuffledFeatures),
            other => Err(Error::InvalidArgument(format!("unknown corruption `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Fraction of samples modified, in `(0, 1]`.
    pub proportion: f64,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, proportion: f64, seed: u64) -> Result<Self> {
        let spec = CorruptionSpec {
            kind,
            proportion,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.proportion > 0.0 && self.proportion <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "corruption proportion {} outside (0, 1]",
                self.proportion
            )));
        }
        Ok(())
    }

    /// `ceil(p n)`, ignoring rounding noise in the product.
    pub fn affected_count(&self, n: usize) -> usize {
        let raw = self.proportion * n as f64;
        ((raw - 1e-9).ceil().max(0.0) as usize).min(n)
    }
}

/// Result of [`corrupt_detailed`]: the new dataset plus what was touched.
#[derive(Debug, Clone, PartialEq)]
pub struct Corrupted {
    pub data: Dataset,
    /// Affected row indices, ascending.
    pub affected: Vec<usize>,
    /// For `ShuffledFeatures`: new column `j` holds old column `permutation[j]`.
    pub feature_permutation: Option<Vec<usize>>,
}

pub fn corrupt(data: &Dataset, spec: &CorruptionSpec) -> Result<Dataset> {
    Ok(corrupt_detailed(data, spec)?.data)
}

pub fn corrupt_detailed(data: &Dataset, spec: &CorruptionSpec) -> Result<Corrupted> {
    spec.validate()?;
    let mut rng = rng::seeded(spec.seed);
    let n = data.n_samples();
    let mut affected = index::sample(&mut rng, n, spec.affected_count(n)).into_vec();
    affected.sort_unstable();

    let mut feature_permutation = None;
    let out = match spec.kind {
        CorruptionKind::LabelBias => {
            let mut labels = data.labels().to_vec();
            for &i in &affected {
                labels[i] = Label::Positive;
            }
            data.with_labels(labels)?
        }
        CorruptionKind::ShuffledLabels => {
            let mut chosen: Vec<Label> = affected.iter().map(|&i| data.labels()[i]).collect();
            chosen.shuffle(&mut rng);
            let mut labels = data.labels().to_vec();
            for (&i, l) in affected.iter().zip(chosen) {
                labels[i] = l;
            }
            data.with_labels(labels)?
        }
        CorruptionKind::ShuffledFeatures => {
            let d = data.n_features();
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut rng);
            let mut features: Array2<f64> = data.features().clone();
            for &i in &affected {
                let original = data.row(i);
                for (j, &src) in perm.iter().enumerate() {
                    features[[i, j]] = original[src];
                }
            }
            feature_permutation = Some(perm);
            data.with_features(features)?
        }
    };
    Ok(Corrupted {
        data: out,
        affected,
        feature_permutation,
    })
}

/// Order in which [`corrupt_pool`] picks sources: corrupting `n` sources
/// takes the first `n` entries, so the sets are nested in `n`.
pub fn corruption_order(n_sources: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_sources).collect();
    order.shuffle(&mut rng::seeded(seed));
    order
}

/// Corrupt `n_corrupted` seed-chosen sources of a pool. The reference is
/// never touched. Returns the new pool and the corrupted source indices in
/// ascending order. A source's corruption depends only on `spec.seed` and
/// its index.
pub fn corrupt_pool(
    pool: &SourcePool,
    n_corrupted: usize,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<(SourcePool, Vec<usize>)> {
    spec.validate()?;
    let n = pool.n_sources();
    if n_corrupted > n {
        return Err(Error::InvalidArgument(format!(
            "cannot corrupt {n_corrupted} of {n} sources"
        )));
    }
    let mut chosen = corruption_order(n, seed);
    chosen.truncate(n_corrupted);
    chosen.sort_unstable();

    let mut sources = pool.sources().to_vec();
    for &i in &chosen {
        let per_source = CorruptionSpec {
            seed: rng::derive_seed(spec.seed, i as u64),
            ..*spec
        };
        sources[i] = corrupt(&sources[i], &per_source)?;
    }
    Ok((pool.with_sources(sources)?, chosen))
}
