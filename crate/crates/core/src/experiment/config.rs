use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corruption::CorruptionKind;
use crate::data::LabelEncoding;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    ReferenceOnly,
    AllData,
    GeometricMedian,
    ComponentwiseMedian,
    MedianOfProbs,
    RobustLoss,
    BatchNorm,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Ours,
        Method::ReferenceOnly,
        Method::AllData,
        Method::GeometricMedian,
        Method::ComponentwiseMedian,
        Method::MedianOfProbs,
        Method::RobustLoss,
        Method::BatchNorm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::ReferenceOnly => "reference_only",
            Method::AllData => "all_data",
            Method::GeometricMedian => "geometric_median",
            Method::ComponentwiseMedian => "componentwise_median",
            Method::MedianOfProbs => "median_of_probs",
            Method::RobustLoss => "robust_loss",
            Method::BatchNorm => "batch_norm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// Two Gaussian class clouds with identity covariance. Class means sit at
/// `+-class_separation / 2` along the diagonal direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_sources: usize,
    pub samples_per_source: usize,
    pub reference_size: usize,
    pub test_size: usize,
    pub n_features: usize,
    pub class_separation: f64,
    /// Probability of the positive class.
    #[serde(default = "default_positive_fraction")]
    pub positive_fraction: f64,
}

fn default_positive_fraction() -> f64 {
    0.5
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sources == 0
            || self.samples_per_source == 0
            || self.reference_size == 0
            || self.test_size == 0
            || self.n_features == 0
        {
            return Err(Error::InvalidArgument(
                "synthetic spec needs nonzero sources, samples and features".into(),
            ));
        }
        if !(self.class_separation.is_finite() && self.class_separation >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "class separation {} must be finite and nonnegative",
                self.class_separation
            )));
        }
        if !(0.0..=1.0).contains(&self.positive_fraction) {
            return Err(Error::InvalidArgument(format!(
                "positive fraction {} outside [0, 1]",
                self.positive_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvPaths {
    pub sources: Vec<PathBuf>,
    pub reference: PathBuf,
    pub test: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
    #[serde(default)]
    pub label_encoding: LabelEncoding,
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Synthetic(SyntheticSpec),
    CsvPaths(CsvPaths),
}

/// A single value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> From<OneOrMany<T>> for Vec<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => vec![x],
            OneOrMany::Many(xs) => xs,
        }
    }
}

fn one_or_many<'de, D, T>(deserializer: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    OneOrMany::deserialize(deserializer).map(Vec::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    pub kind: CorruptionKind,
    /// Grid of corrupted-source counts.
    #[serde(deserialize_with = "one_or_many")]
    pub n_corrupted: Vec<usize>,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSpec,
    #[serde(default)]
    pub corruption: Option<CorruptionConfig>,
    #[serde(alias = "method", deserialize_with = "one_or_many")]
    pub methods: Vec<Method>,
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    #[serde(default = "default_ridge_grid")]
    pub ridge_grid: Vec<f64>,
    #[serde(default = "default_cv_folds")]
    pub cv_folds: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
}

pub fn default_lambda_grid() -> Vec<f64> {
    vec![0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0]
}

pub fn default_ridge_grid() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2, 1e-1]
}

fn default_cv_folds() -> usize {
    5
}

fn default_repeats() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Corrupted-source counts swept over; `[0]` without corruption.
    pub fn n_grid(&self) -> Vec<usize> {
        self.corruption
            .as_ref()
            .map(|c| c.n_corrupted.clone())
            .unwrap_or_else(|| vec![0])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.methods.is_empty() {
            return bad("no methods given".into());
        }
        if self.lambda_grid.is_empty() || self.ridge_grid.is_empty() {
            return bad("hyperparameter grids must be nonempty".into());
        }
        if let Some(v) = self
            .lambda_grid
            .iter()
            .chain(&self.ridge_grid)
            .find(|v| !(v.is_finite() && **v >= 0.0))
        {
            return bad(format!("grid value {v} is not a finite nonnegative number"));
        }
        if self.cv_folds < 2 {
            return bad(format!("cv_folds must be at least 2, got {}", self.cv_folds));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if let DataSpec::Synthetic(spec) = &self.data {
            spec.validate()?;
            if spec.reference_size < self.cv_folds {
                return Err(Error::TooFewSamples {
                    samples: spec.reference_size,
                    parts: self.cv_folds,
                });
            }
        }
        if let Some(c) = &self.corruption {
            if c.n_corrupted.is_empty() {
                return bad("corruption n_corrupted grid is empty".into());
            }
            if !(c.proportion > 0.0 && c.proportion <= 1.0) {
                return bad(format!("corruption proportion {} outside (0, 1]", c.proportion));
            }
            if let DataSpec::Synthetic(spec) = &self.data {
                if let Some(n) = c.n_corrupted.iter().find(|n| **n > spec.n_sources) {
                    return bad(format!("cannot corrupt {n} of {} sources", spec.n_sources));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "data": {"synthetic": {"n_sources": 3, "samples_per_source": 20,
                 "reference_size": 10, "test_size": 50, "n_features": 2,
                 "class_separation": 2.0}},
        "method": "ours"
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.methods, vec![Method::Ours]);
        assert_eq!(c.lambda_grid, default_lambda_grid());
        assert_eq!(c.ridge_grid, default_ridge_grid());
        assert_eq!(c.cv_folds, 5);
        assert_eq!(c.repeats, 1);
        assert_eq!(c.n_grid(), vec![0]);
        let DataSpec::Synthetic(s) = &c.data else { panic!() };
        assert_eq!(s.positive_fraction, 0.5);
    }

    #[test]
    fn lists_and_corruption() {
        let text = r#"{
            "data": {"synthetic": {"n_sources": 4, "samples_per_source": 20,
                     "reference_size": 10, "test_size": 50, "n_features": 2,
                     "class_separation": 2.0, "positive_fraction": 0.7}},
            "corruption": {"kind": "shuffled_labels", "n_corrupted": [0, 2, 4], "proportion": 1.0},
            "methods": ["ours", "all_data", "median_of_probs"],
            "lambda_grid": [0.5], "ridge_grid": [0.01], "cv_folds": 2, "repeats": 3, "seed": 9
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.n_grid(), vec![0, 2, 4]);
        assert_eq!(c.methods.len(), 3);
        let round_trip: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(round_trip, c);
    }

    #[test]
    fn invalid_configs() {
        let with = |patch: &str| MINIMAL.replace(r#""method": "ours""#, patch);
        assert!(ExperimentConfig::from_json(&with(r#""method": "ours", "lambda_grid": []"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""method": "ours", "ridge_grid": [-1]"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""method": "ours", "cv_folds": 1"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""method": "ours", "repeats": 0"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""method": "magic""#)).is_err());
        assert!(ExperimentConfig::from_json(&with(
            r#""method": "ours", "corruption": {"kind": "label_bias", "n_corrupted": 5, "proportion": 1.0}"#
        ))
        .is_err());
        assert!(ExperimentConfig::from_json(&MINIMAL.replace("\"reference_size\": 10", "\"reference_size\": 3")).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
    }
}
