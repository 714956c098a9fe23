//! Learning from multiple unreliable data sources.
//!
//! A small trusted reference sample is used to score each source by an
//! empirical discrepancy, a weight on the simplex is chosen by trading
//! discrepancy against effective sample size, and a linear classifier is
//! trained on the weighted union of the sources.

pub mod baselines;
pub mod corruption;
pub mod data;
pub mod discrepancy;
pub mod error;
pub mod experiment;
pub mod federated;
pub mod linear;
pub mod rng;
pub mod weights;

pub use data::{Dataset, Label, SourcePool};
pub use error::{Error, Result};
pub use linear::{LinearPredictor, Loss, TrainConfig};
pub use weights::{SimplexWeights, WeightProblem};
