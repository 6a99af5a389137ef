//! Uniform access to single-step backward models.
//!
//! Models only promise to return up to `n` ranked raw outputs. Everything
//! a well-engineered planner would do with those outputs (validity
//! filtering, normalization, deduplication, ranking, caching, timing) lives
//! here so that every algorithm and metric sees the same cleaned lists.

mod cache;
mod file_model;
mod postprocess;
pub mod universe;
pub mod wire;

use serde::{Deserialize, Serialize};

use crate::molkit::{Molecule, MoleculeSet};

pub use cache::{CachedModel, CallStats};
pub use file_model::{FileModel, TableOracle};
pub use postprocess::{postprocess, postprocess_with, PostProcessed};
pub use universe::{SyntheticUniverse, UniverseConfig, UniverseModel, UniverseOracle};
pub use wire::{WireClient, WireModel};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("model unavailable: {0}")]
    ModelUnavailable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },
}

/// One model output before post-processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub reactants: Vec<String>,
    pub probability: f64,
}

impl RawPrediction {
    pub fn new<S: Into<String>>(reactants: impl IntoIterator<Item = S>, probability: f64) -> Self {
        Self {
            reactants: reactants.into_iter().map(Into::into).collect(),
            probability,
        }
    }
}

/// A validated, normalized, deduplicated and ranked backward reaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub reactants: MoleculeSet,
    pub probability: f64,
    /// 1-based.
    pub rank: usize,
    pub raw_output: String,
}

/// A single-step retrosynthesis model.
///
/// Implementations must be deterministic for a fixed instance and input;
/// caching relies on it.
pub trait BackwardModel: Send + Sync {
    fn name(&self) -> &str;

    /// Up to `num_results` raw outputs, best first.
    fn query(&self, product: &Molecule, num_results: usize)
        -> Result<Vec<RawPrediction>, GatewayError>;
}

/// Decides whether `reactants` plausibly produce `product` (round-trip check).
pub trait ForwardOracle: Send + Sync {
    fn feasible(&self, reactants: &MoleculeSet, product: &Molecule) -> bool;
}

impl<T: BackwardModel + ?Sized> BackwardModel for Box<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn query(&self, product: &Molecule, n: usize) -> Result<Vec<RawPrediction>, GatewayError> {
        (**self).query(product, n)
    }
}

impl<T: BackwardModel + ?Sized> BackwardModel for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn query(&self, product: &Molecule, n: usize) -> Result<Vec<RawPrediction>, GatewayError> {
        (**self).query(product, n)
    }
}
