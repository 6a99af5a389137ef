use std::sync::Arc;
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use serde::Serialize;

use super::{postprocess_with, BackwardModel, GatewayError, Prediction};
use crate::molkit::{Molecule, Normalizer};

/// Call accounting for one cached model instance.
///
/// `total_queries == cache_hits + unique_calls` and
/// `wall_time_per_call.len() == unique_calls` hold at all times.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CallStats {
    pub total_queries: u64,
    pub cache_hits: u64,
    pub unique_calls: u64,
    pub wall_time_per_call: Vec<Duration>,
    pub dropped_invalid: u64,
    pub dedup_removed: u64,
}

impl CallStats {
    pub fn total_model_time(&self) -> Duration {
        self.wall_time_per_call.iter().sum()
    }
}

/// Memoizes post-processed model outputs by normalized product id.
///
/// `num_results` is fixed for the lifetime of the cache, so the product is
/// the whole key. One instance belongs to one search run.
pub struct CachedModel<'m> {
    model: &'m dyn BackwardModel,
    num_results: usize,
    normalizer: Normalizer,
    cache: FxHashMap<String, Arc<[Prediction]>>,
    stats: CallStats,
}

impl<'m> CachedModel<'m> {
    pub fn new(model: &'m dyn BackwardModel, num_results: usize) -> Self {
        Self::with_normalizer(model, num_results, Normalizer::default())
    }

    pub fn with_normalizer(model: &'m dyn BackwardModel, num_results: usize, normalizer: Normalizer) -> Self {
        Self {
            model,
            num_results,
            normalizer,
            cache: FxHashMap::default(),
            stats: CallStats::default(),
        }
    }

    pub fn model_name(&self) -> &str {
        self.model.name()
    }

    pub fn num_results(&self) -> usize {
        self.num_results
    }

    pub fn is_cached(&self, product: &Molecule) -> bool {
        self.cache.contains_key(&product.id)
    }

    pub fn stats(&self) -> &CallStats {
        &self.stats
    }

    /// Returns the post-processed predictions for `product` and whether they
    /// came from the cache. Only cache misses reach the model and count as
    /// unique calls; a failed call is not recorded at all.
    pub fn query(&mut self, product: &Molecule) -> Result<(Arc<[Prediction]>, bool), GatewayError> {
        if let Some(hit) = self.cache.get(&product.id) {
            self.stats.total_queries += 1;
            self.stats.cache_hits += 1;
            return Ok((Arc::clone(hit), true));
        }

        let start = Instant::now();
        let raw = self.model.query(product, self.num_results)?;
        let pp = postprocess_with(&self.normalizer, &raw, self.num_results);
        let elapsed = start.elapsed();

        self.stats.total_queries += 1;
        self.stats.unique_calls += 1;
        self.stats.wall_time_per_call.push(elapsed);
        self.stats.dropped_invalid += pp.dropped_invalid as u64;
        self.stats.dedup_removed += pp.dedup_removed as u64;

        let preds: Arc<[Prediction]> = pp.predictions.into();
        self.cache.insert(product.id.clone(), Arc::clone(&preds));
        Ok((preds, false))
    }
}
