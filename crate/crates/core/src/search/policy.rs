use serde::{Deserialize, Serialize};

use super::SearchError;

/// Clip, then temperature, then normalize. Re-weights a fixed set of
/// reactions without adding or removing any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyTransform {
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub temperature: f64,
}

impl Default for PolicyTransform {
    fn default() -> Self {
        Self {
            clip_lo: 1e-10,
            clip_hi: 0.999,
            temperature: 1.0,
        }
    }
}

impl PolicyTransform {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.clip_lo > 0.0 && self.clip_lo <= self.clip_hi && self.clip_hi <= 1.0) {
            return Err(SearchError::InvalidConfig(format!(
                "need 0 < clip_lo <= clip_hi <= 1, got {} and {}",
                self.clip_lo, self.clip_hi
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(SearchError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn clip(&self, p: f64) -> f64 {
        p.clamp(self.clip_lo, self.clip_hi)
    }

    /// Unnormalized weight `clip(p)^(1/τ)`.
    pub fn weight(&self, p: f64) -> f64 {
        self.clip(p).powf(1.0 / self.temperature)
    }

    /// Reaction cost `-ln(weight)`, always non-negative.
    pub fn cost(&self, p: f64) -> f64 {
        -self.clip(p).ln() / self.temperature
    }

    pub fn apply(&self, probs: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = probs.iter().map(|&p| self.weight(p)).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

pub fn transform_policy(probs: &[f64], t: &PolicyTransform) -> Vec<f64> {
    t.apply(probs)
}
