use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{SearchError, StopReason};

/// Per-target search limits. Cached model answers never count against
/// `max_model_calls`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudget {
    pub wall_time_s: Option<f64>,
    pub max_model_calls: Option<u64>,
    pub max_iterations: Option<u64>,
    pub stop_on_first_solution: bool,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            wall_time_s: Some(600.0),
            max_model_calls: None,
            max_iterations: None,
            stop_on_first_solution: false,
        }
    }
}

impl SearchBudget {
    pub fn calls(n: u64) -> Self {
        Self {
            wall_time_s: None,
            max_model_calls: Some(n),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.wall_time_s.is_none() && self.max_model_calls.is_none() && self.max_iterations.is_none() {
            return Err(SearchError::InvalidConfig("budget needs at least one limit".into()));
        }
        if let Some(t) = self.wall_time_s {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(SearchError::InvalidConfig(format!("wall_time_s must be non-negative, got {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Clock {
    start: Instant,
    wall: Option<Duration>,
    max_calls: Option<u64>,
    max_iterations: Option<u64>,
}

impl Clock {
    pub fn start(b: &SearchBudget) -> Self {
        Self {
            start: Instant::now(),
            wall: b.wall_time_s.map(Duration::from_secs_f64),
            max_calls: b.max_model_calls,
            max_iterations: b.max_iterations,
        }
    }

    pub fn elapsed(&self) -> Duration {
        self.start.elapsed()
    }

    pub fn time_up(&self) -> bool {
        self.wall.is_some_and(|w| self.start.elapsed() >= w)
    }

    /// Why a new model call may not be made, if it may not.
    pub fn refuse_call(&self, unique_calls: u64) -> Option<StopReason> {
        if self.max_calls.is_some_and(|m| unique_calls >= m) {
            Some(StopReason::CallBudget)
        } else if self.time_up() {
            Some(StopReason::WallTime)
        } else {
            None
        }
    }

    pub fn iterations_exhausted(&self, iterations: u64) -> bool {
        self.max_iterations.is_some_and(|m| iterations >= m)
    }
}
