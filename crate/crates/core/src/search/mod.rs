//! Multi-step search: Retro*-0, PUCT-style MCTS and a breadth-first
//! baseline, sharing budgets, event traces and the AND/OR graph.
//!
//! Every algorithm talks to the model through a per-run [`CachedModel`];
//! cached answers are free with respect to the call budget.

mod bfs;
mod budget;
mod mcts;
mod metrics;
mod policy;
mod retro_star;
mod sweep;
mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::gateway::{BackwardModel, CachedModel, CallStats, GatewayError, Prediction};
use crate::graph::{extract_routes, AndOrGraph, OrId, Route, RouteLimits};
use crate::inventory::Inventory;
use crate::molkit::Molecule;

pub use bfs::{breadth_first, BfsConfig};
pub use budget::SearchBudget;
pub use mcts::{mcts, MctsConfig};
pub use metrics::{even_checkpoints, metrics_over_time, packing_at_steps, summarize, Axis, MetricPoint, SearchSummary, PACKING_SAMPLES};
pub use policy::{transform_policy, PolicyTransform};
pub use retro_star::{retro_star, RetroStarConfig};
pub use sweep::{apply_params, sweep, sweep_score, ParamGrid, SweepResult};
pub use trace::{EventKind, FirstSolution, SearchTrace, TraceEvent};

use budget::Clock;

/// Default number of results requested per model call.
pub const DEFAULT_NUM_RESULTS: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Stopped at the first solution as requested.
    Solved,
    FrontierExhausted,
    WallTime,
    CallBudget,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub graph: AndOrGraph,
    pub trace: SearchTrace,
    pub stop_reason: StopReason,
    /// Cumulative statistics of the cache the run used.
    pub stats: CallStats,
    /// Unique model calls made by this run alone.
    pub unique_calls: u64,
    pub iterations: u64,
    pub elapsed_s: f64,
    /// Caps that routes reported for this run must respect.
    pub route_caps: RouteLimits,
}

impl SearchOutcome {
    pub fn solved(&self) -> bool {
        self.graph.is_solved()
    }

    pub fn routes(&self, max_routes: usize) -> Vec<Route> {
        extract_routes(
            &self.graph,
            &RouteLimits {
                max_routes,
                ..self.route_caps
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmConfig {
    RetroStar(RetroStarConfig),
    Mcts(MctsConfig),
    BreadthFirst(BfsConfig),
}

impl AlgorithmConfig {
    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmConfig::RetroStar(_) => "retro_star",
            AlgorithmConfig::Mcts(_) => "mcts",
            AlgorithmConfig::BreadthFirst(_) => "breadth_first",
        }
    }
}

/// Runs one search with a fresh cache.
pub fn run_search(
    algorithm: &AlgorithmConfig,
    target: &Molecule,
    model: &dyn BackwardModel,
    inventory: &Inventory,
    budget: &SearchBudget,
    num_results: usize,
) -> Result<SearchOutcome, SearchError> {
    let mut cache = CachedModel::new(model, num_results);
    match algorithm {
        AlgorithmConfig::RetroStar(c) => retro_star(target, &mut cache, inventory, budget, c),
        AlgorithmConfig::Mcts(c) => mcts(target, &mut cache, inventory, budget, c),
        AlgorithmConfig::BreadthFirst(c) => breadth_first(target, &mut cache, inventory, budget, c),
    }
}

/// Shared expansion machinery: budget checks, cached model access, graph
/// expansion and trace events.
pub(crate) struct Expander<'a, 'm> {
    pub cache: &'a mut CachedModel<'m>,
    /// Unique calls already in the cache when the run started.
    base_calls: u64,
    pub inventory: &'a Inventory,
    pub clock: Clock,
    pub trace: SearchTrace,
    pub transform: PolicyTransform,
}

impl<'a, 'm> Expander<'a, 'm> {
    pub fn new(
        cache: &'a mut CachedModel<'m>,
        inventory: &'a Inventory,
        budget: &SearchBudget,
        transform: PolicyTransform,
    ) -> Self {
        Self {
            base_calls: cache.stats().unique_calls,
            cache,
            inventory,
            clock: Clock::start(budget),
            trace: SearchTrace::default(),
            transform,
        }
    }

    fn now(&self) -> f64 {
        self.clock.elapsed().as_secs_f64()
    }

    /// Unique model calls made by this run.
    pub fn calls(&self) -> u64 {
        self.cache.stats().unique_calls - self.base_calls
    }

    /// Records a solution that exists before any expansion.
    pub fn solved_at_start(&mut self, graph: &AndOrGraph) {
        let t = self.now();
        self.trace
            .push(EventKind::SolutionFound, t, 0, 0, &graph.root().molecule.id);
    }

    /// Cleaned predictions for `molecule`, or the reason the budget forbids
    /// asking the model.
    pub fn predictions(&mut self, molecule: &Molecule, step: usize) -> Result<Result<Arc<[Prediction]>, StopReason>, GatewayError> {
        if !self.cache.is_cached(molecule) {
            if let Some(stop) = self.clock.refuse_call(self.calls()) {
                return Ok(Err(stop));
            }
        }
        let (preds, hit) = self.cache.query(molecule)?;
        let kind = if hit { EventKind::CacheHit } else { EventKind::ModelCall };
        let (t, c) = (self.now(), self.calls());
        self.trace.push(kind, t, c, step, &molecule.id);
        Ok(Ok(preds))
    }

    /// Expands `id` in the graph if it is still expandable.
    pub fn expand(&mut self, graph: &mut AndOrGraph, id: OrId, preds: &[Prediction]) -> bool {
        if !graph.can_expand(id) {
            return false;
        }
        let was_solved = graph.is_solved();
        let t = self.transform;
        graph
            .expand(id, preds, self.inventory, |p| t.cost(p.probability))
            .expect("expandability checked");
        let (now, calls, step) = (self.now(), self.calls(), graph.steps());
        let mol = graph.or_node(id).molecule.id.clone();
        self.trace.push(EventKind::Expansion, now, calls, step, &mol);
        if !was_solved && graph.is_solved() {
            self.trace.push(EventKind::SolutionFound, now, calls, step, &mol);
        }
        true
    }

    pub fn finish(self, graph: AndOrGraph, stop_reason: StopReason, iterations: u64, route_caps: RouteLimits) -> SearchOutcome {
        SearchOutcome {
            elapsed_s: self.now(),
            unique_calls: self.calls(),
            stats: self.cache.stats().clone(),
            graph,
            trace: self.trace,
            stop_reason,
            iterations,
            route_caps,
        }
    }
}
