//! Breadth-first expansion of the AND/OR graph, a reference baseline.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Expander, PolicyTransform, SearchBudget, SearchError, SearchOutcome, StopReason};
use crate::gateway::CachedModel;
use crate::graph::{AndOrGraph, RouteLimits};
use crate::inventory::Inventory;
use crate::molkit::Molecule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BfsConfig {
    /// Maximum route depth in reactions.
    pub depth_cap: usize,
}

impl Default for BfsConfig {
    fn default() -> Self {
        Self { depth_cap: 5 }
    }
}

impl BfsConfig {
    pub fn route_caps(&self) -> RouteLimits {
        RouteLimits {
            max_depth_reactions: Some(self.depth_cap),
            ..RouteLimits::default()
        }
    }
}

pub fn breadth_first(
    target: &Molecule,
    cache: &mut CachedModel<'_>,
    inventory: &Inventory,
    budget: &SearchBudget,
    config: &BfsConfig,
) -> Result<SearchOutcome, SearchError> {
    budget.validate()?;
    let mut ex = Expander::new(cache, inventory, budget, PolicyTransform::default());
    let mut graph = AndOrGraph::with_inventory(target.clone(), inventory, Some(2 * config.depth_cap));
    if graph.is_solved() {
        ex.solved_at_start(&graph);
        return Ok(ex.finish(graph, StopReason::Solved, 0, config.route_caps()));
    }

    let mut queue = VecDeque::from([AndOrGraph::ROOT]);
    let mut iterations = 0u64;
    let stop = loop {
        if budget.stop_on_first_solution && graph.is_solved() {
            break StopReason::Solved;
        }
        if ex.clock.time_up() {
            break StopReason::WallTime;
        }
        if ex.clock.iterations_exhausted(iterations) {
            break StopReason::IterationLimit;
        }
        let Some(o) = queue.pop_front() else {
            break StopReason::FrontierExhausted;
        };
        if !graph.can_expand(o) {
            continue;
        }
        let mol = graph.or_node(o).molecule.clone();
        let preds = match ex.predictions(&mol, graph.steps())? {
            Ok(p) => p,
            Err(stop) => break stop,
        };
        let before = graph.or_nodes().len();
        ex.expand(&mut graph, o, &preds);
        queue.extend(before..graph.or_nodes().len());
        iterations += 1;
    };
    Ok(ex.finish(graph, stop, iterations, config.route_caps()))
}
