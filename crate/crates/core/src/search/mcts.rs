//! PUCT Monte Carlo tree search over frontier states.
//!
//! A state is the sorted multiset of molecules still to be made. Expanding
//! a state queries the model for its lexicographically first molecule;
//! each prediction yields a child state. Every model answer is also
//! applied to the shared AND/OR graph so that routes and diversity are
//! measured the same way as for the other algorithms.

use serde::{Deserialize, Serialize};

use super::{Expander, PolicyTransform, SearchBudget, SearchError, SearchOutcome, StopReason};
use crate::gateway::CachedModel;
use crate::graph::{AndOrGraph, RouteLimits};
use crate::inventory::Inventory;
use crate::molkit::Molecule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MctsConfig {
    pub bound_constant: f64,
    pub node_value_constant: f64,
    pub max_depth_reactions: usize,
    pub transform: PolicyTransform,
}

impl Default for MctsConfig {
    fn default() -> Self {
        Self {
            bound_constant: 100.0,
            node_value_constant: 0.5,
            max_depth_reactions: 20,
            transform: PolicyTransform::default(),
        }
    }
}

impl MctsConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.bound_constant > 0.0) {
            return Err(SearchError::InvalidConfig("bound_constant must be positive".into()));
        }
        if !(self.node_value_constant > 0.0 && self.node_value_constant < 1.0) {
            return Err(SearchError::InvalidConfig("node_value_constant must be in (0, 1)".into()));
        }
        self.transform.validate()
    }

    pub fn route_caps(&self) -> RouteLimits {
        RouteLimits {
            max_depth_reactions: Some(self.max_depth_reactions),
            max_reactions: Some(self.max_depth_reactions),
            ..RouteLimits::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    /// Sorted ids of molecules still to be made.
    open: Vec<String>,
    depth: usize,
    children: Vec<usize>,
    prior: f64,
    visits: u64,
    value_sum: f64,
    expanded: bool,
    /// No further iteration through this node can change anything.
    exhausted: bool,
}

impl Node {
    fn new(open: Vec<String>, depth: usize, prior: f64) -> Self {
        Self {
            open,
            depth,
            children: Vec::new(),
            prior,
            visits: 0,
            value_sum: 0.0,
            expanded: false,
            exhausted: false,
        }
    }
}

/// PUCT score `Q + c·P·sqrt(N_parent)/(1 + N)` with `Q = v0` when unvisited.
pub(crate) fn puct(q: Option<f64>, prior: f64, parent_visits: u64, visits: u64, c: f64, v0: f64) -> f64 {
    q.unwrap_or(v0) + c * prior * (parent_visits as f64).sqrt() / (1.0 + visits as f64)
}

struct Tree {
    nodes: Vec<Node>,
    c: f64,
    v0: f64,
}

impl Tree {
    fn q(&self, i: usize) -> Option<f64> {
        let n = &self.nodes[i];
        (n.visits > 0).then(|| n.value_sum / n.visits as f64)
    }

    /// Best non-exhausted child; ties go to the earlier child.
    fn best_child(&self, i: usize) -> Option<usize> {
        let parent = &self.nodes[i];
        let mut best: Option<(usize, f64)> = None;
        for &c in &parent.children {
            let n = &self.nodes[c];
            if n.exhausted {
                continue;
            }
            let s = puct(self.q(c), n.prior, parent.visits, n.visits, self.c, self.v0);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        best.map(|(c, _)| c)
    }

    fn backprop(&mut self, path: &[usize], value: f64) {
        for &i in path {
            self.nodes[i].visits += 1;
            self.nodes[i].value_sum += value;
        }
        // Exhaustion bubbles up once every child is exhausted.
        for &i in path.iter().rev() {
            let n = &self.nodes[i];
            if !n.exhausted && n.expanded && n.children.iter().all(|&c| self.nodes[c].exhausted) {
                self.nodes[i].exhausted = true;
            }
        }
    }
}

pub fn mcts(
    target: &Molecule,
    cache: &mut CachedModel<'_>,
    inventory: &Inventory,
    budget: &SearchBudget,
    config: &MctsConfig,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    budget.validate()?;
    let mut ex = Expander::new(cache, inventory, budget, config.transform);
    let mut graph = AndOrGraph::with_inventory(target.clone(), inventory, Some(2 * config.max_depth_reactions));
    let root_open = if graph.is_solved() { Vec::new() } else { vec![target.id.clone()] };
    let mut tree = Tree {
        nodes: vec![Node::new(root_open, 0, 1.0)],
        c: config.bound_constant,
        v0: config.node_value_constant,
    };
    if graph.is_solved() {
        ex.solved_at_start(&graph);
        tree.backprop(&[0], 1.0);
        tree.nodes[0].exhausted = true;
        return Ok(ex.finish(graph, StopReason::Solved, 1, config.route_caps()));
    }

    let mut iterations = 0u64;
    let stop = loop {
        if budget.stop_on_first_solution && graph.is_solved() {
            break StopReason::Solved;
        }
        if tree.nodes[0].exhausted {
            break StopReason::FrontierExhausted;
        }
        if ex.clock.time_up() {
            break StopReason::WallTime;
        }
        if ex.clock.iterations_exhausted(iterations) {
            break StopReason::IterationLimit;
        }

        let mut path = vec![0usize];
        let mut cur = 0usize;
        while tree.nodes[cur].expanded {
            match tree.best_child(cur) {
                Some(c) => {
                    cur = c;
                    path.push(c);
                }
                None => break,
            }
        }

        let node = &tree.nodes[cur];
        let value = if node.expanded {
            // Every child exhausted; backprop below marks this node too.
            0.0
        } else if node.open.is_empty() {
            tree.nodes[cur].exhausted = true;
            1.0
        } else if node.depth >= config.max_depth_reactions {
            tree.nodes[cur].exhausted = true;
            0.0
        } else {
            let mol = Molecule::from_normalized(node.open[0].clone());
            let preds = match ex.predictions(&mol, graph.steps())? {
                Ok(p) => p,
                Err(stop) => break stop,
            };
            if let Some(o) = graph.find(&mol.id) {
                ex.expand(&mut graph, o, &preds);
            }
            let priors = config
                .transform
                .apply(&preds.iter().map(|p| p.probability).collect::<Vec<_>>());
            let depth = tree.nodes[cur].depth + 1;
            let rest = tree.nodes[cur].open[1..].to_vec();
            for (p, prior) in preds.iter().zip(priors) {
                let mut open = rest.clone();
                open.extend(
                    p.reactants
                        .iter()
                        .filter(|m| !inventory.contains_id(m))
                        .map(str::to_string),
                );
                open.sort_unstable();
                let id = tree.nodes.len();
                tree.nodes.push(Node::new(open, depth, prior));
                tree.nodes[cur].children.push(id);
            }
            tree.nodes[cur].expanded = true;
            if preds.is_empty() {
                tree.nodes[cur].exhausted = true;
                0.0
            } else {
                config.node_value_constant
            }
        };
        tree.backprop(&path, value);
        iterations += 1;
    };
    Ok(ex.finish(graph, stop, iterations, config.route_caps()))
}
