//! Best-first AND/OR search with a constant-zero frontier value (Retro*-0).
//!
//! `rn(m)` is the cheapest cost to solve `m` when every unexpanded,
//! expandable molecule is assumed free; `rt(m)` is the cost of the cheapest
//! partial route through `m`. The frontier molecule with the smallest
//! `rt` is expanded next, ties broken by depth and then discovery order.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::{Expander, PolicyTransform, SearchBudget, SearchError, SearchOutcome, StopReason};
use crate::gateway::CachedModel;
use crate::graph::{AndOrGraph, OrId, RouteLimits};
use crate::inventory::Inventory;
use crate::molkit::Molecule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetroStarConfig {
    /// AND/OR depth cap; 10 allows routes up to 5 reactions deep.
    pub max_depth_andor: usize,
    pub transform: PolicyTransform,
}

impl Default for RetroStarConfig {
    fn default() -> Self {
        Self {
            max_depth_andor: 10,
            transform: PolicyTransform::default(),
        }
    }
}

impl RetroStarConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.max_depth_andor % 2 != 0 {
            return Err(SearchError::InvalidConfig("max_depth_andor must be even".into()));
        }
        self.transform.validate()
    }

    pub fn route_caps(&self) -> RouteLimits {
        RouteLimits {
            max_depth_reactions: Some(self.max_depth_andor / 2),
            ..RouteLimits::default()
        }
    }
}

/// Totally ordered f64 for the heaps below (values are never NaN).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Cost(f64);
impl Eq for Cost {}
impl Ord for Cost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// `(rn, rt)` for every OR node.
pub(crate) fn retro_values(g: &AndOrGraph) -> (Vec<f64>, Vec<f64>) {
    let n_or = g.or_nodes().len();
    let n_and = g.and_nodes().len();
    let mut rn = vec![f64::INFINITY; n_or];
    let mut rn_and = vec![f64::INFINITY; n_and];
    let mut pending: Vec<usize> = g.and_nodes().iter().map(|a| a.children.len()).collect();
    let mut acc = vec![0.0; n_and];
    let mut done = vec![false; n_or];

    // Generalized Dijkstra: an AND node is final once all its reactants
    // are; an OR node is final at its first pop.
    let mut heap = BinaryHeap::new();
    for (o, n) in g.or_nodes().iter().enumerate() {
        if n.purchasable || g.can_expand(o) {
            heap.push(Reverse((Cost(0.0), o)));
        }
    }
    while let Some(Reverse((Cost(v), o))) = heap.pop() {
        if done[o] {
            continue;
        }
        done[o] = true;
        rn[o] = v;
        for &a in &g.or_node(o).parents {
            pending[a] -= 1;
            acc[a] += v;
            if pending[a] == 0 {
                let and = g.and_node(a);
                rn_and[a] = and.cost + acc[a];
                if !done[and.parent] {
                    heap.push(Reverse((Cost(rn_and[a]), and.parent)));
                }
            }
        }
    }

    // Top-down: rt(a) = rt(parent) - rn(parent) + rn(a); rt(m) = min over
    // parent reactions. Offsets are non-negative, so Dijkstra order holds.
    let mut rt = vec![f64::INFINITY; n_or];
    let mut heap = BinaryHeap::new();
    if rn[AndOrGraph::ROOT].is_finite() {
        heap.push(Reverse((Cost(rn[AndOrGraph::ROOT]), AndOrGraph::ROOT)));
    }
    let mut seen = vec![false; n_or];
    while let Some(Reverse((Cost(v), o))) = heap.pop() {
        if seen[o] {
            continue;
        }
        seen[o] = true;
        rt[o] = v;
        for &a in &g.or_node(o).children {
            if !rn_and[a].is_finite() {
                continue;
            }
            let ra = v - rn[o] + rn_and[a];
            for &c in &g.and_node(a).children {
                if !seen[c] && ra < rt[c] {
                    rt[c] = ra;
                    heap.push(Reverse((Cost(ra), c)));
                }
            }
        }
    }
    (rn, rt)
}

fn select(g: &AndOrGraph, rt: &[f64]) -> Option<OrId> {
    (0..g.or_nodes().len())
        .filter(|&o| g.can_expand(o) && rt[o].is_finite())
        .min_by(|&a, &b| {
            rt[a]
                .total_cmp(&rt[b])
                .then(g.or_node(a).depth.cmp(&g.or_node(b).depth))
                .then(a.cmp(&b))
        })
}

pub fn retro_star(
    target: &Molecule,
    cache: &mut CachedModel<'_>,
    inventory: &Inventory,
    budget: &SearchBudget,
    config: &RetroStarConfig,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    budget.validate()?;
    let mut ex = Expander::new(cache, inventory, budget, config.transform);
    let mut graph = AndOrGraph::with_inventory(target.clone(), inventory, Some(config.max_depth_andor));
    if graph.is_solved() {
        ex.solved_at_start(&graph);
        return Ok(ex.finish(graph, StopReason::Solved, 0, config.route_caps()));
    }

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
        let (_, rt) = retro_values(&graph);
        let Some(m) = select(&graph, &rt) else {
            break StopReason::FrontierExhausted;
        };
        let mol = graph.or_node(m).molecule.clone();
        match ex.predictions(&mol, graph.steps())? {
            Ok(preds) => {
                ex.expand(&mut graph, m, &preds);
            }
            Err(stop) => break stop,
        }
        iterations += 1;
    };

    let (rn, _) = retro_values(&graph);
    for (o, v) in rn.into_iter().enumerate() {
        graph.set_retro_value(o, v);
    }
    Ok(ex.finish(graph, stop, iterations, config.route_caps()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{FileModel, Prediction};
    use crate::molkit::MoleculeSet;

    fn run(table: &str, blocks: &[&str], target: &str, budget: SearchBudget) -> SearchOutcome {
        let model = FileModel::from_tsv_str("t", table).unwrap();
        let inv = Inventory::from_ids(blocks.iter().copied());
        let mut cache = CachedModel::new(&model, 50);
        retro_star(&Molecule::from_normalized(target), &mut cache, &inv, &budget, &RetroStarConfig::default()).unwrap()
    }

    #[test]
    fn purchasable_target() {
        let out = run("", &["CC"], "CC", SearchBudget::calls(10));
        assert!(out.solved());
        assert_eq!(out.unique_calls, 0);
        assert_eq!(out.trace.first_solution.unwrap().unique_calls, 0);
    }

    #[test]
    fn single_step_route() {
        let out = run("CCOO\tCC.OO\t0.9\n", &["CC", "OO"], "CCOO", SearchBudget::calls(10));
        assert!(out.solved());
        assert_eq!(out.unique_calls, 1);
        assert_eq!(out.stop_reason, StopReason::FrontierExhausted);
    }

    #[test]
    fn cheapest_partial_route_first() {
        // T -> A (p 0.9) or T -> B (p 0.1); A is expanded first.
        let table = "CCCC\tCCC\t0.9\nCCCC\tNNN\t0.1\nCCC\tC\t0.5\nNNN\tN\t0.5\n";
        let out = run(table, &["C", "N"], "CCCC", SearchBudget { stop_on_first_solution: true, ..SearchBudget::calls(10) });
        let order: Vec<&str> = out
            .graph
            .expansion_order()
            .iter()
            .map(|&o| out.graph.or_node(o).molecule.id.as_str())
            .collect();
        assert_eq!(order, ["CCCC", "CCC"]);
        assert_eq!(out.stop_reason, StopReason::Solved);
    }

    #[test]
    fn rn_and_rt_values() {
        let inv = Inventory::from_ids(["O"]);
        let mut g = AndOrGraph::with_inventory(Molecule::from_normalized("CCC"), &inv, Some(10));
        let p = |r: &[&str]| Prediction {
            reactants: MoleculeSet::from_ids(r.iter().copied()),
            probability: 0.5,
            rank: 1,
            raw_output: String::new(),
        };
        let cost = |q: &Prediction| if q.reactants.iter().any(|m| m == "N") { 1.0 } else { 2.0 };
        g.expand(0, &[p(&["CC", "N"]), p(&["CN", "O"])], &inv, cost).unwrap();
        let (rn, rt) = retro_values(&g);
        assert_eq!(rn[0], 1.0);
        let cc = g.find("CC").unwrap();
        let cn = g.find("CN").unwrap();
        assert_eq!(rt[cc], 1.0);
        assert_eq!(rt[cn], 2.0);
        assert_eq!(rn[g.find("O").unwrap()], 0.0);
    }

    #[test]
    fn rerun_against_own_cache_is_free() {
        let model = FileModel::from_tsv_str("t", "CCCC\tCCC\t0.9\nCCC\tC\t0.5\n").unwrap();
        let inv = Inventory::from_ids(["C"]);
        let mut cache = CachedModel::new(&model, 50);
        let t = Molecule::from_normalized("CCCC");
        let cfg = RetroStarConfig::default();
        let first = retro_star(&t, &mut cache, &inv, &SearchBudget::calls(10), &cfg).unwrap();
        let second = retro_star(&t, &mut cache, &inv, &SearchBudget::calls(10), &cfg).unwrap();
        assert_eq!(first.unique_calls, 2);
        assert_eq!(second.unique_calls, 0);
        assert!(second.solved());
    }

    #[test]
    fn odd_depth_rejected() {
        let cfg = RetroStarConfig { max_depth_andor: 7, ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
