use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::{AndId, AndOrGraph, OrId};

/// A complete synthesis plan: one chosen reaction for every
/// non-purchasable molecule reachable from the root through the choice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Route {
    /// Sorted AND node ids. Within one graph an AND node is identified by
    /// its (product, reactant set) pair, so these double as reaction keys.
    pub reactions: Vec<AndId>,
    pub total_cost: f64,
    pub num_reactions: usize,
    /// Longest root-to-leaf chain of reactions.
    pub max_depth_reactions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteLimits {
    pub max_routes: usize,
    pub max_cost: Option<f64>,
    pub max_reactions: Option<usize>,
    pub max_depth_reactions: Option<usize>,
    /// Safety valve on partial assignments popped from the queue.
    pub max_pops: usize,
}

impl Default for RouteLimits {
    fn default() -> Self {
        Self {
            max_routes: 100,
            max_cost: None,
            max_reactions: None,
            max_depth_reactions: None,
            max_pops: 200_000,
        }
    }
}

impl RouteLimits {
    pub fn new(max_routes: usize) -> Self {
        Self {
            max_routes,
            ..Self::default()
        }
    }
}

#[derive(Clone)]
struct Partial {
    choice: Vec<(OrId, AndId)>,
    /// Molecules still needing a reaction, with the reaction depth at
    /// which they were reached.
    open: Vec<(OrId, usize)>,
    g: f64,
    h: f64,
    seq: u64,
}

impl Partial {
    fn f(&self) -> f64 {
        self.g + self.h
    }
}

impl PartialEq for Partial {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Partial {}
impl PartialOrd for Partial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Partial {
    // BinaryHeap is a max-heap; invert so the cheapest pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f()
            .total_cmp(&self.f())
            .then(other.choice.len().cmp(&self.choice.len()))
            .then(other.seq.cmp(&self.seq))
    }
}

fn chosen(choice: &[(OrId, AndId)], o: OrId) -> Option<AndId> {
    choice.iter().find(|(m, _)| *m == o).map(|&(_, a)| a)
}

/// True if `target` is reachable from `from` through chosen reactions.
fn reaches(graph: &AndOrGraph, choice: &[(OrId, AndId)], from: OrId, target: OrId) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![from];
    while let Some(o) = stack.pop() {
        if o == target {
            return true;
        }
        if let Some(a) = chosen(choice, o) {
            for &c in &graph.and_node(a).children {
                if !seen.contains(&c) {
                    seen.push(c);
                    stack.push(c);
                }
            }
        }
    }
    false
}

fn longest_chain(graph: &AndOrGraph, choice: &[(OrId, AndId)], o: OrId) -> usize {
    match chosen(choice, o) {
        None => 0,
        Some(a) => {
            1 + graph
                .and_node(a)
                .children
                .iter()
                .map(|&c| longest_chain(graph, choice, c))
                .max()
                .unwrap_or(0)
        }
    }
}

const TIE_EPS: f64 = 1e-9;

/// Enumerates routes in non-decreasing total cost; equal costs are ordered
/// by fewer reactions, then by the sorted AND ids (discovery order).
///
/// Best-first search over partial assignments of reactions to molecules.
/// The bound for a partial is its chosen cost plus, for each open
/// molecule, its cheapest solved reaction: each open molecule needs a
/// reaction of its own, so the bound never overestimates.
pub fn extract_routes(graph: &AndOrGraph, limits: &RouteLimits) -> Vec<Route> {
    if !graph.is_solved() || limits.max_routes == 0 {
        return Vec::new();
    }
    let root = graph.root();
    if root.purchasable {
        return vec![Route {
            reactions: Vec::new(),
            total_cost: 0.0,
            num_reactions: 0,
            max_depth_reactions: 0,
        }];
    }

    let min_cost: Vec<f64> = graph
        .or_nodes()
        .iter()
        .map(|n| {
            if n.purchasable {
                0.0
            } else {
                n.children
                    .iter()
                    .filter(|&&a| graph.and_node(a).solved)
                    .map(|&a| graph.and_node(a).cost)
                    .fold(f64::INFINITY, f64::min)
            }
        })
        .collect();

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Partial {
        choice: Vec::new(),
        open: vec![(AndOrGraph::ROOT, 0)],
        g: 0.0,
        h: min_cost[AndOrGraph::ROOT],
        seq,
    });

    let mut out: Vec<Route> = Vec::new();
    // Complete routes sharing the current cost level, emitted once the
    // queue has moved past that level.
    let mut batch: Vec<Route> = Vec::new();
    let flush = |batch: &mut Vec<Route>, out: &mut Vec<Route>| {
        batch.sort_by(|a, b| {
            a.num_reactions
                .cmp(&b.num_reactions)
                .then_with(|| a.reactions.cmp(&b.reactions))
        });
        out.append(batch);
    };

    let mut pops = 0usize;
    while let Some(p) = heap.pop() {
        if let Some(first) = batch.first() {
            if p.f() > first.total_cost + TIE_EPS {
                flush(&mut batch, &mut out);
                if out.len() >= limits.max_routes {
                    break;
                }
            }
        }
        pops += 1;
        if pops > limits.max_pops {
            log::warn!("route enumeration stopped after {} partial routes", limits.max_pops);
            break;
        }

        if p.open.is_empty() {
            let depth = longest_chain(graph, &p.choice, AndOrGraph::ROOT);
            if limits.max_depth_reactions.is_some_and(|cap| depth > cap) {
                continue;
            }
            let mut reactions: Vec<AndId> = p.choice.iter().map(|&(_, a)| a).collect();
            reactions.sort_unstable();
            batch.push(Route {
                num_reactions: reactions.len(),
                reactions,
                total_cost: p.g,
                max_depth_reactions: depth,
            });
            continue;
        }

        let (m, d) = p.open[0];
        if limits.max_depth_reactions.is_some_and(|cap| d + 1 > cap) {
            continue;
        }
        for &a in &graph.or_node(m).children {
            let and = graph.and_node(a);
            if !and.solved {
                continue;
            }
            if and
                .children
                .iter()
                .any(|&c| c == m || reaches(graph, &p.choice, c, m))
            {
                continue;
            }
            let mut choice = p.choice.clone();
            choice.push((m, a));
            let mut open: Vec<(OrId, usize)> = p.open[1..].to_vec();
            for &c in &and.children {
                let n = graph.or_node(c);
                if n.purchasable || chosen(&choice, c).is_some() {
                    continue;
                }
                match open.iter_mut().find(|(o, _)| *o == c) {
                    Some(entry) => entry.1 = entry.1.max(d + 1),
                    None => open.push((c, d + 1)),
                }
            }
            if limits
                .max_reactions
                .is_some_and(|cap| choice.len() + open.len() > cap)
            {
                continue;
            }
            let h: f64 = open.iter().map(|&(o, _)| min_cost[o]).sum();
            let g = p.g + and.cost;
            if !h.is_finite() || limits.max_cost.is_some_and(|cap| g + h > cap + TIE_EPS) {
                continue;
            }
            seq += 1;
            heap.push(Partial {
                choice,
                open,
                g,
                h,
                seq,
            });
        }
    }
    if out.len() < limits.max_routes {
        flush(&mut batch, &mut out);
    }
    out.truncate(limits.max_routes);
    out
}

/// Independent structural check of a route against its graph.
pub fn validate_route(
    graph: &AndOrGraph,
    route: &Route,
    max_reactions: Option<usize>,
    max_depth_reactions: Option<usize>,
) -> Result<(), String> {
    let n_and = graph.and_nodes().len();
    let mut selected: Vec<Option<AndId>> = vec![None; graph.or_nodes().len()];
    for &a in &route.reactions {
        if a >= n_and {
            return Err(format!("reaction {a} is not in the graph"));
        }
        let parent = graph.and_node(a).parent;
        if let Some(prev) = selected[parent] {
            return Err(format!("molecule {} has two reactions ({prev}, {a})", graph.or_node(parent).molecule));
        }
        selected[parent] = Some(a);
    }
    if route.num_reactions != route.reactions.len() {
        return Err("num_reactions does not match the reaction set".into());
    }

    // Depth-first walk; `on_path` detects cycles, `depth` memoizes chains.
    fn walk(
        graph: &AndOrGraph,
        selected: &[Option<AndId>],
        o: OrId,
        on_path: &mut Vec<bool>,
        depth: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
    ) -> Result<usize, String> {
        if let Some(d) = depth[o] {
            return Ok(d);
        }
        let node = graph.or_node(o);
        if node.purchasable {
            if selected[o].is_some() {
                return Err(format!("purchasable {} has a reaction in the route", node.molecule));
            }
            depth[o] = Some(0);
            return Ok(0);
        }
        let Some(a) = selected[o] else {
            return Err(format!("leaf {} is not purchasable", node.molecule));
        };
        if on_path[o] {
            return Err(format!("cycle through {}", node.molecule));
        }
        on_path[o] = true;
        used[a] = true;
        let mut deepest = 0;
        for &c in &graph.and_node(a).children {
            deepest = deepest.max(walk(graph, selected, c, on_path, depth, used)?);
        }
        on_path[o] = false;
        depth[o] = Some(deepest + 1);
        Ok(deepest + 1)
    }

    let mut on_path = vec![false; graph.or_nodes().len()];
    let mut depth = vec![None; graph.or_nodes().len()];
    let mut used = vec![false; n_and];
    let chain = walk(graph, &selected, AndOrGraph::ROOT, &mut on_path, &mut depth, &mut used)?;
    if let Some(&stray) = route.reactions.iter().find(|&&a| !used[a]) {
        return Err(format!("reaction {stray} is not reachable from the root"));
    }
    if chain != route.max_depth_reactions {
        return Err(format!("depth {chain} but route reports {}", route.max_depth_reactions));
    }
    let cost: f64 = route.reactions.iter().map(|&a| graph.and_node(a).cost).sum();
    if (cost - route.total_cost).abs() > 1e-9 * cost.abs().max(1.0) {
        return Err(format!("cost {cost} but route reports {}", route.total_cost));
    }
    if let Some(cap) = max_reactions {
        if route.num_reactions > cap {
            return Err(format!("{} reactions exceed the cap {cap}", route.num_reactions));
        }
    }
    if let Some(cap) = max_depth_reactions {
        if chain > cap {
            return Err(format!("reaction depth {chain} exceeds the cap {cap}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::Prediction;
    use crate::inventory::Inventory;
    use crate::molkit::{Molecule, MoleculeSet};

    fn pred(reactants: &[&str], p: f64) -> Prediction {
        Prediction {
            reactants: MoleculeSet::from_ids(reactants.iter().copied()),
            probability: p,
            rank: 1,
            raw_output: reactants.join("."),
        }
    }

    /// Cost of a prediction is encoded in its probability slot for these
    /// tests so that costs are exact.
    fn by_value(p: &Prediction) -> f64 {
        p.probability
    }

    #[test]
    fn unsolved_graph_has_no_routes() {
        let inv = Inventory::from_ids(["O"]);
        let mut g = AndOrGraph::with_inventory(Molecule::from_normalized("CC"), &inv, None);
        g.expand(0, &[pred(&["N"], 1.0)], &inv, by_value).unwrap();
        assert!(extract_routes(&g, &RouteLimits::default()).is_empty());
    }

    #[test]
    fn purchasable_root_has_one_empty_route() {
        let inv = Inventory::from_ids(["CC"]);
        let g = AndOrGraph::with_inventory(Molecule::from_normalized("CC"), &inv, None);
        let r = extract_routes(&g, &RouteLimits::default());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].num_reactions, 0);
        validate_route(&g, &r[0], None, None).unwrap();
    }

    #[test]
    fn shared_intermediate_chosen_once() {
        // T -> A + B ; A -> C ; B -> C ; C -> O
        let inv = Inventory::from_ids(["O"]);
        let mut g = AndOrGraph::with_inventory(Molecule::from_normalized("CCCC"), &inv, None);
        g.expand(0, &[pred(&["CC", "CN"], 1.0)], &inv, by_value).unwrap();
        g.expand(g.find("CC").unwrap(), &[pred(&["C"], 1.0)], &inv, by_value).unwrap();
        g.expand(g.find("CN").unwrap(), &[pred(&["C"], 1.0)], &inv, by_value).unwrap();
        g.expand(g.find("C").unwrap(), &[pred(&["O"], 1.0)], &inv, by_value).unwrap();
        let r = extract_routes(&g, &RouteLimits::default());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].num_reactions, 4);
        assert_eq!(r[0].max_depth_reactions, 3);
        assert!((r[0].total_cost - 4.0).abs() < 1e-12);
        validate_route(&g, &r[0], None, Some(3)).unwrap();
        assert!(validate_route(&g, &r[0], None, Some(2)).is_err());
        let capped = RouteLimits {
            max_depth_reactions: Some(2),
            ..RouteLimits::default()
        };
        assert!(extract_routes(&g, &capped).is_empty());
    }

    #[test]
    fn cycles_are_excluded() {
        // T -> A ; A -> T (cycle) ; A -> O
        let inv = Inventory::from_ids(["O"]);
        let mut g = AndOrGraph::with_inventory(Molecule::from_normalized("CCC"), &inv, None);
        g.expand(0, &[pred(&["CC"], 1.0)], &inv, by_value).unwrap();
        g.expand(1, &[pred(&["CCC"], 0.1), pred(&["O"], 2.0)], &inv, by_value).unwrap();
        let r = extract_routes(&g, &RouteLimits::default());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].reactions, vec![0, 2]);
    }

    #[test]
    fn validator_rejects_broken_routes() {
        let inv = Inventory::from_ids(["O"]);
        let mut g = AndOrGraph::with_inventory(Molecule::from_normalized("CCC"), &inv, None);
        g.expand(0, &[pred(&["CC"], 1.0), pred(&["O"], 3.0)], &inv, by_value).unwrap();
        g.expand(1, &[pred(&["O"], 1.0)], &inv, by_value).unwrap();
        let ok = Route { reactions: vec![0, 2], total_cost: 2.0, num_reactions: 2, max_depth_reactions: 2 };
        validate_route(&g, &ok, None, None).unwrap();
        let open_leaf = Route { reactions: vec![0], total_cost: 1.0, num_reactions: 1, max_depth_reactions: 1 };
        assert!(validate_route(&g, &open_leaf, None, None).is_err());
        let two_choices = Route { reactions: vec![0, 1, 2], total_cost: 5.0, num_reactions: 3, max_depth_reactions: 2 };
        assert!(validate_route(&g, &two_choices, None, None).is_err());
        let wrong_cost = Route { total_cost: 7.0, ..ok.clone() };
        assert!(validate_route(&g, &wrong_cost, None, None).is_err());
        assert!(validate_route(&g, &ok, Some(1), None).is_err());
    }
}
