//! Bipartite AND/OR search graph shared by every search algorithm.
//!
//! OR nodes are molecules, merged on normalized id; AND nodes are
//! reactions. Depth counts both node kinds, so a route of `r` reactions
//! reaches depth `2r`. Expansions are numbered so that the graph as it
//! stood after any step can be rebuilt for metrics over time.

mod export;
mod packing;
mod routes;

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::gateway::Prediction;
use crate::inventory::Inventory;
use crate::molkit::Molecule;

pub use export::{graph_to_dot, graph_to_json, route_to_dot, GraphDump};
pub use packing::{packing_number_exact, packing_number_greedy, PackingError, DEFAULT_EXACT_LIMIT};
pub use routes::{extract_routes, validate_route, Route, RouteLimits};

pub type OrId = usize;
pub type AndId = usize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("molecule {0} is already expanded")]
    AlreadyExpanded(String),
    #[error("expanding {molecule} at depth {depth} would exceed the depth cap {cap}")]
    DepthLimitExceeded {
        molecule: String,
        depth: usize,
        cap: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct OrNode {
    pub molecule: Molecule,
    pub purchasable: bool,
    pub expanded: bool,
    pub parents: Vec<AndId>,
    pub children: Vec<AndId>,
    pub solved: bool,
    /// Minimum over all parents.
    pub depth: usize,
    /// Free slot for algorithm-specific value estimates.
    pub retro_value: f64,
    /// Expansion step that created the node (0 for the root).
    pub created_step: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AndNode {
    pub reaction: Prediction,
    pub parent: OrId,
    /// Distinct reactant OR nodes.
    pub children: Vec<OrId>,
    pub cost: f64,
    pub solved: bool,
    pub depth: usize,
    pub created_step: usize,
}

#[derive(Debug, Clone)]
pub struct AndOrGraph {
    or_nodes: Vec<OrNode>,
    and_nodes: Vec<AndNode>,
    index: FxHashMap<String, OrId>,
    max_depth: Option<usize>,
    /// OR nodes in expansion order; step `i + 1` expanded `expansions[i]`.
    expansions: Vec<OrId>,
}

impl AndOrGraph {
    pub const ROOT: OrId = 0;

    /// `max_depth` caps AND/OR depth: a node at depth `d` can only be
    /// expanded if its reactants would sit at `d + 2 <= max_depth`.
    pub fn new(root: Molecule, purchasable: bool, max_depth: Option<usize>) -> Self {
        let mut index = FxHashMap::default();
        index.insert(root.id.clone(), Self::ROOT);
        Self {
            or_nodes: vec![OrNode {
                molecule: root,
                purchasable,
                expanded: false,
                parents: Vec::new(),
                children: Vec::new(),
                solved: purchasable,
                depth: 0,
                retro_value: 0.0,
                created_step: 0,
            }],
            and_nodes: Vec::new(),
            index,
            max_depth,
            expansions: Vec::new(),
        }
    }

    pub fn with_inventory(root: Molecule, inventory: &Inventory, max_depth: Option<usize>) -> Self {
        let p = inventory.contains(&root);
        Self::new(root, p, max_depth)
    }

    pub fn root(&self) -> &OrNode {
        &self.or_nodes[Self::ROOT]
    }

    pub fn is_solved(&self) -> bool {
        self.root().solved
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.max_depth
    }

    pub fn or_node(&self, id: OrId) -> &OrNode {
        &self.or_nodes[id]
    }

    pub fn and_node(&self, id: AndId) -> &AndNode {
        &self.and_nodes[id]
    }

    pub fn or_nodes(&self) -> &[OrNode] {
        &self.or_nodes
    }

    pub fn and_nodes(&self) -> &[AndNode] {
        &self.and_nodes
    }

    pub fn find(&self, id: &str) -> Option<OrId> {
        self.index.get(id).copied()
    }

    /// Number of expansions performed so far.
    pub fn steps(&self) -> usize {
        self.expansions.len()
    }

    pub fn expansion_order(&self) -> &[OrId] {
        &self.expansions
    }

    pub fn set_retro_value(&mut self, id: OrId, value: f64) {
        self.or_nodes[id].retro_value = value;
    }

    /// Whether `id` may be expanded at all (not purchasable, not expanded,
    /// within the depth cap).
    pub fn can_expand(&self, id: OrId) -> bool {
        let n = &self.or_nodes[id];
        !n.expanded && !n.purchasable && self.max_depth.is_none_or(|cap| n.depth + 2 <= cap)
    }

    /// Adds one AND node per prediction under `id`, creating or merging
    /// reactant OR nodes, then propagates solved flags to ancestors.
    pub fn expand(
        &mut self,
        id: OrId,
        predictions: &[Prediction],
        inventory: &Inventory,
        cost: impl Fn(&Prediction) -> f64,
    ) -> Result<Vec<AndId>, GraphError> {
        let items: Vec<(Prediction, f64)> = predictions.iter().map(|p| (p.clone(), cost(p))).collect();
        self.expand_inner(id, items, &|m: &str| inventory.contains_id(m))
    }

    fn expand_inner(
        &mut self,
        id: OrId,
        items: Vec<(Prediction, f64)>,
        purchasable: &dyn Fn(&str) -> bool,
    ) -> Result<Vec<AndId>, GraphError> {
        let node = &self.or_nodes[id];
        if node.expanded {
            return Err(GraphError::AlreadyExpanded(node.molecule.id.clone()));
        }
        if let Some(cap) = self.max_depth {
            if node.depth + 2 > cap {
                return Err(GraphError::DepthLimitExceeded {
                    molecule: node.molecule.id.clone(),
                    depth: node.depth,
                    cap,
                });
            }
        }
        let step = self.expansions.len() + 1;
        self.expansions.push(id);
        self.or_nodes[id].expanded = true;
        let depth = self.or_nodes[id].depth;

        let mut created = Vec::with_capacity(items.len());
        let mut lowered = Vec::new();
        for (reaction, cost) in items {
            let and_id = self.and_nodes.len();
            let mut children: Vec<OrId> = Vec::with_capacity(reaction.reactants.len());
            let mut prev: Option<&str> = None;
            for m in reaction.reactants.iter() {
                // members are sorted, so repeated reactants are adjacent
                if prev == Some(m) {
                    continue;
                }
                prev = Some(m);
                let child = match self.index.get(m) {
                    Some(&c) => {
                        self.or_nodes[c].parents.push(and_id);
                        if self.or_nodes[c].depth > depth + 2 {
                            self.or_nodes[c].depth = depth + 2;
                            lowered.push(c);
                        }
                        c
                    }
                    None => {
                        let c = self.or_nodes.len();
                        let p = purchasable(m);
                        self.or_nodes.push(OrNode {
                            molecule: Molecule::from_normalized(m),
                            purchasable: p,
                            expanded: false,
                            parents: vec![and_id],
                            children: Vec::new(),
                            solved: p,
                            depth: depth + 2,
                            retro_value: 0.0,
                            created_step: step,
                        });
                        self.index.insert(m.to_string(), c);
                        c
                    }
                };
                children.push(child);
            }
            let solved = children.iter().all(|&c| self.or_nodes[c].solved);
            self.and_nodes.push(AndNode {
                reaction,
                parent: id,
                children,
                cost,
                solved,
                depth: depth + 1,
                created_step: step,
            });
            self.or_nodes[id].children.push(and_id);
            created.push(and_id);
        }
        self.lower_depths(lowered);
        if !self.or_nodes[id].solved && created.iter().any(|&a| self.and_nodes[a].solved) {
            self.propagate_solved(id);
        }
        Ok(created)
    }

    fn lower_depths(&mut self, start: Vec<OrId>) {
        let mut queue: VecDeque<OrId> = start.into();
        while let Some(o) = queue.pop_front() {
            let d = self.or_nodes[o].depth;
            for k in 0..self.or_nodes[o].children.len() {
                let a = self.or_nodes[o].children[k];
                self.and_nodes[a].depth = self.and_nodes[a].depth.min(d + 1);
                for j in 0..self.and_nodes[a].children.len() {
                    let c = self.and_nodes[a].children[j];
                    if self.or_nodes[c].depth > d + 2 {
                        self.or_nodes[c].depth = d + 2;
                        queue.push_back(c);
                    }
                }
            }
        }
    }

    /// Marks `id` solved and pushes the consequence upwards.
    fn propagate_solved(&mut self, id: OrId) {
        let mut stack = vec![id];
        while let Some(o) = stack.pop() {
            if self.or_nodes[o].solved {
                continue;
            }
            self.or_nodes[o].solved = true;
            for k in 0..self.or_nodes[o].parents.len() {
                let a = self.or_nodes[o].parents[k];
                if self.and_nodes[a].solved {
                    continue;
                }
                if self.and_nodes[a].children.iter().all(|&c| self.or_nodes[c].solved) {
                    self.and_nodes[a].solved = true;
                    stack.push(self.and_nodes[a].parent);
                }
            }
        }
    }

    /// Solved flags recomputed from scratch as a least fixpoint, ignoring
    /// the incremental state. Returns `(or_solved, and_solved)`.
    pub fn recompute_solved(&self) -> (Vec<bool>, Vec<bool>) {
        let mut or_s: Vec<bool> = self.or_nodes.iter().map(|n| n.purchasable).collect();
        let mut and_s = vec![false; self.and_nodes.len()];
        loop {
            let mut changed = false;
            for (a, n) in self.and_nodes.iter().enumerate() {
                if !and_s[a] && n.children.iter().all(|&c| or_s[c]) {
                    and_s[a] = true;
                    changed = true;
                }
                if and_s[a] && !or_s[n.parent] {
                    or_s[n.parent] = true;
                    changed = true;
                }
            }
            if !changed {
                return (or_s, and_s);
            }
        }
    }

    /// The graph as it stood after `step` expansions, with node ids
    /// preserved.
    pub fn restricted_to_step(&self, step: usize) -> AndOrGraph {
        let root = &self.or_nodes[Self::ROOT];
        let mut g = AndOrGraph::new(root.molecule.clone(), root.purchasable, self.max_depth);
        let flags: FxHashMap<&str, bool> = self
            .or_nodes
            .iter()
            .map(|n| (n.molecule.id.as_str(), n.purchasable))
            .collect();
        let purchasable = |m: &str| flags.get(m).copied().unwrap_or(false);
        for &o in self.expansions.iter().take(step) {
            let items = self.or_nodes[o]
                .children
                .iter()
                .map(|&a| (self.and_nodes[a].reaction.clone(), self.and_nodes[a].cost))
                .collect();
            let target = g
                .find(&self.or_nodes[o].molecule.id)
                .expect("expanded node exists in prefix graph");
            g.expand_inner(target, items, &purchasable)
                .expect("replaying a valid expansion");
        }
        g
    }
}
