use std::fmt::Write as _;

use serde::Serialize;

use super::{AndOrGraph, Route};

#[derive(Debug, Clone, Serialize)]
pub struct OrDump {
    pub id: usize,
    pub molecule: String,
    pub purchasable: bool,
    pub expanded: bool,
    pub solved: bool,
    pub depth: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct AndDump {
    pub id: usize,
    pub parent: usize,
    pub children: Vec<usize>,
    pub reactants: String,
    pub probability: f64,
    pub cost: f64,
    pub solved: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphDump {
    pub root: String,
    pub solved: bool,
    pub expansions: usize,
    pub or_nodes: Vec<OrDump>,
    pub and_nodes: Vec<AndDump>,
}

impl GraphDump {
    pub fn new(g: &AndOrGraph) -> Self {
        Self {
            root: g.root().molecule.id.clone(),
            solved: g.is_solved(),
            expansions: g.steps(),
            or_nodes: g
                .or_nodes()
                .iter()
                .enumerate()
                .map(|(id, n)| OrDump {
                    id,
                    molecule: n.molecule.id.clone(),
                    purchasable: n.purchasable,
                    expanded: n.expanded,
                    solved: n.solved,
                    depth: n.depth,
                })
                .collect(),
            and_nodes: g
                .and_nodes()
                .iter()
                .enumerate()
                .map(|(id, n)| AndDump {
                    id,
                    parent: n.parent,
                    children: n.children.clone(),
                    reactants: n.reaction.reactants.to_string(),
                    probability: n.reaction.probability,
                    cost: n.cost,
                    solved: n.solved,
                })
                .collect(),
        }
    }
}

pub fn graph_to_json(g: &AndOrGraph) -> serde_json::Value {
    serde_json::to_value(GraphDump::new(g)).expect("graph dump serializes")
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn or_line(out: &mut String, g: &AndOrGraph, id: usize) {
    let n = g.or_node(id);
    let color = if n.purchasable {
        "palegreen"
    } else if n.solved {
        "lightblue"
    } else {
        "white"
    };
    let _ = writeln!(
        out,
        "  m{id} [shape=box, style=filled, fillcolor={color}, label=\"{}\"];",
        escape(&n.molecule.id)
    );
}

fn and_lines(out: &mut String, g: &AndOrGraph, id: usize) {
    let a = g.and_node(id);
    let _ = writeln!(out, "  r{id} [shape=circle, label=\"{:.3}\"];", a.reaction.probability);
    let _ = writeln!(out, "  m{} -> r{id};", a.parent);
    for c in &a.children {
        let _ = writeln!(out, "  r{id} -> m{c};");
    }
}

/// The whole graph in Graphviz DOT.
pub fn graph_to_dot(g: &AndOrGraph) -> String {
    let mut out = String::from("digraph search {\n  rankdir=LR;\n");
    for id in 0..g.or_nodes().len() {
        or_line(&mut out, g, id);
    }
    for id in 0..g.and_nodes().len() {
        and_lines(&mut out, g, id);
    }
    out.push_str("}\n");
    out
}

/// One route in Graphviz DOT.
pub fn route_to_dot(g: &AndOrGraph, route: &Route) -> String {
    let mut out = String::from("digraph route {\n  rankdir=LR;\n");
    let mut mols: Vec<usize> = vec![AndOrGraph::ROOT];
    for &a in &route.reactions {
        mols.extend(g.and_node(a).children.iter().copied());
    }
    mols.sort_unstable();
    mols.dedup();
    for m in mols {
        or_line(&mut out, g, m);
    }
    for &a in &route.reactions {
        and_lines(&mut out, g, a);
    }
    out.push_str("}\n");
    out
}
