//! Solution and diversity metrics over the course of a search.

use serde::{Deserialize, Serialize};

use super::{EventKind, SearchOutcome, SearchTrace, StopReason};
use crate::graph::{extract_routes, packing_number_greedy, AndOrGraph, RouteLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Calls,
    Seconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub axis: Axis,
    pub checkpoint: f64,
    /// Time and calls of the last event at or before the checkpoint.
    pub wall_time_s: f64,
    pub unique_calls: u64,
    pub step: usize,
    pub solved: bool,
    pub packing: usize,
    pub packing_running_max: usize,
}

/// Greedy packing of the routes present after each of `steps` expansions.
pub fn packing_at_steps(graph: &AndOrGraph, steps: &[usize], limits: &RouteLimits) -> Vec<(bool, usize)> {
    let mut out = Vec::with_capacity(steps.len());
    let mut last: Option<(usize, (bool, usize))> = None;
    for &s in steps {
        let v = match last {
            Some((ls, v)) if ls == s => v,
            _ => {
                let snap = if s >= graph.steps() { graph.clone() } else { graph.restricted_to_step(s) };
                let routes = extract_routes(&snap, limits);
                (snap.is_solved(), packing_number_greedy(&routes))
            }
        };
        last = Some((s, v));
        out.push(v);
    }
    out
}

/// Samples the run at each checkpoint on `axis` and reports whether it was
/// solved and how many non-overlapping routes the graph held, with a
/// running maximum over checkpoints.
pub fn metrics_over_time(
    graph: &AndOrGraph,
    trace: &SearchTrace,
    axis: Axis,
    checkpoints: &[f64],
    limits: &RouteLimits,
) -> Vec<MetricPoint> {
    let mut cps = checkpoints.to_vec();
    cps.sort_by(f64::total_cmp);
    let mut located = Vec::with_capacity(cps.len());
    for &x in &cps {
        let (mut step, mut t, mut calls) = (0, 0.0, 0);
        for e in &trace.events {
            let v = match axis {
                Axis::Calls => e.unique_calls as f64,
                Axis::Seconds => e.wall_time_s,
            };
            if v > x {
                break;
            }
            t = e.wall_time_s;
            calls = e.unique_calls;
            if e.kind == EventKind::Expansion {
                step = e.step;
            }
        }
        located.push((x, step, t, calls));
    }
    let steps: Vec<usize> = located.iter().map(|l| l.1).collect();
    let values = packing_at_steps(graph, &steps, limits);
    let mut running = 0;
    located
        .into_iter()
        .zip(values)
        .map(|((x, step, t, calls), (solved, packing))| {
            running = running.max(packing);
            MetricPoint {
                axis,
                checkpoint: x,
                wall_time_s: t,
                unique_calls: calls,
                step,
                solved,
                packing,
                packing_running_max: running,
            }
        })
        .collect()
}

/// `n + 1` evenly spaced checkpoints from 0 to the end of the trace.
pub fn even_checkpoints(trace: &SearchTrace, axis: Axis, n: usize) -> Vec<f64> {
    let end = trace.events.last().map_or(0.0, |e| match axis {
        Axis::Calls => e.unique_calls as f64,
        Axis::Seconds => e.wall_time_s,
    });
    let n = n.max(1);
    (0..=n).map(|i| end * i as f64 / n as f64).collect()
}

/// One summary row per (target, algorithm, model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub target: String,
    pub algorithm: String,
    pub model: String,
    pub solved: bool,
    pub time_to_solution_s: Option<f64>,
    pub calls_to_solution: Option<u64>,
    pub final_packing: usize,
    pub unique_calls: u64,
    pub cache_hits: u64,
    pub expansions: usize,
    pub iterations: u64,
    pub stop_reason: StopReason,
    pub elapsed_s: f64,
}

/// Number of evenly spaced expansion steps sampled for `final_packing`.
pub const PACKING_SAMPLES: usize = 10;

pub fn summarize(target: &str, algorithm: &str, model: &str, out: &SearchOutcome, max_routes: usize) -> SearchSummary {
    let limits = RouteLimits {
        max_routes,
        ..out.route_caps
    };
    let total = out.graph.steps();
    let mut steps: Vec<usize> = (0..=PACKING_SAMPLES).map(|i| total * i / PACKING_SAMPLES).collect();
    steps.dedup();
    let final_packing = packing_at_steps(&out.graph, &steps, &limits)
        .into_iter()
        .map(|(_, p)| p)
        .max()
        .unwrap_or(0);
    let first = out.trace.first_solution;
    let cache_hits = out
        .trace
        .events
        .iter()
        .filter(|e| e.kind == EventKind::CacheHit)
        .count() as u64;
    SearchSummary {
        target: target.to_string(),
        algorithm: algorithm.to_string(),
        model: model.to_string(),
        solved: out.solved(),
        time_to_solution_s: first.map(|f| f.wall_time_s),
        calls_to_solution: first.map(|f| f.unique_calls),
        final_packing,
        unique_calls: out.unique_calls,
        cache_hits,
        expansions: total,
        iterations: out.iterations,
        stop_reason: out.stop_reason,
        elapsed_s: out.elapsed_s,
    }
}
