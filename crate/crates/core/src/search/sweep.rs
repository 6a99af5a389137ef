//! Grid search over algorithm parameters.
//!
//! Score = 1.0 · solved targets + 0.1 · median packing + 0.01 · mean
//! packing. Results are ranked by score, ties by grid order.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_search, summarize, AlgorithmConfig, SearchBudget, SearchError};
use crate::gateway::BackwardModel;
use crate::inventory::Inventory;
use crate::molkit::Molecule;
use crate::stats;

/// Parameter name → candidate values. Points are enumerated with the last
/// name (in sorted order) varying fastest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamGrid {
    pub params: BTreeMap<String, Vec<f64>>,
}

impl ParamGrid {
    pub fn points(&self) -> Vec<BTreeMap<String, f64>> {
        let mut points = vec![BTreeMap::new()];
        for (name, values) in &self.params {
            let mut next = Vec::with_capacity(points.len() * values.len());
            for p in &points {
                for &v in values {
                    let mut q = p.clone();
                    q.insert(name.clone(), v);
                    next.push(q);
                }
            }
            points = next;
        }
        points
    }
}

fn as_depth(name: &str, v: f64) -> Result<usize, SearchError> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(SearchError::InvalidConfig(format!("{name} must be a non-negative integer, got {v}")))
    }
}

/// `base` with the named parameters replaced.
pub fn apply_params(base: &AlgorithmConfig, point: &BTreeMap<String, f64>) -> Result<AlgorithmConfig, SearchError> {
    let mut cfg = base.clone();
    for (name, &v) in point {
        let unknown = || SearchError::InvalidConfig(format!("parameter {name} does not apply to {}", base.name()));
        match (&mut cfg, name.as_str()) {
            (AlgorithmConfig::RetroStar(c), "clip_lo") => c.transform.clip_lo = v,
            (AlgorithmConfig::RetroStar(c), "clip_hi") => c.transform.clip_hi = v,
            (AlgorithmConfig::RetroStar(c), "temperature") => c.transform.temperature = v,
            (AlgorithmConfig::RetroStar(c), "max_depth_andor") => c.max_depth_andor = as_depth(name, v)?,
            (AlgorithmConfig::Mcts(c), "clip_lo") => c.transform.clip_lo = v,
            (AlgorithmConfig::Mcts(c), "clip_hi") => c.transform.clip_hi = v,
            (AlgorithmConfig::Mcts(c), "temperature") => c.transform.temperature = v,
            (AlgorithmConfig::Mcts(c), "bound_constant") => c.bound_constant = v,
            (AlgorithmConfig::Mcts(c), "node_value_constant") => c.node_value_constant = v,
            (AlgorithmConfig::Mcts(c), "max_depth_reactions") => c.max_depth_reactions = as_depth(name, v)?,
            (AlgorithmConfig::BreadthFirst(c), "depth_cap") => c.depth_cap = as_depth(name, v)?,
            _ => return Err(unknown()),
        }
    }
    Ok(cfg)
}

pub fn sweep_score(solved: usize, packings: &[usize]) -> f64 {
    let p: Vec<f64> = packings.iter().map(|&x| x as f64).collect();
    solved as f64 + 0.1 * stats::median(&p).unwrap_or(0.0) + 0.01 * stats::mean(&p).unwrap_or(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Position in grid order.
    pub index: usize,
    pub params: BTreeMap<String, f64>,
    pub config: AlgorithmConfig,
    pub score: f64,
    pub solved: usize,
    pub median_packing: f64,
    pub mean_packing: f64,
}

/// Runs every grid point over `targets` (each search with a fresh cache)
/// and ranks the points.
pub fn sweep(
    base: &AlgorithmConfig,
    model: &dyn BackwardModel,
    inventory: &Inventory,
    targets: &[Molecule],
    grid: &ParamGrid,
    budget: &SearchBudget,
    num_results: usize,
    max_routes: usize,
) -> Result<Vec<SweepResult>, SearchError> {
    let mut results = Vec::new();
    for (index, params) in grid.points().into_iter().enumerate() {
        let config = apply_params(base, &params)?;
        let rows = targets
            .par_iter()
            .map(|t| {
                let out = run_search(&config, t, model, inventory, budget, num_results)?;
                let s = summarize(&t.id, config.name(), model.name(), &out, max_routes);
                Ok((s.solved, if s.solved { s.final_packing } else { 0 }))
            })
            .collect::<Result<Vec<_>, SearchError>>()?;
        let solved = rows.iter().filter(|r| r.0).count();
        let packings: Vec<usize> = rows.iter().map(|r| r.1).collect();
        let p: Vec<f64> = packings.iter().map(|&x| x as f64).collect();
        results.push(SweepResult {
            index,
            params,
            config,
            score: sweep_score(solved, &packings),
            solved,
            median_packing: stats::median(&p).unwrap_or(0.0),
            mean_packing: stats::mean(&p).unwrap_or(0.0),
        });
    }
    results.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    Ok(results)
}
