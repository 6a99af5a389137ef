//! Number of routes with pairwise-disjoint reaction sets.

use super::Route;

pub const DEFAULT_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PackingError {
    #[error("{got} routes exceed the exact-packing limit of {limit}")]
    TooManyRoutes { got: usize, limit: usize },
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    // both sorted
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return false,
        }
    }
    true
}

fn sorted_sets(routes: &[Route]) -> Vec<Vec<usize>> {
    routes
        .iter()
        .map(|r| {
            let mut v = r.reactions.clone();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect()
}

/// Greedy packing: shortest routes first (then input order), keeping each
/// route that shares no reaction with those already kept.
pub fn packing_number_greedy(routes: &[Route]) -> usize {
    let sets = sorted_sets(routes);
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by_key(|&i| (routes[i].num_reactions, i));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| disjoint(&sets[i], &sets[k])) {
            kept.push(i);
        }
    }
    kept.len()
}

/// Exact maximum packing by branch and bound on the conflict graph.
pub fn packing_number_exact(routes: &[Route], limit: usize) -> Result<usize, PackingError> {
    if routes.len() > limit || routes.len() > 64 {
        return Err(PackingError::TooManyRoutes {
            got: routes.len(),
            limit: limit.min(64),
        });
    }
    let sets = sorted_sets(routes);
    let n = sets.len();
    let mut conflict = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && !disjoint(&sets[i], &sets[j]) {
                conflict[i] |= 1 << j;
            }
        }
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = 0;
    max_independent(&conflict, all, 0, &mut best);
    Ok(best)
}

fn max_independent(conflict: &[u64], candidates: u64, size: usize, best: &mut usize) {
    if candidates == 0 {
        *best = (*best).max(size);
        return;
    }
    if size + candidates.count_ones() as usize <= *best {
        return;
    }
    let v = candidates.trailing_zeros() as usize;
    let bit = 1u64 << v;
    max_independent(conflict, candidates & !bit & !conflict[v], size + 1, best);
    max_independent(conflict, candidates & !bit, size, best);
}
