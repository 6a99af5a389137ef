//! Product-grouped train/valid/test assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataprepError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fold {
    Train,
    Valid,
    Test,
}

impl Fold {
    pub const ALL: [Fold; 3] = [Fold::Train, Fold::Valid, Fold::Test];

    pub fn name(self) -> &'static str {
        match self {
            Fold::Train => "train",
            Fold::Valid => "valid",
            Fold::Test => "test",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Largest-remainder apportionment of `n` groups to the ratio; each
/// target is within one of the exact share.
pub fn fold_targets(n: usize, ratio: [f64; 3]) -> Result<[usize; 3], DataprepError> {
    let total: f64 = ratio.iter().sum();
    if ratio.iter().any(|r| !r.is_finite() || *r < 0.0) || !(total > 0.0) {
        return Err(DataprepError::InvalidRatio(ratio));
    }
    let exact: Vec<f64> = ratio.iter().map(|r| n as f64 * r / total).collect();
    let mut targets = [0usize; 3];
    for i in 0..3 {
        targets[i] = exact[i].floor() as usize;
    }
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let assigned: usize = targets.iter().sum();
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        targets[i] += 1;
    }
    Ok(targets)
}

/// Assigns each reaction (given by its normalized product) to a fold.
/// Reactions sharing a product share a fold; pinned products go to their
/// pinned fold; the rest are shuffled with `seed` and dealt to whichever
/// fold is furthest below its target.
pub fn split_folds(
    products: &[&str],
    ratio: [f64; 3],
    seed: u64,
    pinned: &BTreeMap<String, Fold>,
) -> Result<Vec<Fold>, DataprepError> {
    let mut groups: BTreeMap<&str, Option<Fold>> = BTreeMap::new();
    for p in products {
        groups.entry(p).or_insert_with(|| pinned.get(*p).copied());
    }
    let targets = fold_targets(groups.len(), ratio)?;
    let mut sizes = [0usize; 3];
    for f in groups.values().flatten() {
        sizes[f.index()] += 1;
    }
    let mut free: Vec<&str> = groups.iter().filter(|(_, f)| f.is_none()).map(|(p, _)| *p).collect();
    free.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for p in free {
        let f = Fold::ALL
            .into_iter()
            .max_by(|a, b| {
                let da = targets[a.index()] as i64 - sizes[a.index()] as i64;
                let db = targets[b.index()] as i64 - sizes[b.index()] as i64;
                da.cmp(&db).then(b.index().cmp(&a.index()))
            })
            .expect("three folds");
        sizes[f.index()] += 1;
        groups.insert(p, Some(f));
    }
    Ok(products.iter().map(|p| groups[p].expect("every group assigned")).collect())
}
