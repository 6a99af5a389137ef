use rustc_hash::FxHashSet;

use super::{Prediction, RawPrediction};
use crate::molkit::{MoleculeSet, Normalizer};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PostProcessed {
    pub predictions: Vec<Prediction>,
    /// Outputs that failed to normalize or had a probability outside (0, 1].
    pub dropped_invalid: usize,
    /// Valid outputs whose reactant set had already appeared.
    pub dedup_removed: usize,
}

pub fn postprocess(raw: &[RawPrediction], k_max: usize) -> PostProcessed {
    postprocess_with(&Normalizer::default(), raw, k_max)
}

/// Filters invalid outputs, normalizes reactant sets, drops later
/// duplicates, assigns ranks 1.. in model order and truncates to `k_max`.
///
/// Model order is kept as-is; the counters cover the whole raw list.
pub fn postprocess_with(normalizer: &Normalizer, raw: &[RawPrediction], k_max: usize) -> PostProcessed {
    let mut out = PostProcessed::default();
    let mut seen: FxHashSet<MoleculeSet> = FxHashSet::default();

    for r in raw {
        let p = r.probability;
        if !(p > 0.0 && p <= 1.0) {
            out.dropped_invalid += 1;
            continue;
        }
        let set = match normalizer.molecule_set(&r.reactants) {
            Ok(s) if !s.is_empty() => s,
            _ => {
                out.dropped_invalid += 1;
                continue;
            }
        };
        if !seen.insert(set.clone()) {
            out.dedup_removed += 1;
            continue;
        }
        if out.predictions.len() < k_max {
            out.predictions.push(Prediction {
                rank: out.predictions.len() + 1,
                reactants: set,
                probability: p,
                raw_output: r.reactants.join("."),
            });
        }
    }
    out
}
