//! Seeded synthetic reaction universes with exact ground truth.
//!
//! Molecules are generated bottom-up in layers: building blocks first,
//! then a pool of dead-end molecules (neither purchasable nor makeable),
//! then non-blocks whose reactions only use strictly earlier molecules.
//! The backward relation is therefore acyclic and solvability, minimum
//! route size and route counts follow from one pass in generation order.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BackwardModel, ForwardOracle, GatewayError, RawPrediction};
use crate::inventory::Inventory;
use crate::molkit::{Molecule, MoleculeSet, Normalizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniverseConfig {
    pub num_blocks: usize,
    pub num_nonblocks: usize,
    /// Upper bound on reactants per reaction, in `1..=4`.
    pub max_reactants: usize,
    /// Expected number of distractor reactions per non-block. Distractors
    /// always consume at least one dead-end molecule.
    pub distractor_rate: f64,
    /// Number of non-block layers.
    pub max_depth: usize,
    pub seed: u64,
    /// Probability that a non-block gets only distractor reactions, making
    /// it unsolvable.
    pub dead_end_rate: f64,
    /// Non-distractor reactions per non-block are drawn from `1..=max_alternatives`.
    pub max_alternatives: usize,
    /// Give every reaction probability 0.5 (equal reaction costs).
    pub uniform_probabilities: bool,
    /// Number of search targets sampled from the non-blocks; all when unset.
    pub num_targets: Option<usize>,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        Self {
            num_blocks: 200,
            num_nonblocks: 300,
            max_reactants: 3,
            distractor_rate: 1.0,
            max_depth: 5,
            seed: 0,
            dead_end_rate: 0.1,
            max_alternatives: 3,
            uniform_probabilities: false,
            num_targets: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReactionKind {
    /// Drawn from blocks and earlier non-blocks.
    Primary,
    /// Consumes at least one dead-end molecule.
    Distractor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseReaction {
    pub reactants: MoleculeSet,
    pub probability: f64,
    pub kind: ReactionKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub solvable: bool,
    /// Fewest reactions in a route tree (shared sub-routes counted once per
    /// occurrence); `None` when unsolvable.
    pub min_route_reactions: Option<u32>,
    /// Number of distinct route trees, saturating.
    pub route_count_bound: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUniverse {
    pub config: UniverseConfig,
    pub building_blocks: BTreeSet<String>,
    pub dead_ends: BTreeSet<String>,
    /// Every molecule in generation order: blocks, dead ends, non-blocks.
    pub molecules: Vec<String>,
    pub reactions: BTreeMap<String, Vec<UniverseReaction>>,
    pub targets: Vec<String>,
    /// Ground truth for every molecule that is not a building block.
    pub ground_truth: BTreeMap<String, GroundTruth>,
}

const ALPHABET: [&str; 8] = ["C", "N", "O", "S", "F", "Cl", "Br", "P"];

/// A unique, valid, single-component SMILES for molecule `i` of a family.
fn molecule_name(prefix: &str, mut i: usize) -> String {
    let mut digits = Vec::new();
    loop {
        digits.push(ALPHABET[i % 8]);
        i /= 8;
        if i == 0 {
            break;
        }
    }
    digits.reverse();
    let mut s = String::from(prefix);
    for d in digits {
        s.push_str(d);
    }
    s
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &'a [String]) -> &'a String {
    &pool[rng.random_range(0..pool.len())]
}

impl SyntheticUniverse {
    pub fn generate(config: UniverseConfig) -> Result<Self, GatewayError> {
        let c = &config;
        let invalid = |m: &str| Err(GatewayError::InvalidConfig(m.to_string()));
        if c.num_blocks == 0 {
            return invalid("num_blocks must be at least 1");
        }
        if !(1..=4).contains(&c.max_reactants) {
            return invalid("max_reactants must be in 1..=4");
        }
        if c.num_nonblocks > 0 && c.max_depth == 0 {
            return invalid("max_depth must be at least 1 when there are non-blocks");
        }
        if !(c.distractor_rate >= 0.0 && c.distractor_rate.is_finite()) {
            return invalid("distractor_rate must be a finite non-negative number");
        }
        if !(0.0..=1.0).contains(&c.dead_end_rate) {
            return invalid("dead_end_rate must be in [0, 1]");
        }
        if c.max_alternatives == 0 {
            return invalid("max_alternatives must be at least 1");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let blocks: Vec<String> = (0..c.num_blocks).map(|i| molecule_name("C", i)).collect();
        let num_dead = if c.num_nonblocks == 0 {
            0
        } else {
            c.num_nonblocks.div_ceil(10)
        };
        let dead: Vec<String> = (0..num_dead).map(|i| molecule_name("O", i)).collect();

        let mut molecules: Vec<String> = blocks.iter().chain(&dead).cloned().collect();
        let mut layers: Vec<Vec<String>> = vec![blocks.clone()];
        let mut earlier: Vec<String> = blocks.clone();
        let mut reactions = BTreeMap::new();

        for j in 0..c.num_nonblocks {
            let layer = 1 + j * c.max_depth / c.num_nonblocks;
            while layers.len() <= layer {
                // `earlier` holds everything from completed layers only.
                if let Some(done) = layers.last() {
                    if layers.len() > 1 {
                        earlier.extend(done.iter().cloned());
                    }
                }
                layers.push(Vec::new());
            }
            let id = molecule_name("N", j);
            let prev_layer = &layers[layer - 1];
            let prev_pool: &[String] = if prev_layer.is_empty() { &earlier } else { prev_layer };

            let doomed = rng.random_bool(c.dead_end_rate);
            let mut list: Vec<(Vec<String>, ReactionKind)> = Vec::new();
            if !doomed {
                let alternatives = rng.random_range(1..=c.max_alternatives);
                for _ in 0..alternatives {
                    let k = rng.random_range(1..=c.max_reactants);
                    let mut rs = vec![pick(&mut rng, prev_pool).clone()];
                    for _ in 1..k {
                        let pool = if rng.random_bool(0.5) { &blocks } else { &earlier };
                        rs.push(pick(&mut rng, pool).clone());
                    }
                    list.push((rs, ReactionKind::Primary));
                }
            }
            let whole = c.distractor_rate.floor() as usize;
            let mut distractors = whole + usize::from(rng.random_bool(c.distractor_rate.fract()));
            if doomed {
                distractors = distractors.max(1);
            }
            for _ in 0..distractors {
                let k = rng.random_range(1..=c.max_reactants);
                let mut rs = vec![pick(&mut rng, &dead).clone()];
                for _ in 1..k {
                    rs.push(pick(&mut rng, &earlier).clone());
                }
                list.push((rs, ReactionKind::Distractor));
            }

            let mut seen = BTreeSet::new();
            let mut rxns: Vec<UniverseReaction> = Vec::new();
            for (mut rs, kind) in list {
                rs.sort();
                rs.dedup();
                let set = MoleculeSet::from_ids(rs);
                if seen.insert(set.clone()) {
                    rxns.push(UniverseReaction {
                        reactants: set,
                        probability: 0.5,
                        kind,
                    });
                }
            }
            rxns.shuffle(&mut rng);
            if !c.uniform_probabilities {
                let mut probs: Vec<f64> = (0..rxns.len()).map(|_| rng.random_range(0.02..1.0)).collect();
                probs.sort_by(|a, b| b.total_cmp(a));
                for (r, p) in rxns.iter_mut().zip(probs) {
                    r.probability = p;
                }
            }
            reactions.insert(id.clone(), rxns);
            layers[layer].push(id.clone());
            molecules.push(id);
        }

        let nonblocks = &molecules[c.num_blocks + num_dead..];
        let targets = match c.num_targets {
            Some(n) if n < nonblocks.len() => {
                let mut idx: Vec<usize> = (0..nonblocks.len()).collect();
                idx.shuffle(&mut rng);
                idx.truncate(n);
                idx.sort_unstable();
                idx.into_iter().map(|i| nonblocks[i].clone()).collect()
            }
            _ => nonblocks.to_vec(),
        };

        let mut u = Self {
            config,
            building_blocks: blocks.into_iter().collect(),
            dead_ends: dead.into_iter().collect(),
            molecules,
            reactions,
            targets,
            ground_truth: BTreeMap::new(),
        };
        u.ground_truth = u.compute_ground_truth()?;
        Ok(u)
    }

    /// Builds a universe from explicit reactions `(product, reactants, probability)`.
    /// All strings are normalized; the relation must be acyclic.
    pub fn from_reactions<'a>(
        blocks: impl IntoIterator<Item = &'a str>,
        reactions: &[(&str, &[&str], f64)],
        targets: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, GatewayError> {
        let n = Normalizer::default();
        let norm = |s: &str| {
            n.normalize(s)
                .map(|m| m.id)
                .map_err(|e| GatewayError::InvalidConfig(e.to_string()))
        };
        let building_blocks = blocks.into_iter().map(norm).collect::<Result<BTreeSet<_>, _>>()?;
        let mut table: BTreeMap<String, Vec<UniverseReaction>> = BTreeMap::new();
        let mut molecules: Vec<String> = building_blocks.iter().cloned().collect();
        let mut seen: BTreeSet<String> = building_blocks.clone();
        for (product, reactants, p) in reactions {
            let product = norm(product)?;
            let set = n
                .molecule_set(reactants.iter())
                .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
            for m in set.iter().chain(std::iter::once(product.as_str())) {
                if seen.insert(m.to_string()) {
                    molecules.push(m.to_string());
                }
            }
            table.entry(product).or_default().push(UniverseReaction {
                reactants: set,
                probability: *p,
                kind: ReactionKind::Primary,
            });
        }
        let targets = targets.into_iter().map(norm).collect::<Result<Vec<_>, _>>()?;
        let mut u = Self {
            config: UniverseConfig {
                num_blocks: building_blocks.len(),
                num_nonblocks: table.len(),
                ..UniverseConfig::default()
            },
            building_blocks,
            dead_ends: BTreeSet::new(),
            molecules,
            reactions: table,
            targets,
            ground_truth: BTreeMap::new(),
        };
        u.ground_truth = u.compute_ground_truth()?;
        Ok(u)
    }

    /// Dynamic programme over the acyclic backward relation.
    fn compute_ground_truth(&self) -> Result<BTreeMap<String, GroundTruth>, GatewayError> {
        // Post-order over the relation gives children before parents; a back
        // edge means the relation is cyclic.
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
        let mut order: Vec<&str> = Vec::new();
        for start in &self.molecules {
            if marks.contains_key(start.as_str()) {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
            marks.insert(start, Mark::Open);
            while let Some((m, i)) = stack.pop() {
                let children: Vec<&str> = self
                    .reactions
                    .get(m)
                    .map(|rs| rs.iter().flat_map(|r| r.reactants.iter()).collect())
                    .unwrap_or_default();
                if i < children.len() {
                    stack.push((m, i + 1));
                    let ch = children[i];
                    match marks.get(ch) {
                        Some(Mark::Open) => {
                            return Err(GatewayError::InvalidConfig(format!(
                                "reaction relation is cyclic at {ch}"
                            )))
                        }
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(ch, Mark::Open);
                            stack.push((ch, 0));
                        }
                    }
                } else {
                    marks.insert(m, Mark::Done);
                    order.push(m);
                }
            }
        }

        let mut best: BTreeMap<&str, (Option<u32>, u64)> = BTreeMap::new();
        for m in order {
            let entry = if self.building_blocks.contains(m) {
                (Some(0), 1)
            } else {
                let mut min: Option<u32> = None;
                let mut count: u64 = 0;
                for r in self.reactions.get(m).into_iter().flatten() {
                    let mut size = Some(1u32);
                    let mut ways: u64 = 1;
                    for c in r.reactants.iter() {
                        let (cm, cc) = best[c];
                        size = match (size, cm) {
                            (Some(a), Some(b)) => Some(a + b),
                            _ => None,
                        };
                        ways = ways.saturating_mul(cc);
                    }
                    if let Some(s) = size {
                        min = Some(min.map_or(s, |b| b.min(s)));
                    }
                    count = count.saturating_add(ways);
                }
                (min, count)
            };
            best.insert(m, entry);
        }

        Ok(self
            .molecules
            .iter()
            .filter(|m| !self.building_blocks.contains(*m))
            .map(|m| {
                let (min, count) = best[m.as_str()];
                (
                    m.clone(),
                    GroundTruth {
                        solvable: min.is_some(),
                        min_route_reactions: min,
                        route_count_bound: count,
                    },
                )
            })
            .collect())
    }

    /// Ground truth for any molecule; building blocks are solved with an
    /// empty route.
    pub fn truth(&self, id: &str) -> GroundTruth {
        if self.building_blocks.contains(id) {
            return GroundTruth {
                solvable: true,
                min_route_reactions: Some(0),
                route_count_bound: 1,
            };
        }
        self.ground_truth.get(id).cloned().unwrap_or(GroundTruth {
            solvable: false,
            min_route_reactions: None,
            route_count_bound: 0,
        })
    }

    pub fn generation_index(&self, id: &str) -> Option<usize> {
        self.molecules.iter().position(|m| m == id)
    }

    pub fn inventory(&self) -> Inventory {
        Inventory::from_ids(self.building_blocks.iter().cloned())
    }

    pub fn target_molecules(&self) -> Vec<Molecule> {
        self.targets.iter().map(Molecule::from_normalized).collect()
    }

    /// `(product, reactants)` of the top-ranked reaction of every non-block
    /// that has one.
    pub fn eval_samples(&self) -> Vec<(Molecule, MoleculeSet)> {
        self.reactions
            .iter()
            .filter_map(|(p, rs)| rs.first().map(|r| (Molecule::from_normalized(p), r.reactants.clone())))
            .collect()
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("universe serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// The backward relation in the file-model TSV format, ranked as the
    /// universe model ranks it.
    pub fn to_model_tsv(&self) -> String {
        let mut out = String::new();
        for (p, rs) in &self.reactions {
            for r in rs {
                out.push_str(&format!("{p}\t{}\t{}\n", r.reactants, r.probability));
            }
        }
        out
    }
}

/// Backward model answering from a universe's reaction table.
#[derive(Debug, Clone)]
pub struct UniverseModel {
    universe: Arc<SyntheticUniverse>,
    primary_only: bool,
    name: String,
}

impl UniverseModel {
    pub fn new(universe: Arc<SyntheticUniverse>) -> Self {
        Self {
            name: format!("universe-{}", universe.config.seed),
            universe,
            primary_only: false,
        }
    }

    /// Hides distractor reactions.
    pub fn primary_only(universe: Arc<SyntheticUniverse>) -> Self {
        Self {
            name: format!("universe-{}-primary", universe.config.seed),
            universe,
            primary_only: true,
        }
    }

    pub fn universe(&self) -> &SyntheticUniverse {
        &self.universe
    }
}

impl BackwardModel for UniverseModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn query(&self, product: &Molecule, num_results: usize) -> Result<Vec<RawPrediction>, GatewayError> {
        Ok(self
            .universe
            .reactions
            .get(&product.id)
            .into_iter()
            .flatten()
            .filter(|r| !self.primary_only || r.kind == ReactionKind::Primary)
            .take(num_results)
            .map(|r| RawPrediction::new(r.reactants.iter(), r.probability))
            .collect())
    }
}

/// Accepts exactly the reactions present in the universe.
#[derive(Debug, Clone)]
pub struct UniverseOracle {
    universe: Arc<SyntheticUniverse>,
}

impl UniverseOracle {
    pub fn new(universe: Arc<SyntheticUniverse>) -> Self {
        Self { universe }
    }
}

impl ForwardOracle for UniverseOracle {
    fn feasible(&self, reactants: &MoleculeSet, product: &Molecule) -> bool {
        self.universe
            .reactions
            .get(&product.id)
            .is_some_and(|rs| rs.iter().any(|r| &r.reactants == reactants))
    }
}
