//! Individual cleaning rules, applied in order by the pipeline.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::molkit::{count_atoms, diagnose, strip_atom_maps_where, tokenize, MolkitError, MoleculeSet, Normalizer, ReactionSmiles};

/// Removal reasons, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Malformed,
    Duplicate,
    ReactantCount,
    MainProduct,
    ProductSize,
    Ratio,
    ProductInReactants,
    DoubleMapped,
    Unmapped,
    NoContributingReactants,
    RefinedDuplicate,
}

impl Rule {
    pub const ALL: [Rule; 11] = [
        Rule::Malformed,
        Rule::Duplicate,
        Rule::ReactantCount,
        Rule::MainProduct,
        Rule::ProductSize,
        Rule::Ratio,
        Rule::ProductInReactants,
        Rule::DoubleMapped,
        Rule::Unmapped,
        Rule::NoContributingReactants,
        Rule::RefinedDuplicate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Malformed => "malformed",
            Rule::Duplicate => "duplicate",
            Rule::ReactantCount => "reactant_count",
            Rule::MainProduct => "main_product",
            Rule::ProductSize => "product_size",
            Rule::Ratio => "ratio",
            Rule::ProductInReactants => "product_in_reactants",
            Rule::DoubleMapped => "double_mapped",
            Rule::Unmapped => "unmapped",
            Rule::NoContributingReactants => "no_contributing_reactants",
            Rule::RefinedDuplicate => "refined_duplicate",
        }
    }
}

/// Thresholds; defaults are the production constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepConfig {
    pub max_reactants: usize,
    pub min_product_atoms: usize,
    pub max_occurrence: usize,
    pub max_product_atoms: usize,
    pub max_atom_ratio: f64,
    /// Train/valid/test weights.
    pub ratio: [f64; 3],
    pub seed: u64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self {
            max_reactants: 4,
            min_product_atoms: 5,
            max_occurrence: 1000,
            max_product_atoms: 100,
            max_atom_ratio: 20.0,
            ratio: [90.0, 5.0, 5.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawReaction {
    pub reactants: Vec<String>,
    pub agents: Vec<String>,
    pub products: Vec<String>,
    /// 1-based line in the input.
    pub line_no: usize,
}

impl RawReaction {
    /// Parses the first whitespace-separated field of `line`. Every
    /// component must tokenize and the product list must be non-empty.
    pub fn parse(line: &str, line_no: usize) -> Result<Self, MolkitError> {
        let field = line.split_whitespace().next().unwrap_or("");
        let rxn = ReactionSmiles::parse(field)?;
        if rxn.products.is_empty() {
            return Err(MolkitError::MalformedReaction {
                reaction: field.to_string(),
                reason: "empty product list".into(),
            });
        }
        for c in rxn.reactants.iter().chain(&rxn.agents).chain(&rxn.products) {
            tokenize(c)?;
        }
        Ok(Self {
            reactants: rxn.reactants,
            agents: rxn.agents,
            products: rxn.products,
            line_no,
        })
    }

    /// Normalized `reactants>agents>products`, insensitive to maps and
    /// component order.
    pub fn dedupe_key(&self, normalizer: &Normalizer) -> Result<String, MolkitError> {
        reaction_key(normalizer, &self.reactants, &self.agents, &self.products)
    }
}

fn reaction_key(n: &Normalizer, r: &[String], a: &[String], p: &[String]) -> Result<String, MolkitError> {
    Ok(format!("{}>{}>{}", n.molecule_set(r)?, n.molecule_set(a)?, n.molecule_set(p)?))
}

/// A reaction with a single resolved main product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreparedReaction {
    pub line_no: usize,
    /// Mapped reactant components as they appear in the input (after any
    /// refinement).
    pub reactants: Vec<String>,
    pub agents: Vec<String>,
    pub product: String,
    /// Normalized main product.
    pub product_id: String,
}

impl PreparedReaction {
    pub fn reaction_smiles(&self) -> String {
        format!("{}>{}>{}", self.reactants.join("."), self.agents.join("."), self.product)
    }

    pub fn reactant_set(&self, normalizer: &Normalizer) -> Result<MoleculeSet, MolkitError> {
        normalizer.molecule_set(&self.reactants)
    }

    pub fn dedupe_key(&self, normalizer: &Normalizer) -> Result<String, MolkitError> {
        reaction_key(normalizer, &self.reactants, &self.agents, std::slice::from_ref(&self.product))
    }
}

pub fn check_reactant_count(r: &RawReaction, cfg: &PrepConfig) -> Result<(), Rule> {
    if r.reactants.len() > cfg.max_reactants {
        Err(Rule::ReactantCount)
    } else {
        Ok(())
    }
}

/// Product occurrence counts, each product of a multi-product reaction
/// counted separately.
pub fn count_products<'a>(
    reactions: impl IntoIterator<Item = &'a RawReaction>,
    normalizer: &Normalizer,
) -> Result<HashMap<String, usize>, MolkitError> {
    let mut counts = HashMap::new();
    for r in reactions {
        for p in &r.products {
            *counts.entry(normalizer.normalize(p)?.id).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

/// Drops side products (too small or too common); the reaction survives
/// only if exactly one product remains.
pub fn resolve_main_product(
    r: &RawReaction,
    counts: &HashMap<String, usize>,
    cfg: &PrepConfig,
    normalizer: &Normalizer,
) -> Result<Result<PreparedReaction, Rule>, MolkitError> {
    let mut main = Vec::new();
    for p in &r.products {
        let id = normalizer.normalize(p)?.id;
        let occ = counts.get(&id).copied().unwrap_or(0);
        if count_atoms(p)? >= cfg.min_product_atoms && occ < cfg.max_occurrence {
            main.push((p, id));
        }
    }
    if main.len() != 1 {
        return Ok(Err(Rule::MainProduct));
    }
    let (p, id) = main.pop().expect("one main product");
    Ok(Ok(PreparedReaction {
        line_no: r.line_no,
        reactants: r.reactants.clone(),
        agents: r.agents.clone(),
        product: p.clone(),
        product_id: id,
    }))
}

/// Product size, reactant/product atom ratio and product-among-reactants.
pub fn filter_structural(r: &PreparedReaction, cfg: &PrepConfig, normalizer: &Normalizer) -> Result<Result<(), Rule>, MolkitError> {
    let product_atoms = count_atoms(&r.product)?;
    if product_atoms > cfg.max_product_atoms {
        return Ok(Err(Rule::ProductSize));
    }
    let mut reactant_atoms = 0;
    for c in &r.reactants {
        reactant_atoms += count_atoms(c)?;
    }
    if reactant_atoms as f64 > cfg.max_atom_ratio * product_atoms as f64 {
        return Ok(Err(Rule::Ratio));
    }
    for c in &r.reactants {
        if normalizer.normalize(c)?.id == r.product_id {
            return Ok(Err(Rule::ProductInReactants));
        }
    }
    Ok(Ok(()))
}

/// Strips one-sided maps, rejects double-mapped or unmapped reactions and
/// drops reactants that share no map with the product.
pub fn refine_mappings(r: &PreparedReaction) -> Result<Result<PreparedReaction, Rule>, MolkitError> {
    let rxn = ReactionSmiles {
        reactants: r.reactants.clone(),
        agents: Vec::new(),
        products: vec![r.product.clone()],
    };
    let d = diagnose(&rxn)?;
    let one_side: BTreeSet<u32> = d.one_side_only_maps;
    let strip = |s: &String| strip_atom_maps_where(s, |n| one_side.contains(&n));
    let reactants = r.reactants.iter().map(strip).collect::<Result<Vec<_>, _>>()?;
    let product = strip(&r.product)?;

    let rxn = ReactionSmiles {
        reactants,
        agents: Vec::new(),
        products: vec![product],
    };
    let d = diagnose(&rxn)?;
    if d.double_mapped {
        return Ok(Err(Rule::DoubleMapped));
    }
    if d.unmapped {
        return Ok(Err(Rule::Unmapped));
    }
    let reactants: Vec<String> = rxn
        .reactants
        .into_iter()
        .zip(d.contributing_reactants)
        .filter_map(|(c, keep)| keep.then_some(c))
        .collect();
    if reactants.is_empty() {
        return Ok(Err(Rule::NoContributingReactants));
    }
    let [product] = <[String; 1]>::try_from(rxn.products).expect("single product");
    Ok(Ok(PreparedReaction {
        reactants,
        product,
        ..r.clone()
    }))
}
