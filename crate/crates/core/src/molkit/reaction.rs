use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{atom_maps, MolkitError};

/// A reaction SMILES split into its three `>`-separated fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionSmiles {
    pub reactants: Vec<String>,
    pub agents: Vec<String>,
    pub products: Vec<String>,
}

fn components(field: &str) -> Vec<String> {
    if field.is_empty() {
        Vec::new()
    } else {
        field.split('.').map(str::to_string).collect()
    }
}

impl ReactionSmiles {
    /// Parses `reactants>agents>products` (agents may be empty, as in
    /// `A.B>>P`). Components are not validated here.
    pub fn parse(s: &str) -> Result<Self, MolkitError> {
        let fields: Vec<&str> = s.trim().split('>').collect();
        if fields.len() != 3 {
            return Err(MolkitError::MalformedReaction {
                reaction: s.to_string(),
                reason: format!("expected 3 '>'-separated fields, found {}", fields.len()),
            });
        }
        Ok(Self {
            reactants: components(fields[0]),
            agents: components(fields[1]),
            products: components(fields[2]),
        })
    }
}

impl fmt::Display for ReactionSmiles {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}>{}>{}",
            self.reactants.join("."),
            self.agents.join("."),
            self.products.join(".")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MapDiagnostics {
    /// Map numbers occurring on exactly one side of the reaction.
    pub one_side_only_maps: BTreeSet<u32>,
    /// Some map number occurs more than once within one side.
    pub double_mapped: bool,
    /// The reactant side or the product side carries no maps at all.
    pub unmapped: bool,
    /// Per reactant: shares at least one map number with the products.
    pub contributing_reactants: Vec<bool>,
}

fn side_maps(side: &[String]) -> Result<(Vec<Vec<u32>>, BTreeMap<u32, usize>), MolkitError> {
    let per: Vec<Vec<u32>> = side.iter().map(|s| atom_maps(s)).collect::<Result<_, _>>()?;
    let mut counts = BTreeMap::new();
    for n in per.iter().flatten() {
        *counts.entry(*n).or_insert(0) += 1;
    }
    Ok((per, counts))
}

/// Atom-map bookkeeping for a reaction. Agents are not part of either side.
pub fn map_diagnostics(reaction_smiles: &str) -> Result<MapDiagnostics, MolkitError> {
    diagnose(&ReactionSmiles::parse(reaction_smiles)?)
}

pub fn diagnose(rxn: &ReactionSmiles) -> Result<MapDiagnostics, MolkitError> {
    let (per_reactant, left) = side_maps(&rxn.reactants)?;
    let (_, right) = side_maps(&rxn.products)?;

    let one_side_only_maps = left
        .keys()
        .filter(|n| !right.contains_key(n))
        .chain(right.keys().filter(|n| !left.contains_key(n)))
        .copied()
        .collect();
    let double_mapped = left.values().chain(right.values()).any(|&c| c > 1);
    let unmapped = left.is_empty() || right.is_empty();
    let contributing_reactants = per_reactant
        .iter()
        .map(|maps| maps.iter().any(|n| right.contains_key(n)))
        .collect();

    Ok(MapDiagnostics {
        one_side_only_maps,
        double_mapped,
        unmapped,
        contributing_reactants,
    })
}
