use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{tokenize, MolkitError};

/// Removes every `:N` atom-map annotation. Bracket atoms keep their
/// brackets even when they become redundant (`[CH3:1]` -> `[CH3]`).
pub fn strip_atom_maps(smiles: &str) -> Result<String, MolkitError> {
    strip_atom_maps_where(smiles, |_| true)
}

/// Removes the map annotations for which `remove` returns true.
pub fn strip_atom_maps_where(
    smiles: &str,
    mut remove: impl FnMut(u32) -> bool,
) -> Result<String, MolkitError> {
    let tokens = tokenize(smiles)?;
    let mut out = String::with_capacity(smiles.len());
    for tok in &tokens {
        match tok.map_number {
            Some(n) if remove(n) => out.push_str(&tok.text_without_map()),
            _ => out.push_str(tok.text),
        }
    }
    Ok(out)
}

/// Number of atoms (bracket and organic-subset). Implicit or bracket
/// hydrogens are not atoms.
pub fn count_atoms(smiles: &str) -> Result<usize, MolkitError> {
    Ok(tokenize(smiles)?.iter().filter(|t| t.is_atom()).count())
}

/// Map numbers present in a SMILES string, in order of appearance.
pub fn atom_maps(smiles: &str) -> Result<Vec<u32>, MolkitError> {
    Ok(tokenize(smiles)?
        .iter()
        .filter_map(|t| t.map_number)
        .collect())
}

pub fn is_valid(smiles: &str) -> bool {
    tokenize(smiles).is_ok()
}

/// Component-level canonicalization hook.
///
/// Receives a single dot-free component with maps already stripped and must
/// return a tokenizable, idempotent canonical form.
pub trait Canonicalizer: Send + Sync {
    fn canonicalize(&self, component: &str) -> Result<String, MolkitError>;
}

/// Identity canonicalizer: two molecules are equal iff their map-free
/// component strings are equal.
#[derive(Debug, Default, Clone, Copy)]
pub struct Syntactic;

impl Canonicalizer for Syntactic {
    fn canonicalize(&self, component: &str) -> Result<String, MolkitError> {
        Ok(component.to_string())
    }
}

/// Turns raw SMILES into [`Molecule`]s: strip maps, canonicalize each
/// component, sort components, rejoin with `.`.
#[derive(Clone)]
pub struct Normalizer {
    canon: Arc<dyn Canonicalizer>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            canon: Arc::new(Syntactic),
        }
    }
}

impl fmt::Debug for Normalizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Normalizer")
    }
}

impl Normalizer {
    pub fn with_canonicalizer(canon: Arc<dyn Canonicalizer>) -> Self {
        Self { canon }
    }

    /// Normalized components of `smiles`, sorted.
    pub fn components(&self, smiles: &str) -> Result<Vec<String>, MolkitError> {
        let stripped = strip_atom_maps(smiles)?;
        let mut parts = stripped
            .split('.')
            .map(|c| self.canon.canonicalize(c))
            .collect::<Result<Vec<_>, _>>()?;
        parts.sort_unstable();
        Ok(parts)
    }

    pub fn normalize(&self, smiles: &str) -> Result<Molecule, MolkitError> {
        let id = self.components(smiles)?.join(".");
        Ok(Molecule {
            id,
            raw: smiles.to_string(),
        })
    }

    /// Builds a reactant multiset from any number of (possibly dot-joined)
    /// SMILES strings.
    pub fn molecule_set<S: AsRef<str>>(
        &self,
        parts: impl IntoIterator<Item = S>,
    ) -> Result<MoleculeSet, MolkitError> {
        let mut members = Vec::new();
        for p in parts {
            members.extend(self.components(p.as_ref())?);
        }
        members.sort_unstable();
        Ok(MoleculeSet { members })
    }
}

/// Normalizes with the default syntactic canonicalizer.
pub fn normalize(smiles: &str) -> Result<Molecule, MolkitError> {
    Normalizer::default().normalize(smiles)
}

/// A molecule identified by its normalized SMILES.
///
/// Equality, ordering and hashing use `id` only; `raw` is kept for
/// provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Molecule {
    pub id: String,
    pub raw: String,
}

impl Molecule {
    /// Wraps a string that is already a normalized id.
    pub fn from_normalized(id: impl Into<String>) -> Self {
        let id = id.into();
        Self {
            raw: id.clone(),
            id,
        }
    }

    /// Bypasses normalization entirely; `id` is taken verbatim and may carry
    /// atom maps. Exists so tests can demonstrate what leaks when inputs are
    /// not stripped.
    #[doc(hidden)]
    pub fn unnormalized(raw: impl Into<String>) -> Self {
        Self::from_normalized(raw)
    }

    pub fn as_str(&self) -> &str {
        &self.id
    }
}

impl PartialEq for Molecule {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Molecule {}

impl Hash for Molecule {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl PartialOrd for Molecule {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Molecule {
    fn cmp(&self, other: &Self) -> Ordering {
        self.id.cmp(&other.id)
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Sorted multiset of single-component molecule ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MoleculeSet {
    members: Vec<String>,
}

impl MoleculeSet {
    /// Builds a set from ids that are already normalized single components.
    pub fn from_ids<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        let mut members: Vec<String> = ids.into_iter().map(Into::into).collect();
        members.sort_unstable();
        Self { members }
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(String::as_str)
    }
}

impl fmt::Display for MoleculeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.members.join("."))
    }
}
