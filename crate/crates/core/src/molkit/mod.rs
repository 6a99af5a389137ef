//! SMILES tokenization, atom-map handling and syntactic normalization.
//!
//! Every comparison between molecules elsewhere in the crate goes through
//! [`Normalizer`]: maps are stripped first, then each dot-component is
//! canonicalized, then components are sorted.

mod normalize;
mod reaction;
mod tokenize;

pub use normalize::{
    atom_maps, count_atoms, is_valid, normalize, strip_atom_maps, strip_atom_maps_where,
    Canonicalizer, Molecule, MoleculeSet, Normalizer, Syntactic,
};
pub use reaction::{diagnose, map_diagnostics, MapDiagnostics, ReactionSmiles};
pub use tokenize::{detokenize, tokenize, BracketAtom, SmilesToken, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MolkitError {
    #[error("malformed SMILES {smiles:?} at byte {position}: {reason}")]
    MalformedSmiles {
        smiles: String,
        position: usize,
        reason: String,
    },
    #[error("malformed reaction {reaction:?}: {reason}")]
    MalformedReaction { reaction: String, reason: String },
}
