//! Purchasable building blocks.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rustc_hash::FxHashSet;
use sha2::{Digest, Sha256};

use crate::molkit::{Molecule, Normalizer};

#[derive(Debug, thiserror::Error)]
pub enum InventoryError {
    #[error("reading inventory {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// An immutable set of normalized molecule ids.
#[derive(Debug, Clone, Default)]
pub struct Inventory {
    members: FxHashSet<String>,
    digest: String,
    skipped: usize,
}

impl Inventory {
    /// Loads one SMILES per line (gzip detected by magic bytes). Blank lines
    /// and lines starting with `#` are ignored; malformed lines are skipped
    /// and logged.
    pub fn load(path: impl AsRef<Path>, normalizer: &Normalizer) -> Result<Self, InventoryError> {
        let path = path.as_ref();
        let io_err = |source| InventoryError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = File::open(path).map_err(io_err)?;
        let mut magic = [0u8; 2];
        let n = file.read(&mut magic).map_err(io_err)?;
        let file = File::open(path).map_err(io_err)?;
        let reader: Box<dyn BufRead> = if n == 2 && magic == [0x1f, 0x8b] {
            Box::new(BufReader::new(MultiGzDecoder::new(file)))
        } else {
            Box::new(BufReader::new(file))
        };

        let mut members = FxHashSet::default();
        let mut skipped = 0;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err)?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match normalizer.normalize(line) {
                Ok(m) => {
                    members.insert(m.id);
                }
                Err(e) => {
                    log::warn!("{}:{}: skipping malformed line: {e}", path.display(), i + 1);
                    skipped += 1;
                }
            }
        }
        let mut inv = Self::from_ids(members);
        inv.skipped = skipped;
        Ok(inv)
    }

    /// Builds an inventory from raw SMILES, silently dropping invalid ones.
    pub fn from_smiles<S: AsRef<str>>(smiles: impl IntoIterator<Item = S>, normalizer: &Normalizer) -> Self {
        Self::from_ids(
            smiles
                .into_iter()
                .filter_map(|s| normalizer.normalize(s.as_ref()).ok())
                .map(|m| m.id),
        )
    }

    /// Builds an inventory from ids that are already normalized.
    pub fn from_ids<S: Into<String>>(ids: impl IntoIterator<Item = S>) -> Self {
        let members: FxHashSet<String> = ids.into_iter().map(Into::into).collect();
        let digest = digest_of(&members);
        Self {
            members,
            digest,
            skipped: 0,
        }
    }

    pub fn contains(&self, molecule: &Molecule) -> bool {
        self.members.contains(molecule.id.as_str())
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.members.contains(id)
    }

    /// Normalizes `smiles` before the lookup; invalid input is never a member.
    pub fn contains_smiles(&self, smiles: &str, normalizer: &Normalizer) -> bool {
        normalizer
            .normalize(smiles)
            .map(|m| self.contains(&m))
            .unwrap_or(false)
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Lines rejected by the last [`Inventory::load`].
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// SHA-256 over the sorted normalized members.
    pub fn source_digest(&self) -> &str {
        &self.digest
    }

    pub fn sorted_members(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.members.iter().map(String::as_str).collect();
        v.sort_unstable();
        v
    }

    /// Writes the normalized members, sorted, one per line.
    pub fn dump(&self, mut out: impl Write) -> io::Result<()> {
        for m in self.sorted_members() {
            writeln!(out, "{m}")?;
        }
        Ok(())
    }
}

fn digest_of(members: &FxHashSet<String>) -> String {
    let mut sorted: Vec<&String> = members.iter().collect();
    sorted.sort_unstable();
    let mut h = Sha256::new();
    for m in sorted {
        h.update(m.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
