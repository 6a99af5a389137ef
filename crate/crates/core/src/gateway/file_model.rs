use std::fmt::Write as _;
use std::path::Path;

use rustc_hash::{FxHashMap, FxHashSet};

use super::{BackwardModel, ForwardOracle, GatewayError, RawPrediction};
use crate::molkit::{Molecule, MoleculeSet, Normalizer};

/// A lookup-table model read from TSV:
/// `product<TAB>reactants(dot-joined)<TAB>probability`, rank = file order.
///
/// Products are normalized on load; reactant strings are returned verbatim
/// so that post-processing sees exactly what the file says.
#[derive(Debug, Clone, Default)]
pub struct FileModel {
    name: String,
    table: FxHashMap<String, Vec<RawPrediction>>,
}

impl FileModel {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| GatewayError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "file".into());
        Self::parse(&name, &path.display().to_string(), &text)
    }

    pub fn from_tsv_str(name: &str, text: &str) -> Result<Self, GatewayError> {
        Self::parse(name, name, text)
    }

    fn parse(name: &str, origin: &str, text: &str) -> Result<Self, GatewayError> {
        let normalizer = Normalizer::default();
        let mut table: FxHashMap<String, Vec<RawPrediction>> = FxHashMap::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| GatewayError::Parse {
                path: origin.to_string(),
                line: i + 1,
                reason,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            let [product, reactants, prob] = cols[..] else {
                return Err(err(format!("expected 3 tab-separated columns, found {}", cols.len())));
            };
            let product = normalizer
                .normalize(product.trim())
                .map_err(|e| err(e.to_string()))?;
            let probability: f64 = prob
                .trim()
                .parse()
                .map_err(|_| err(format!("bad probability {prob:?}")))?;
            table
                .entry(product.id)
                .or_default()
                .push(RawPrediction::new([reactants.trim()], probability));
        }
        Ok(Self {
            name: name.to_string(),
            table,
        })
    }

    pub fn num_products(&self) -> usize {
        self.table.len()
    }

    pub fn entries(&self, product: &str) -> &[RawPrediction] {
        self.table.get(product).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Serializes back to the TSV format, products sorted.
    pub fn to_tsv(&self) -> String {
        let mut keys: Vec<&String> = self.table.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            for r in &self.table[k] {
                let _ = writeln!(out, "{k}\t{}\t{}", r.reactants.join("."), r.probability);
            }
        }
        out
    }
}

impl BackwardModel for FileModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn query(&self, product: &Molecule, num_results: usize) -> Result<Vec<RawPrediction>, GatewayError> {
        Ok(self
            .entries(&product.id)
            .iter()
            .take(num_results)
            .cloned()
            .collect())
    }
}

/// Forward oracle that accepts exactly the reactions listed in a table.
#[derive(Debug, Clone, Default)]
pub struct TableOracle {
    known: FxHashSet<(String, MoleculeSet)>,
}

impl TableOracle {
    pub fn from_model(model: &FileModel) -> Self {
        let n = Normalizer::default();
        let known = model
            .table
            .iter()
            .flat_map(|(p, rs)| {
                let n = &n;
                rs.iter().filter_map(move |r| {
                    n.molecule_set(&r.reactants).ok().map(|s| (p.clone(), s))
                })
            })
            .collect();
        Self { known }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        Ok(Self::from_model(&FileModel::load(path)?))
    }
}

impl ForwardOracle for TableOracle {
    fn feasible(&self, reactants: &MoleculeSet, product: &Molecule) -> bool {
        self.known.contains(&(product.id.clone(), reactants.clone()))
    }
}
