//! Reaction dataset cleaning and product-grouped splitting.
//!
//! Rules run in a fixed order and each removed reaction is charged to the
//! first rule it fails. Per-reaction rules run in parallel with an ordered
//! merge, so output is independent of the thread count.

mod rules;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::molkit::{MolkitError, Normalizer};

pub use rules::{
    check_reactant_count, count_products, filter_structural, refine_mappings, resolve_main_product, PrepConfig,
    PreparedReaction, RawReaction, Rule,
};
pub use split::{fold_targets, split_folds, Fold};

#[derive(Debug, thiserror::Error)]
pub enum DataprepError {
    #[error("invalid fold ratio {0:?}")]
    InvalidRatio([f64; 3]),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {source}")]
    Molecule {
        line: usize,
        #[source]
        source: MolkitError,
    },
}

/// Optional last-stage filter, e.g. a template-extraction check backed by
/// an external chemistry toolkit.
pub trait ExternalFilter: Sync {
    fn name(&self) -> &str;
    fn keep(&self, reaction: &PreparedReaction) -> bool;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepReport {
    pub input_count: usize,
    /// Every rule appears, with zero if it removed nothing.
    pub removed: BTreeMap<String, usize>,
    pub survivors: usize,
    pub fold_sizes: FoldSizes,
    /// Distinct products per fold.
    pub fold_groups: FoldSizes,
}

impl PrepReport {
    pub fn removed_total(&self) -> usize {
        self.removed.values().sum()
    }
}

#[derive(Debug, Clone)]
pub struct PrepOutput {
    pub report: PrepReport,
    pub survivors: Vec<PreparedReaction>,
    /// Fold of each survivor, index-aligned.
    pub folds: Vec<Fold>,
}

fn mol_err(line: usize) -> impl Fn(MolkitError) -> DataprepError {
    move |source| DataprepError::Molecule { line, source }
}

/// Runs every rule over `text` (one reaction SMILES per line; blank lines
/// and `#` comments are skipped), then splits the survivors.
pub fn run_pipeline(
    text: &str,
    config: &PrepConfig,
    normalizer: &Normalizer,
    pinned: &BTreeMap<String, Fold>,
    external: Option<&dyn ExternalFilter>,
) -> Result<PrepOutput, DataprepError> {
    fold_targets(0, config.ratio)?;
    let mut removed: BTreeMap<String, usize> = Rule::ALL.iter().map(|r| (r.name().to_string(), 0)).collect();
    if let Some(f) = external {
        removed.insert(f.name().to_string(), 0);
    }
    let mut charge = |name: &str| *removed.get_mut(name).expect("registered rule") += 1;

    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let input_count = lines.len();

    // Parse and key in parallel; dedupe in input order.
    let parsed: Vec<Option<(RawReaction, String)>> = lines
        .par_iter()
        .map(|&(no, l)| {
            let raw = RawReaction::parse(l, no).ok()?;
            let key = raw.dedupe_key(normalizer).ok()?;
            Some((raw, key))
        })
        .collect();
    let mut seen = HashSet::new();
    let mut stage = Vec::new();
    for p in parsed {
        match p {
            None => charge(Rule::Malformed.name()),
            Some((raw, key)) => {
                if !seen.insert(key) {
                    charge(Rule::Duplicate.name());
                } else if let Err(rule) = check_reactant_count(&raw, config) {
                    charge(rule.name());
                } else {
                    stage.push(raw);
                }
            }
        }
    }

    let counts = count_products(&stage, normalizer).map_err(mol_err(0))?;
    let outcomes: Vec<Result<Result<PreparedReaction, Rule>, DataprepError>> = stage
        .par_iter()
        .map(|raw| {
            let err = mol_err(raw.line_no);
            let r = match resolve_main_product(raw, &counts, config, normalizer).map_err(&err)? {
                Ok(r) => r,
                Err(rule) => return Ok(Err(rule)),
            };
            if let Err(rule) = filter_structural(&r, config, normalizer).map_err(&err)? {
                return Ok(Err(rule));
            }
            refine_mappings(&r).map_err(&err)
        })
        .collect();

    let mut seen = HashSet::new();
    let mut refined = Vec::new();
    for o in outcomes {
        match o? {
            Err(rule) => charge(rule.name()),
            Ok(r) => {
                let key = r.dedupe_key(normalizer).map_err(mol_err(r.line_no))?;
                if seen.insert(key) {
                    refined.push(r);
                } else {
                    charge(Rule::RefinedDuplicate.name());
                }
            }
        }
    }

    let survivors: Vec<PreparedReaction> = match external {
        None => refined,
        Some(f) => {
            let keep: Vec<bool> = refined.par_iter().map(|r| f.keep(r)).collect();
            let mut out = Vec::with_capacity(refined.len());
            for (r, k) in refined.into_iter().zip(keep) {
                if k {
                    out.push(r);
                } else {
                    charge(f.name());
                }
            }
            out
        }
    };

    let products: Vec<&str> = survivors.iter().map(|r| r.product_id.as_str()).collect();
    let folds = split_folds(&products, config.ratio, config.seed, pinned)?;
    let mut fold_sizes = FoldSizes::default();
    let mut groups: [HashSet<&str>; 3] = Default::default();
    for (f, p) in folds.iter().zip(&products) {
        match f {
            Fold::Train => fold_sizes.train += 1,
            Fold::Valid => fold_sizes.valid += 1,
            Fold::Test => fold_sizes.test += 1,
        }
        groups[*f as usize].insert(p);
    }
    let fold_groups = FoldSizes {
        train: groups[0].len(),
        valid: groups[1].len(),
        test: groups[2].len(),
    };

    Ok(PrepOutput {
        report: PrepReport {
            input_count,
            removed,
            survivors: survivors.len(),
            fold_sizes,
            fold_groups,
        },
        survivors,
        folds,
    })
}

pub fn read_pinned_tsv(text: &str, normalizer: &Normalizer) -> Result<BTreeMap<String, Fold>, DataprepError> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || DataprepError::Molecule {
            line: i + 1,
            source: MolkitError::MalformedReaction {
                reaction: line.to_string(),
                reason: "expected `product<TAB>train|valid|test`".into(),
            },
        };
        let (p, f) = line.split_once('\t').ok_or_else(bad)?;
        let fold = match f.trim() {
            "train" => Fold::Train,
            "valid" => Fold::Valid,
            "test" => Fold::Test,
            _ => return Err(bad()),
        };
        out.insert(normalizer.normalize(p.trim()).map_err(mol_err(i + 1))?.id, fold);
    }
    Ok(out)
}

/// Writes `{train,valid,test}.tsv` (`product<TAB>reactants`, normalized),
/// `survivors.smi` (refined mapped reactions) and `prep_report.json`.
/// `header` lines are written as `#` comments at the top of each text file.
pub fn write_outputs(out: &PrepOutput, dir: &Path, normalizer: &Normalizer, header: &[String]) -> Result<(), DataprepError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DataprepError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write_file = |name: &str, body: &str| -> Result<(), DataprepError> {
        let path = dir.join(name);
        let mut f = io::BufWriter::new(fs::File::create(&path).map_err(io_err(&path))?);
        for h in header {
            writeln!(f, "# {h}").map_err(io_err(&path))?;
        }
        f.write_all(body.as_bytes()).map_err(io_err(&path))?;
        f.flush().map_err(io_err(&path))
    };

    for fold in Fold::ALL {
        let mut body = String::new();
        for (r, f) in out.survivors.iter().zip(&out.folds) {
            if *f == fold {
                let set = r.reactant_set(normalizer).map_err(mol_err(r.line_no))?;
                body.push_str(&format!("{}\t{}\n", r.product_id, set));
            }
        }
        write_file(&format!("{}.tsv", fold.name()), &body)?;
    }
    let smi: String = out.survivors.iter().map(|r| r.reaction_smiles() + "\n").collect();
    write_file("survivors.smi", &smi)?;

    let path = dir.join("prep_report.json");
    let json = serde_json::json!({ "provenance": header, "report": out.report });
    fs::write(&path, serde_json::to_string_pretty(&json).expect("serializable") + "\n").map_err(io_err(&path))
}
