//! Run configuration files (TOML). Relative paths resolve against the
//! directory of the config file.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use synthsearch::dataprep::PrepConfig;
use synthsearch::eval::{EvalSample, DEFAULT_KS};
use synthsearch::gateway::{
    BackwardModel, FileModel, ForwardOracle, SyntheticUniverse, TableOracle, UniverseConfig, UniverseModel,
    UniverseOracle, WireClient, WireModel,
};
use synthsearch::gateway::wire::DEFAULT_TIMEOUT;
use synthsearch::search::{AlgorithmConfig, ParamGrid, SearchBudget};
use synthsearch::{Inventory, Molecule, Normalizer};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// TSV lookup table `product<TAB>reactants<TAB>probability`.
    File { path: PathBuf },
    /// Out-of-process model: spawn `command` and talk over stdio, or
    /// connect to `address` over TCP.
    Wire {
        #[serde(default)]
        command: Vec<String>,
        address: Option<String>,
        timeout_s: Option<f64>,
        name: Option<String>,
    },
    /// Universe JSON written by `gen-universe`.
    Universe {
        path: PathBuf,
        #[serde(default)]
        primary_only: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    /// Accepts exactly the reactions in a model-format TSV.
    Table { path: PathBuf },
    /// Accepts every reaction of a universe.
    Universe { path: PathBuf },
}

fn default_eval_results() -> usize {
    synthsearch::eval::DEFAULT_NUM_RESULTS
}
fn default_ks() -> Vec<usize> {
    DEFAULT_KS.to_vec()
}
fn default_search_results() -> usize {
    synthsearch::search::DEFAULT_NUM_RESULTS
}
fn default_max_routes() -> usize {
    100
}
fn default_checkpoints() -> usize {
    20
}
fn default_percentiles() -> Vec<f64> {
    vec![5.0, 25.0, 50.0, 75.0, 95.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub model: ModelSpec,
    /// `product<TAB>reactants` samples; a universe model supplies its own
    /// when unset.
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_eval_results")]
    pub num_results: usize,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    pub oracle: Option<OracleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub model: ModelSpec,
    /// Defaults to the universe's building blocks for universe models.
    pub inventory: Option<PathBuf>,
    /// One SMILES per line; defaults to the universe's targets.
    pub targets: Option<PathBuf>,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub budget: SearchBudget,
    #[serde(default = "default_search_results")]
    pub num_results: usize,
    #[serde(default = "default_max_routes")]
    pub max_routes: usize,
    /// Evenly spaced call-count checkpoints in `metrics.csv`.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    /// Best routes per solved target written as DOT files.
    #[serde(default)]
    pub dot_routes: usize,
    /// Write the final AND/OR graph of each target as JSON.
    #[serde(default)]
    pub write_graphs: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub model: ModelSpec,
    pub inventory: Option<PathBuf>,
    pub targets: Option<PathBuf>,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub budget: SearchBudget,
    #[serde(default = "default_search_results")]
    pub num_results: usize,
    #[serde(default = "default_max_routes")]
    pub max_routes: usize,
    #[serde(default)]
    pub grid: ParamGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrepFileConfig {
    /// One reaction SMILES per line.
    pub input: PathBuf,
    /// `product<TAB>train|valid|test` lines forcing a product's fold.
    pub pinned: Option<PathBuf>,
    #[serde(default)]
    pub rules: PrepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenUniverseConfig {
    #[serde(default)]
    pub universe: UniverseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportRun {
    pub label: String,
    /// `summary.csv` written by `search`.
    pub summary: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub runs: Vec<ReportRun>,
    #[serde(default = "default_percentiles")]
    pub percentiles: Vec<f64>,
    /// Points per solved-fraction series (plus the origin).
    #[serde(default = "default_checkpoints")]
    pub series_points: usize,
}

/// A parsed config file plus the directory its relative paths refer to.
pub struct Loaded<T> {
    pub config: T,
    pub base: PathBuf,
}

impl<T> Loaded<T> {
    pub fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<Loaded<T>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, base })
}

/// Reads a universe JSON, either bare or wrapped as `{"universe": ...}`.
pub fn read_universe(path: &Path) -> Result<SyntheticUniverse, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(inner) = v.get_mut("universe") {
        v = inner.take();
    }
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub struct ModelHandle {
    pub model: Box<dyn BackwardModel>,
    pub universe: Option<Arc<SyntheticUniverse>>,
}

pub fn open_model<T>(spec: &ModelSpec, ctx: &Loaded<T>) -> Result<ModelHandle, CliError> {
    match spec {
        ModelSpec::File { path } => Ok(ModelHandle {
            model: Box::new(FileModel::load(ctx.path(path))?),
            universe: None,
        }),
        ModelSpec::Wire {
            command,
            address,
            timeout_s,
            name,
        } => {
            let timeout = timeout_s.map_or(DEFAULT_TIMEOUT, Duration::from_secs_f64);
            let client = match (command.split_first(), address) {
                (Some((prog, args)), None) => WireClient::spawn(prog, args, timeout)?,
                (None, Some(addr)) => WireClient::connect(addr, timeout)?,
                _ => return Err(CliError::Config("wire model needs exactly one of `command` or `address`".into())),
            };
            Ok(ModelHandle {
                model: Box::new(WireModel::new(name.clone().unwrap_or_else(|| "wire".into()), client)),
                universe: None,
            })
        }
        ModelSpec::Universe { path, primary_only } => {
            let u = Arc::new(read_universe(&ctx.path(path))?);
            let model = if *primary_only {
                UniverseModel::primary_only(u.clone())
            } else {
                UniverseModel::new(u.clone())
            };
            Ok(ModelHandle {
                model: Box::new(model),
                universe: Some(u),
            })
        }
    }
}

pub fn open_oracle<T>(spec: &OracleSpec, ctx: &Loaded<T>) -> Result<Box<dyn ForwardOracle>, CliError> {
    Ok(match spec {
        OracleSpec::Table { path } => Box::new(TableOracle::load(ctx.path(path))?),
        OracleSpec::Universe { path } => Box::new(UniverseOracle::new(Arc::new(read_universe(&ctx.path(path))?))),
    })
}

pub fn open_inventory<T>(path: Option<&PathBuf>, handle: &ModelHandle, ctx: &Loaded<T>) -> Result<Inventory, CliError> {
    match (path, &handle.universe) {
        (Some(p), _) => {
            let p = ctx.path(p);
            Inventory::load(&p, &Normalizer::default()).map_err(|e| CliError::Config(e.to_string()))
        }
        (None, Some(u)) => Ok(u.inventory()),
        (None, None) => Err(CliError::Config("`inventory` is required for this model kind".into())),
    }
}

pub fn open_targets<T>(path: Option<&PathBuf>, handle: &ModelHandle, ctx: &Loaded<T>) -> Result<Vec<Molecule>, CliError> {
    match (path, &handle.universe) {
        (Some(p), _) => read_targets(&ctx.path(p)),
        (None, Some(u)) => Ok(u.target_molecules()),
        (None, None) => Err(CliError::Config("`targets` is required for this model kind".into())),
    }
}

/// One SMILES per line (first whitespace-separated field); blank and `#`
/// lines skipped.
pub fn read_targets(path: &Path) -> Result<Vec<Molecule>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let n = Normalizer::default();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(field) = line.split_whitespace().next() else { continue };
        if field.starts_with('#') {
            continue;
        }
        out.push(
            n.normalize(field)
                .map_err(|e| CliError::Config(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

pub fn eval_samples<T>(dataset: Option<&PathBuf>, handle: &ModelHandle, ctx: &Loaded<T>) -> Result<Vec<EvalSample>, CliError> {
    match (dataset, &handle.universe) {
        (Some(p), _) => EvalSample::load_tsv(ctx.path(p), &Normalizer::default()).map_err(|e| CliError::Config(e.to_string())),
        (None, Some(u)) => Ok(u
            .eval_samples()
            .into_iter()
            .map(|(product, reactants)| EvalSample {
                raw_product: product.id.clone(),
                product,
                ground_truth_reactants: reactants,
            })
            .collect()),
        (None, None) => Err(CliError::Config("`dataset` is required for this model kind".into())),
    }
}
