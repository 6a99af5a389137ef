//! Single-step model evaluation: top-k accuracy, MRR, round-trip
//! precision and coverage, and per-call inference time.
//!
//! Products are handed to the model only after atom maps are stripped and
//! the molecule is re-normalized.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::gateway::{postprocess_with, BackwardModel, ForwardOracle, GatewayError, Prediction};
use crate::molkit::{Molecule, MoleculeSet, MolkitError, Normalizer};
use crate::stats;

pub const DEFAULT_KS: [usize; 5] = [1, 3, 5, 10, 50];
pub const DEFAULT_NUM_RESULTS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Parse { path: String, line: usize, reason: String },
    #[error("no samples to evaluate")]
    NoSamples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSample {
    pub product: Molecule,
    pub ground_truth_reactants: MoleculeSet,
    /// Product exactly as read, possibly carrying atom maps.
    pub raw_product: String,
}

impl EvalSample {
    pub fn new(normalizer: &Normalizer, product: &str, reactants: &str) -> Result<Self, MolkitError> {
        Ok(Self {
            product: normalizer.normalize(product)?,
            ground_truth_reactants: normalizer.molecule_set([reactants])?,
            raw_product: product.to_string(),
        })
    }

    /// Parses `product<TAB>reactants` lines; blank and `#` lines are skipped.
    pub fn parse_tsv(text: &str, origin: &str, normalizer: &Normalizer) -> Result<Vec<Self>, EvalError> {
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| EvalError::Parse {
                path: origin.to_string(),
                line: i + 1,
                reason,
            };
            let mut cols = line.split('\t');
            let (Some(p), Some(r), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(err("expected 2 tab-separated columns".into()));
            };
            out.push(Self::new(normalizer, p.trim(), r.trim()).map_err(|e| err(e.to_string()))?);
        }
        Ok(out)
    }

    pub fn load_tsv(path: impl AsRef<Path>, normalizer: &Normalizer) -> Result<Vec<Self>, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_tsv(&text, &path.display().to_string(), normalizer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub calls: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub p95_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub num_samples: usize,
    pub num_results: usize,
    pub ks: Vec<usize>,
    pub top_k_accuracy: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub round_trip_precision: Option<BTreeMap<usize, f64>>,
    pub round_trip_coverage: Option<BTreeMap<usize, f64>>,
    pub timing: Timing,
    pub dropped_invalid: u64,
    pub dedup_removed: u64,
    /// Set when the model failed part-way; metrics cover the samples
    /// evaluated before the failure.
    pub incomplete: bool,
    pub error: Option<String>,
}

impl EvalReport {
    /// Flat `(metric, value)` rows for CSV output.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![("num_samples".to_string(), self.num_samples as f64)];
        for (k, v) in &self.top_k_accuracy {
            rows.push((format!("top_{k}"), *v));
        }
        rows.push(("mrr".into(), self.mrr));
        for (name, map) in [
            ("round_trip_precision", &self.round_trip_precision),
            ("round_trip_coverage", &self.round_trip_coverage),
        ] {
            for (k, v) in map.iter().flatten() {
                rows.push((format!("{name}_{k}"), *v));
            }
        }
        rows.push(("time_mean_s".into(), self.timing.mean_s));
        rows.push(("time_median_s".into(), self.timing.median_s));
        rows.push(("time_p95_s".into(), self.timing.p95_s));
        rows.push(("dropped_invalid".into(), self.dropped_invalid as f64));
        rows.push(("dedup_removed".into(), self.dedup_removed as f64));
        rows
    }
}

/// Mergeable per-sample tallies; reduction across workers is associative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalAccumulator {
    pub ks: Vec<usize>,
    pub samples: usize,
    pub hits: Vec<u64>,
    pub reciprocal_rank_sum: f64,
    pub rt_precision_sum: Vec<f64>,
    pub rt_covered: Vec<u64>,
    pub call_times: Vec<Duration>,
    pub dropped_invalid: u64,
    pub dedup_removed: u64,
}

impl EvalAccumulator {
    pub fn new(ks: &[usize]) -> Self {
        Self {
            ks: ks.to_vec(),
            hits: vec![0; ks.len()],
            rt_precision_sum: vec![0.0; ks.len()],
            rt_covered: vec![0; ks.len()],
            ..Self::default()
        }
    }

    fn add(&mut self, rank: Option<usize>, feasible: Option<&[bool]>) {
        self.samples += 1;
        if let Some(r) = rank {
            self.reciprocal_rank_sum += 1.0 / r as f64;
        }
        for (i, &k) in self.ks.iter().enumerate() {
            if rank.is_some_and(|r| r <= k) {
                self.hits[i] += 1;
            }
            if let Some(f) = feasible {
                let (p, c) = round_trip_sample(f, k);
                self.rt_precision_sum[i] += p;
                self.rt_covered[i] += u64::from(c);
            }
        }
    }

    pub fn merge(&mut self, other: &EvalAccumulator) {
        assert_eq!(self.ks, other.ks, "merging reports with different ks");
        self.samples += other.samples;
        for i in 0..self.ks.len() {
            self.hits[i] += other.hits[i];
            self.rt_precision_sum[i] += other.rt_precision_sum[i];
            self.rt_covered[i] += other.rt_covered[i];
        }
        self.reciprocal_rank_sum += other.reciprocal_rank_sum;
        self.call_times.extend_from_slice(&other.call_times);
        self.dropped_invalid += other.dropped_invalid;
        self.dedup_removed += other.dedup_removed;
    }

    pub fn finish(&self, model: &str, num_results: usize, round_trip: bool, error: Option<String>) -> EvalReport {
        let n = self.samples.max(1) as f64;
        let per_k = |v: &dyn Fn(usize) -> f64| -> BTreeMap<usize, f64> {
            self.ks.iter().enumerate().map(|(i, &k)| (k, v(i))).collect()
        };
        let mut secs: Vec<f64> = self.call_times.iter().map(Duration::as_secs_f64).collect();
        secs.sort_by(f64::total_cmp);
        EvalReport {
            model: model.to_string(),
            num_samples: self.samples,
            num_results,
            ks: self.ks.clone(),
            top_k_accuracy: per_k(&|i| self.hits[i] as f64 / n),
            mrr: self.reciprocal_rank_sum / n,
            round_trip_precision: round_trip.then(|| per_k(&|i| self.rt_precision_sum[i] / n)),
            round_trip_coverage: round_trip.then(|| per_k(&|i| self.rt_covered[i] as f64 / n)),
            timing: Timing {
                calls: secs.len(),
                mean_s: stats::mean(&secs).unwrap_or(0.0),
                median_s: stats::percentile(&secs, 50.0).unwrap_or(0.0),
                p95_s: stats::percentile(&secs, 95.0).unwrap_or(0.0),
                total_s: secs.iter().sum(),
            },
            dropped_invalid: self.dropped_invalid,
            dedup_removed: self.dedup_removed,
            incomplete: error.is_some(),
            error,
        }
    }
}

/// Precision and coverage of one sample's feasibility flags at `k`.
fn round_trip_sample(feasible: &[bool], k: usize) -> (f64, bool) {
    let top = &feasible[..k.min(feasible.len())];
    if top.is_empty() {
        return (0.0, false);
    }
    let ok = top.iter().filter(|&&f| f).count();
    (ok as f64 / top.len() as f64, ok > 0)
}

pub struct EvalOptions<'a> {
    pub ks: Vec<usize>,
    pub num_results: usize,
    pub oracle: Option<&'a dyn ForwardOracle>,
    pub normalizer: Normalizer,
    /// Sends the raw (possibly atom-mapped) product to the model instead of
    /// the stripped one. Only for demonstrating leakage.
    #[doc(hidden)]
    pub pass_raw_inputs: bool,
}

impl Default for EvalOptions<'_> {
    fn default() -> Self {
        Self {
            ks: DEFAULT_KS.to_vec(),
            num_results: DEFAULT_NUM_RESULTS,
            oracle: None,
            normalizer: Normalizer::default(),
            pass_raw_inputs: false,
        }
    }
}

/// 1-based rank of `truth` in a post-processed list.
pub fn rank_of(predictions: &[Prediction], truth: &MoleculeSet) -> Option<usize> {
    predictions.iter().find(|p| &p.reactants == truth).map(|p| p.rank)
}

/// Evaluates a chunk of samples, stopping at the first model failure.
pub fn evaluate_chunk(
    model: &dyn BackwardModel,
    samples: &[EvalSample],
    opts: &EvalOptions<'_>,
) -> (EvalAccumulator, Option<GatewayError>) {
    let mut acc = EvalAccumulator::new(&opts.ks);
    for s in samples {
        let input = if opts.pass_raw_inputs {
            Molecule::unnormalized(s.raw_product.clone())
        } else {
            s.product.clone()
        };
        let start = Instant::now();
        let raw = match model.query(&input, opts.num_results) {
            Ok(r) => r,
            Err(e) => return (acc, Some(e)),
        };
        let pp = postprocess_with(&opts.normalizer, &raw, opts.num_results);
        acc.call_times.push(start.elapsed());
        acc.dropped_invalid += pp.dropped_invalid as u64;
        acc.dedup_removed += pp.dedup_removed as u64;
        let feasible: Option<Vec<bool>> = opts
            .oracle
            .map(|o| pp.predictions.iter().map(|p| o.feasible(&p.reactants, &s.product)).collect());
        acc.add(rank_of(&pp.predictions, &s.ground_truth_reactants), feasible.as_deref());
    }
    (acc, None)
}

pub fn evaluate(model: &dyn BackwardModel, samples: &[EvalSample], opts: &EvalOptions<'_>) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::NoSamples);
    }
    let (acc, err) = evaluate_chunk(model, samples, opts);
    Ok(acc.finish(model.name(), opts.num_results, opts.oracle.is_some(), err.map(|e| e.to_string())))
}

/// Round-trip precision and coverage per k.
pub fn round_trip(
    model: &dyn BackwardModel,
    oracle: &dyn ForwardOracle,
    samples: &[EvalSample],
    ks: &[usize],
    num_results: usize,
) -> Result<(BTreeMap<usize, f64>, BTreeMap<usize, f64>), GatewayError> {
    let opts = EvalOptions {
        ks: ks.to_vec(),
        num_results,
        oracle: Some(oracle),
        ..EvalOptions::default()
    };
    let (acc, err) = evaluate_chunk(model, samples, &opts);
    if let Some(e) = err {
        return Err(e);
    }
    let r = acc.finish(model.name(), num_results, true, None);
    Ok((r.round_trip_precision.unwrap_or_default(), r.round_trip_coverage.unwrap_or_default()))
}
