//! Model-agnostic retrosynthesis search and benchmarking.
//!
//! The crate is split along the lines of a typical planning pipeline:
//!
//! * [`molkit`]: SMILES tokenization, atom maps, normalization.
//! * [`gateway`]: the single-step model interface, post-processing,
//!   per-run caching with call accounting, a file-backed model, a
//!   synthetic reaction universe and a JSON-lines wire client.
//! * [`eval`]: single-step evaluation (top-k, MRR, round-trip metrics).
//! * [`graph`]: the AND/OR search graph, route extraction and the
//!   non-overlapping-routes diversity metric.
//! * [`search`]: Retro*-0, MCTS and breadth-first search with budgets and
//!   event traces, plus time-series metrics and parameter sweeps.
//! * [`inventory`]: purchasable building blocks.
//! * [`dataprep`]: reaction-dataset cleaning and product-grouped splits.
//! * [`stats`]: percentiles for reports.

pub mod dataprep;
pub mod eval;
pub mod gateway;
pub mod graph;
pub mod inventory;
pub mod molkit;
pub mod search;
pub mod stats;

pub use gateway::{BackwardModel, CachedModel, Prediction};
pub use graph::{AndOrGraph, Route};
pub use inventory::Inventory;
pub use molkit::{Molecule, MoleculeSet, Normalizer};

/// Version string embedded in every output file.
pub const TOOL_VERSION: &str = concat!("synthsearch ", env!("CARGO_PKG_VERSION"));
