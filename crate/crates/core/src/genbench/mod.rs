//! Synthetic instances, the benchmark harness and exploration maps.

mod bench;
mod cities;
mod dbn;
mod map;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bench::{
    balanced_hierarchy, median, run_benchmark, BenchConfig, BenchReport, BenchRow, HierarchySpec, InstanceSpec,
    RunSpec, AGREEMENT_TOLERANCE,
};
pub use cities::{
    city_meta, generate_city_instance, CITIES, CITY_DAYS, CITY_EMISSION_SPLIT, CITY_TRANSITION_SPLIT, CONTINENTS,
    COUNTRIES,
};
pub use dbn::{dbn_meta, generate_dbn_instance, generate_dbn_model, DBN_EMISSION_PEAK};
pub use map::{render_exploration_map, ExplorationMap};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("bad benchmark config: {0}")]
    Config(String),
    #[error("record and path do not match: {0}")]
    Mismatch(String),
    #[error("{algorithm} on run {run} found log-likelihood {got}, expected {expected}")]
    Disagreement {
        run: usize,
        algorithm: String,
        expected: f64,
        got: f64,
    },
    #[error("{0}")]
    Io(String),
}

/// Generator settings stored next to a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub generator: String,
    pub seed: u64,
    pub len: usize,
    pub params: serde_json::Value,
}
