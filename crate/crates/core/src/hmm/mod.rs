//! Model representation, validation, classical Viterbi decoding, sampling and
//! an exhaustive decoding oracle.
//!
//! All scoring is done with natural logarithms. A zero probability is stored
//! as [`LOG_ZERO`] (negative infinity).

mod model;
mod sample;
mod viterbi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{validate_model, HmmModel, LogModel, ObservationSequence, LOG_ZERO, STOCHASTIC_TOLERANCE};
pub use sample::{sample_sequence, stationary_distribution};
pub use viterbi::{brute_force_decode, path_log_prob, viterbi_decode, BRUTE_FORCE_LIMIT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HmmError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} row {row} sums to {sum}, not 1")]
    NotStochastic {
        what: &'static str,
        row: usize,
        sum: f64,
    },
    #[error("{what}[{row}][{col}] = {value} is outside [0, 1]")]
    OutOfRange {
        what: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("observation {symbol} at t={time} is not below num_symbols={num_symbols}")]
    SymbolOutOfRange {
        time: usize,
        symbol: usize,
        num_symbols: usize,
    },
    #[error("observation sequence is empty")]
    EmptyObservations,
    #[error("every state sequence has probability zero")]
    AllPathsImpossible,
    #[error("exhaustive search over {num_states}^{len} sequences exceeds the limit")]
    TooLarge { num_states: usize, len: usize },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Counters collected by a decoder.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeStats {
    pub iterations: usize,
    pub links_created: usize,
    pub refinements_spatial: usize,
    pub refinements_temporal: usize,
    /// Distinct (state, level, time) instantiations touched.
    pub cells_explored: usize,
    pub wall_ms: f64,
}

/// A most-likely concrete state path and its log-probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub path: Vec<usize>,
    pub log_likelihood: f64,
    pub stats: DecodeStats,
}

impl DecodeResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HmmError> {
        serde_json::from_str(text).map_err(|e| HmmError::Parse(e.to_string()))
    }
}

pub(crate) fn check_inputs(model: &LogModel, obs: &ObservationSequence) -> Result<(), HmmError> {
    if obs.is_empty() {
        return Err(HmmError::EmptyObservations);
    }
    obs.check_alphabet(model.num_symbols())
}
