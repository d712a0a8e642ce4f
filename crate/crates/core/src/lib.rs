//! Exact HMM decoding with temporal and spatial abstraction.
//!
//! [`hmm`] holds the model types and classical Viterbi, [`hierarchy`] the
//! state abstractions and abstract model construction, [`cfdp`] and [`tav`]
//! the two hierarchical decoders, and [`genbench`] the synthetic instance
//! generators, the benchmark harness and exploration maps.

pub mod cfdp;
pub mod genbench;
pub mod hierarchy;
pub mod hmm;
pub mod record;
pub mod tav;
#[cfg(test)]
mod testutil;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cfdp::{cfdp_decode, cfdp_decode_traced};
pub use hierarchy::{build_abstract_models, AbstractModelStack, AbstractionHierarchy};
pub use hmm::{viterbi_decode, DecodeResult, DecodeStats, HmmModel, LogModel, ObservationSequence};
pub use record::ExplorationRecord;
pub use tav::{tav_decode, tav_decode_traced, Heuristic, TavOptions};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Hmm(#[from] hmm::HmmError),
    #[error(transparent)]
    Hierarchy(#[from] hierarchy::HierarchyError),
    #[error(transparent)]
    Tav(#[from] tav::TavError),
    #[error(transparent)]
    Bench(#[from] genbench::BenchError),
}

impl Error {
    /// Whether the error reports a broken internal invariant rather than bad
    /// input.
    pub fn is_internal(&self) -> bool {
        matches!(
            self,
            Error::Tav(tav::TavError::Invariant(_) | tav::TavError::Disconnected { .. } | tav::TavError::UnknownLink(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Viterbi,
    Cfdp,
    Tav,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Viterbi => "viterbi",
            Algorithm::Cfdp => "cfdp",
            Algorithm::Tav => "tav",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "viterbi" => Ok(Algorithm::Viterbi),
            "cfdp" => Ok(Algorithm::Cfdp),
            "tav" => Ok(Algorithm::Tav),
            other => Err(format!("unknown algorithm `{other}` (expected viterbi, cfdp or tav)")),
        }
    }
}

/// Runs one decoder. The exploration record is `None` for Viterbi, which
/// touches every cell (see [`ExplorationRecord::full`]).
pub fn decode(
    algorithm: Algorithm,
    stack: &AbstractModelStack,
    hierarchy: &AbstractionHierarchy,
    obs: &ObservationSequence,
    options: TavOptions,
) -> Result<(DecodeResult, Option<ExplorationRecord>), Error> {
    match algorithm {
        Algorithm::Viterbi => Ok((viterbi_decode(stack.concrete(), obs)?, None)),
        Algorithm::Cfdp => cfdp_decode_traced(stack, hierarchy, obs).map(|(r, t)| (r, Some(t.record))),
        Algorithm::Tav => tav_decode_traced(stack, hierarchy, obs, options).map(|(r, t)| (r, Some(t.record))),
    }
}
