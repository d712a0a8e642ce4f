//! State abstraction hierarchies and the stack of max-constructed abstract
//! models.
//!
//! Level 0 is the concrete state space and level `L` the coarsest. Each level
//! below the top has a parent map sending its states to the next level up.

mod dbn;
mod spectral;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hmm::{LogModel, LOG_ZERO};

pub use dbn::{hierarchy_from_dbn, DbnSpec, MAX_DBN_STATES};
pub use spectral::{induce_hierarchy_spectral, induce_with, InducedHierarchy, SpectralOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HierarchyError {
    #[error("level {level} state {state} maps to parent {parent}, but level {} has {size} states", level + 1)]
    OrphanParent {
        level: usize,
        state: usize,
        parent: usize,
        size: usize,
    },
    #[error("level {level} state {state} has no children")]
    EmptyParent { level: usize, state: usize },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("level {level} has {upper} states, not fewer than the {lower} below it")]
    NotCoarsening {
        level: usize,
        lower: usize,
        upper: usize,
    },
    #[error("invalid DBN spec: {0}")]
    InvalidDbn(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Serialize, Deserialize)]
struct RawHierarchy {
    level_sizes: Vec<usize>,
    parent_maps: Vec<Vec<usize>>,
}

/// Parent maps for levels `0..L` plus derived child lists.
///
/// Construction checks that parents are in range and that every abstract
/// state has a child. Strict coarsening and the match with a model's state
/// count are checked by [`validate_hierarchy`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHierarchy", into = "RawHierarchy")]
pub struct AbstractionHierarchy {
    level_sizes: Vec<usize>,
    parent_maps: Vec<Vec<usize>>,
    children: Vec<Vec<Vec<usize>>>,
}

impl TryFrom<RawHierarchy> for AbstractionHierarchy {
    type Error = HierarchyError;

    fn try_from(raw: RawHierarchy) -> Result<Self, Self::Error> {
        Self::new(raw.level_sizes, raw.parent_maps)
    }
}

impl From<AbstractionHierarchy> for RawHierarchy {
    fn from(h: AbstractionHierarchy) -> Self {
        RawHierarchy {
            level_sizes: h.level_sizes,
            parent_maps: h.parent_maps,
        }
    }
}

impl AbstractionHierarchy {
    pub fn new(level_sizes: Vec<usize>, parent_maps: Vec<Vec<usize>>) -> Result<Self, HierarchyError> {
        if level_sizes.is_empty() {
            return Err(HierarchyError::SizeMismatch("no levels".into()));
        }
        if parent_maps.len() + 1 != level_sizes.len() {
            return Err(HierarchyError::SizeMismatch(format!(
                "{} levels need {} parent maps, found {}",
                level_sizes.len(),
                level_sizes.len() - 1,
                parent_maps.len()
            )));
        }
        if level_sizes.contains(&0) {
            return Err(HierarchyError::SizeMismatch("empty level".into()));
        }
        let mut children = vec![Vec::new()];
        for (level, map) in parent_maps.iter().enumerate() {
            if map.len() != level_sizes[level] {
                return Err(HierarchyError::SizeMismatch(format!(
                    "parent map {level} has {} entries for {} states",
                    map.len(),
                    level_sizes[level]
                )));
            }
            let upper = level_sizes[level + 1];
            let mut kids = vec![Vec::new(); upper];
            for (state, &parent) in map.iter().enumerate() {
                if parent >= upper {
                    return Err(HierarchyError::OrphanParent {
                        level,
                        state,
                        parent,
                        size: upper,
                    });
                }
                kids[parent].push(state);
            }
            if let Some(state) = kids.iter().position(Vec::is_empty) {
                return Err(HierarchyError::EmptyParent {
                    level: level + 1,
                    state,
                });
            }
            children.push(kids);
        }
        Ok(Self {
            level_sizes,
            parent_maps,
            children,
        })
    }

    /// A hierarchy with only the concrete level.
    pub fn flat(num_states: usize) -> Self {
        Self::new(vec![num_states], Vec::new()).expect("flat hierarchy is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, HierarchyError> {
        serde_json::from_str(text).map_err(|e| HierarchyError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("hierarchy serializes")
    }

    /// Number of levels, `L + 1`.
    pub fn num_levels(&self) -> usize {
        self.level_sizes.len()
    }

    /// Index of the coarsest level, `L`.
    pub fn top_level(&self) -> usize {
        self.level_sizes.len() - 1
    }

    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.level_sizes[level]
    }

    pub fn parent_maps(&self) -> &[Vec<usize>] {
        &self.parent_maps
    }

    /// `φ(s)` for a state at `level < L`.
    #[inline]
    pub fn parent(&self, level: usize, state: usize) -> usize {
        self.parent_maps[level][state]
    }

    /// Children of a state at `level >= 1`.
    #[inline]
    pub fn children(&self, level: usize, state: usize) -> &[usize] {
        &self.children[level][state]
    }

    /// The ancestor of `state` (at `level`) at level `to >= level`.
    pub fn ancestor(&self, level: usize, state: usize, to: usize) -> usize {
        (level..to).fold(state, |s, l| self.parent_maps[l][s])
    }

    /// Concrete states below `state` at `level`, in increasing order.
    pub fn descendants(&self, level: usize, state: usize) -> Vec<usize> {
        let mut frontier = vec![state];
        for l in (1..=level).rev() {
            frontier = frontier
                .iter()
                .flat_map(|&s| self.children[l][s].iter().copied())
                .collect();
        }
        frontier.sort_unstable();
        frontier
    }

    /// Largest number of children of any abstract state.
    pub fn max_branching(&self) -> usize {
        self.children
            .iter()
            .flatten()
            .map(Vec::len)
            .max()
            .unwrap_or(0)
    }

    /// The hierarchy made of levels `from..=L`, re-rooted so `from` is level 0.
    pub fn sub_hierarchy(&self, from: usize) -> Self {
        Self::new(
            self.level_sizes[from..].to_vec(),
            self.parent_maps[from..].to_vec(),
        )
        .expect("suffix of a valid hierarchy is valid")
    }
}

/// Accepts iff the hierarchy is structurally sound, strictly coarsening and
/// its concrete level has `num_states` states.
pub fn validate_hierarchy(h: &AbstractionHierarchy, num_states: usize) -> Result<(), HierarchyError> {
    // structural checks again, in case the value was built by hand
    AbstractionHierarchy::new(h.level_sizes.clone(), h.parent_maps.clone())?;
    if h.level_sizes[0] != num_states {
        return Err(HierarchyError::SizeMismatch(format!(
            "concrete level has {} states, model has {num_states}",
            h.level_sizes[0]
        )));
    }
    for level in 1..h.level_sizes.len() {
        if h.level_sizes[level] >= h.level_sizes[level - 1] {
            return Err(HierarchyError::NotCoarsening {
                level,
                lower: h.level_sizes[level - 1],
                upper: h.level_sizes[level],
            });
        }
    }
    Ok(())
}

/// Log-space models `M_0..M_L`, level 0 being the input model.
#[derive(Debug, Clone, PartialEq)]
pub struct AbstractModelStack {
    models: Vec<LogModel>,
}

impl AbstractModelStack {
    pub fn level(&self, level: usize) -> &LogModel {
        &self.models[level]
    }

    pub fn concrete(&self) -> &LogModel {
        &self.models[0]
    }

    pub fn top_level(&self) -> usize {
        self.models.len() - 1
    }

    pub fn models(&self) -> &[LogModel] {
        &self.models
    }
}

fn coarsen(model: &LogModel, parents: &[usize], upper: usize) -> LogModel {
    let n = model.num_states();
    let m = model.num_symbols();
    let mut trans = vec![LOG_ZERO; upper * upper];
    let mut emis = vec![LOG_ZERO; upper * m];
    let mut init = vec![LOG_ZERO; upper];
    for p in 0..n {
        let i = parents[p];
        for (q, &a) in model.transition_row(p).iter().enumerate() {
            let cell = &mut trans[i * upper + parents[q]];
            *cell = cell.max(a);
        }
        for (k, &b) in model.emission_row(p).iter().enumerate() {
            let cell = &mut emis[i * m + k];
            *cell = cell.max(b);
        }
        init[i] = init[i].max(model.initial(p));
    }
    LogModel::from_raw(upper, m, trans, emis, init)
}

/// Builds `M_{l+1}` from `M_l` by taking, for every abstract parameter, the
/// maximum over its constituent parameters one level down.
pub fn build_abstract_models(
    model: &LogModel,
    h: &AbstractionHierarchy,
) -> Result<AbstractModelStack, HierarchyError> {
    if h.level_size(0) != model.num_states() {
        return Err(HierarchyError::SizeMismatch(format!(
            "concrete level has {} states, model has {}",
            h.level_size(0),
            model.num_states()
        )));
    }
    let mut models = vec![model.clone()];
    for level in 0..h.top_level() {
        let next = coarsen(&models[level], &h.parent_maps[level], h.level_size(level + 1));
        models.push(next);
    }
    Ok(AbstractModelStack { models })
}
