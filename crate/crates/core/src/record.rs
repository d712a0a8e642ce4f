use serde::{Deserialize, Serialize};

/// Per time step, the `(level, state)` cells a decoder instantiated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationRecord {
    pub steps: Vec<Vec<(usize, usize)>>,
}

impl ExplorationRecord {
    pub fn new(len: usize) -> Self {
        Self {
            steps: vec![Vec::new(); len],
        }
    }

    /// Every concrete cell, as touched by flat Viterbi.
    pub fn full(num_states: usize, len: usize) -> Self {
        Self {
            steps: vec![(0..num_states).map(|s| (0, s)).collect(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, time: usize, level: usize, state: usize) {
        self.steps[time].push((level, state));
    }

    pub fn total_cells(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
