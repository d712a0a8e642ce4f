use serde::{Deserialize, Serialize};

use super::{AbstractionHierarchy, HierarchyError};

/// Largest joint state space a DBN spec may describe.
pub const MAX_DBN_STATES: usize = 1 << 16;

/// A dynamic Bayesian network whose variables evolve on separated timescales.
///
/// `cardinalities` lists the variables slowest first, so `[4, 2, 2]` is a
/// 4-valued slow variable over two binary faster ones. A joint state is the
/// mixed-radix number whose most significant digit is the slowest variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnSpec {
    pub cardinalities: Vec<usize>,
    /// Ratio between the timescales of successive variables.
    pub epsilon: f64,
    pub seed: u64,
}

impl DbnSpec {
    /// `n` variables of cardinality `k` each.
    pub fn uniform(num_vars: usize, cardinality: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            cardinalities: vec![cardinality; num_vars],
            epsilon,
            seed,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn num_states(&self) -> usize {
        self.cardinalities.iter().product()
    }

    pub fn validate(&self) -> Result<(), HierarchyError> {
        if self.cardinalities.is_empty() {
            return Err(HierarchyError::InvalidDbn("need at least one variable".into()));
        }
        if let Some(&k) = self.cardinalities.iter().find(|&&k| k < 2) {
            return Err(HierarchyError::InvalidDbn(format!("cardinality {k} is below 2")));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(HierarchyError::InvalidDbn(format!(
                "epsilon {} is outside (0, 1)",
                self.epsilon
            )));
        }
        let n = self
            .cardinalities
            .iter()
            .try_fold(1usize, |acc, &k| acc.checked_mul(k).filter(|&v| v <= MAX_DBN_STATES));
        if n.is_none() {
            return Err(HierarchyError::InvalidDbn(format!(
                "joint state space exceeds {MAX_DBN_STATES}"
            )));
        }
        Ok(())
    }

    /// Per-variable values of a joint state, slowest first.
    pub fn decode_state(&self, mut state: usize) -> Vec<usize> {
        let mut digits = vec![0; self.cardinalities.len()];
        for (d, &k) in digits.iter_mut().zip(&self.cardinalities).rev() {
            *d = state % k;
            state /= k;
        }
        digits
    }

    pub fn encode_state(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.cardinalities)
            .fold(0, |acc, (&d, &k)| acc * k + d)
    }
}

/// Hierarchy that branches on the slowest variable at the top and on the next
/// slowest within each subtree. Level `L - j` groups joint states by the
/// values of their `j` slowest variables, so `L` equals the number of
/// variables and the top level is a single state.
pub fn hierarchy_from_dbn(spec: &DbnSpec) -> Result<AbstractionHierarchy, HierarchyError> {
    spec.validate()?;
    let cards = &spec.cardinalities;
    let n = cards.len();
    let mut sizes = vec![spec.num_states()];
    let mut maps = Vec::with_capacity(n);
    for level in 0..n {
        // dropping the fastest remaining digit
        let k = cards[n - 1 - level];
        let size = sizes[level];
        maps.push((0..size).map(|s| s / k).collect());
        sizes.push(size / k);
    }
    AbstractionHierarchy::new(sizes, maps)
}
