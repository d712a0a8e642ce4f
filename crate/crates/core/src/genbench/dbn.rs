use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::InstanceMeta;
use crate::hierarchy::{hierarchy_from_dbn, AbstractionHierarchy, DbnSpec, HierarchyError};
use crate::hmm::{sample_sequence, HmmModel, ObservationSequence};

/// Emission probability of a state's own symbol in generated DBN models.
pub const DBN_EMISSION_PEAK: f64 = 0.6;

/// Joint HMM of a DBN together with its variable hierarchy.
///
/// The `i`-th fastest variable keeps its value with probability `1 - ε^i`.
/// When it changes, the new value comes from a random distribution over its
/// other values, drawn once per previous joint state. Every state emits its
/// own symbol with probability [`DBN_EMISSION_PEAK`] and the others uniformly.
pub fn generate_dbn_model(spec: &DbnSpec) -> Result<(HmmModel, AbstractionHierarchy), HierarchyError> {
    let hierarchy = hierarchy_from_dbn(spec)?;
    let n = spec.num_states();
    let vars = spec.num_vars();
    let cards = &spec.cardinalities;
    // position p in the list (slowest first) is the (vars - p)-th fastest
    let change: Vec<f64> = (0..vars).map(|p| spec.epsilon.powi((vars - p) as i32)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut transition = vec![vec![0.0; n]; n];
    let mut factors: Vec<Vec<f64>> = cards.iter().map(|&k| vec![0.0; k]).collect();
    for (x, row) in transition.iter_mut().enumerate() {
        let digits = spec.decode_state(x);
        for p in 0..vars {
            let k = cards[p];
            let weights: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            let mut others = weights.iter().map(|w| w / total);
            for (v, f) in factors[p].iter_mut().enumerate() {
                *f = if v == digits[p] {
                    1.0 - change[p]
                } else {
                    change[p] * others.next().unwrap()
                };
            }
        }
        for (y, cell) in row.iter_mut().enumerate() {
            let next = spec.decode_state(y);
            *cell = next.iter().enumerate().map(|(p, &v)| factors[p][v]).product();
        }
    }
    let off = (1.0 - DBN_EMISSION_PEAK) / (n - 1) as f64;
    let emission = (0..n)
        .map(|i| (0..n).map(|k| if k == i { DBN_EMISSION_PEAK } else { off }).collect())
        .collect();
    let initial = vec![1.0 / n as f64; n];
    Ok((HmmModel::new(transition, emission, initial), hierarchy))
}

/// A generated DBN model, its hierarchy and `len` sampled observations.
pub fn generate_dbn_instance(
    spec: &DbnSpec,
    len: usize,
) -> Result<(HmmModel, AbstractionHierarchy, ObservationSequence), crate::Error> {
    let (model, hierarchy) = generate_dbn_model(spec)?;
    let (_, obs) = sample_sequence(&model, len, spec.seed.wrapping_add(1))?;
    Ok((model, hierarchy, obs))
}

pub fn dbn_meta(spec: &DbnSpec, len: usize) -> InstanceMeta {
    InstanceMeta {
        generator: "dbn".into(),
        seed: spec.seed,
        len,
        params: serde_json::json!({
            "cardinalities": spec.cardinalities,
            "epsilon": spec.epsilon,
            "emission_peak": DBN_EMISSION_PEAK,
        }),
    }
}
