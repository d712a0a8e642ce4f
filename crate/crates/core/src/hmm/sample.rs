use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{validate_model, HmmError, HmmModel, ObservationSequence};

fn row_sampler(row: &[f64]) -> WeightedIndex<f64> {
    WeightedIndex::new(row).expect("validated rows have positive mass")
}

/// Draws a state trajectory and its observations. Identical seeds give
/// identical output.
pub fn sample_sequence(
    model: &HmmModel,
    len: usize,
    seed: u64,
) -> Result<(Vec<usize>, ObservationSequence), HmmError> {
    validate_model(model)?;
    if len == 0 {
        return Err(HmmError::EmptyObservations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = row_sampler(&model.initial);
    let trans: Vec<_> = model.transition.iter().map(|r| row_sampler(r)).collect();
    let emit: Vec<_> = model.emission.iter().map(|r| row_sampler(r)).collect();

    let mut states = Vec::with_capacity(len);
    let mut symbols = Vec::with_capacity(len);
    let mut x = init.sample(&mut rng);
    for t in 0..len {
        if t > 0 {
            x = trans[x].sample(&mut rng);
        }
        states.push(x);
        symbols.push(emit[x].sample(&mut rng));
    }
    Ok((states, ObservationSequence::new(symbols)))
}

/// Stationary distribution of the transition matrix by power iteration.
pub fn stationary_distribution(model: &HmmModel, iterations: usize) -> Vec<f64> {
    let n = model.num_states;
    let mut p = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    for _ in 0..iterations {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, row) in model.transition.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                next[j] += p[i] * a;
            }
        }
        std::mem::swap(&mut p, &mut next);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_model_ignores_seed() {
        let m = HmmModel::new(
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 1.0],
        );
        for seed in [0, 1, 99] {
            let (s, o) = sample_sequence(&m, 5, seed).unwrap();
            assert_eq!(s, vec![1, 0, 1, 0, 1]);
            assert_eq!(o.symbols(), &[1, 0, 1, 0, 1]);
        }
    }

    #[test]
    fn same_seed_same_output() {
        let m = HmmModel::new(
            vec![vec![0.6, 0.4], vec![0.3, 0.7]],
            vec![vec![0.5, 0.5], vec![0.1, 0.9]],
            vec![0.5, 0.5],
        );
        assert_eq!(sample_sequence(&m, 200, 7).unwrap(), sample_sequence(&m, 200, 7).unwrap());
        assert_ne!(sample_sequence(&m, 200, 7).unwrap(), sample_sequence(&m, 200, 8).unwrap());
    }

    #[test]
    fn empirical_frequencies_match_stationary() {
        let m = HmmModel::new(
            vec![vec![0.7, 0.3], vec![0.3, 0.7]],
            vec![vec![1.0], vec![1.0]],
            vec![0.5, 0.5],
        );
        let pi = stationary_distribution(&m, 200);
        let (states, _) = sample_sequence(&m, 100_000, 3).unwrap();
        let ones = states.iter().filter(|&&s| s == 1).count() as f64 / states.len() as f64;
        assert!((ones - pi[1]).abs() < 0.01, "{ones} vs {}", pi[1]);
    }

    #[test]
    fn zero_length_is_rejected() {
        let m = HmmModel::new(vec![vec![1.0]], vec![vec![1.0]], vec![1.0]);
        assert_eq!(sample_sequence(&m, 0, 0), Err(HmmError::EmptyObservations));
    }
}
