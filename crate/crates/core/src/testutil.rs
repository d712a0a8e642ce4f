//! Random instances shared by the unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::hierarchy::AbstractionHierarchy;
use crate::hmm::{validate_model, HmmModel, LogModel, ObservationSequence};

/// Random stochastic row; cubing spreads the entries out.
pub fn row(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.gen_range(0.01..1.0f64).powi(3)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub fn random_hmm(rng: &mut ChaCha8Rng, n: usize, m: usize) -> HmmModel {
    let a = (0..n).map(|_| row(rng, n)).collect();
    let b = (0..n).map(|_| row(rng, m)).collect();
    let pi = row(rng, n);
    HmmModel::new(a, b, pi)
}

pub fn random_model(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LogModel {
    validate_model(&random_hmm(rng, n, m)).unwrap()
}

/// Sticky model: heavy self-transitions, like the DBN benchmarks.
pub fn sticky_model(rng: &mut ChaCha8Rng, n: usize, m: usize, stay: f64) -> LogModel {
    let mut hmm = random_hmm(rng, n, m);
    for (i, r) in hmm.transition.iter_mut().enumerate() {
        for x in r.iter_mut() {
            *x *= 1.0 - stay;
        }
        r[i] += stay;
    }
    validate_model(&hmm).unwrap()
}

pub fn random_obs(rng: &mut ChaCha8Rng, m: usize, len: usize) -> ObservationSequence {
    ObservationSequence::new((0..len).map(|_| rng.gen_range(0..m)).collect())
}

/// Complete binary hierarchy (the last block may be a singleton).
pub fn binary(n: usize) -> AbstractionHierarchy {
    let mut sizes = vec![n];
    let mut maps = Vec::new();
    while *sizes.last().unwrap() > 1 {
        let s = *sizes.last().unwrap();
        maps.push((0..s).map(|i| i / 2).collect());
        sizes.push(s.div_ceil(2));
    }
    AbstractionHierarchy::new(sizes, maps).unwrap()
}
