use std::time::Instant;

use super::{check_inputs, DecodeResult, DecodeStats, HmmError, LogModel, ObservationSequence, LOG_ZERO};

/// Largest number of sequences [`brute_force_decode`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Log-probability of a concrete state path jointly with the observations.
///
/// Terms are added with Neumaier compensation, so two paths made of the same
/// factors in a different order get the same value up to an ulp or so even
/// for very long sequences.
pub fn path_log_prob(model: &LogModel, obs: &ObservationSequence, path: &[usize]) -> f64 {
    assert_eq!(path.len(), obs.len(), "path and observations differ in length");
    let mut sum = CompensatedSum::default();
    sum.add(model.initial(path[0]));
    sum.add(model.emission(path[0], obs[0]));
    for t in 1..path.len() {
        sum.add(model.transition(path[t - 1], path[t]));
        sum.add(model.emission(path[t], obs[t]));
    }
    sum.value()
}

#[derive(Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        if !x.is_finite() || !self.sum.is_finite() {
            self.sum += x;
            return;
        }
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        if self.sum.is_finite() {
            self.sum + self.carry
        } else {
            self.sum
        }
    }
}

/// Classical Viterbi recursion in log space.
///
/// Ties in every argmax go to the smallest state index.
pub fn viterbi_decode(model: &LogModel, obs: &ObservationSequence) -> Result<DecodeResult, HmmError> {
    check_inputs(model, obs)?;
    let start = Instant::now();
    let n = model.num_states();
    let len = obs.len();

    // transposed[j * n + i] = ln a_ij, so the inner loop walks contiguous memory
    let mut transposed = vec![LOG_ZERO; n * n];
    for i in 0..n {
        for (j, &a) in model.transition_row(i).iter().enumerate() {
            transposed[j * n + i] = a;
        }
    }

    let mut prev: Vec<f64> = (0..n)
        .map(|i| model.initial(i) + model.emission(i, obs[0]))
        .collect();
    let mut cur = vec![LOG_ZERO; n];
    let mut back = vec![0u32; n * len];

    for t in 1..len {
        let y = obs[t];
        let row = &mut back[t * n..(t + 1) * n];
        for j in 0..n {
            let column = &transposed[j * n..(j + 1) * n];
            let mut best = LOG_ZERO;
            let mut arg = 0usize;
            for (i, (&d, &a)) in prev.iter().zip(column).enumerate() {
                let v = d + a;
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            cur[j] = best + model.emission(j, y);
            row[j] = arg as u32;
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    let mut last = 0usize;
    for j in 1..n {
        if prev[j] > prev[last] {
            last = j;
        }
    }
    if prev[last] == LOG_ZERO {
        return Err(HmmError::AllPathsImpossible);
    }
    let mut path = vec![0usize; len];
    path[len - 1] = last;
    for t in (1..len).rev() {
        path[t - 1] = back[t * n + path[t]] as usize;
    }
    let log_likelihood = path_log_prob(model, obs, &path);
    Ok(DecodeResult {
        path,
        log_likelihood,
        stats: DecodeStats {
            iterations: 1,
            cells_explored: n * len,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..DecodeStats::default()
        },
    })
}

/// Exhaustive maximization over all `N^T` state sequences.
///
/// Enumeration is lexicographic and only a strictly better score replaces the
/// incumbent, so ties resolve to the lexicographically smallest path.
pub fn brute_force_decode(model: &LogModel, obs: &ObservationSequence) -> Result<DecodeResult, HmmError> {
    check_inputs(model, obs)?;
    let start = Instant::now();
    let n = model.num_states();
    let len = obs.len();
    let too_large = HmmError::TooLarge {
        num_states: n,
        len,
    };
    let total = (0..len).try_fold(1u64, |acc, _| {
        acc.checked_mul(n as u64).filter(|&v| v <= BRUTE_FORCE_LIMIT)
    });
    let total = total.ok_or(too_large)?;

    let mut path = vec![0usize; len];
    let mut best_path = path.clone();
    let mut best = LOG_ZERO;
    for k in 0..total {
        if k > 0 {
            // odometer increment, last position fastest
            let mut pos = len - 1;
            loop {
                path[pos] += 1;
                if path[pos] < n {
                    break;
                }
                path[pos] = 0;
                pos -= 1;
            }
        }
        let score = path_log_prob(model, obs, &path);
        if score > best {
            best = score;
            best_path.copy_from_slice(&path);
        }
    }
    if best == LOG_ZERO {
        return Err(HmmError::AllPathsImpossible);
    }
    Ok(DecodeResult {
        path: best_path,
        log_likelihood: best,
        stats: DecodeStats {
            iterations: 1,
            cells_explored: total as usize,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            ..DecodeStats::default()
        },
    })
}
