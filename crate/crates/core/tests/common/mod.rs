#![allow(dead_code)]

use tav_core::hmm::LogModel;
use tav_core::tav::{AbstractLink, TavSearch};
use tav_core::{AbstractionHierarchy, ObservationSequence};

pub const TOL: f64 = 1e-9;

/// Every sequence of `len` states out of `0..n`.
pub fn all_sequences(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Log-probability of `x_{t1..=t2}`, counting transitions into and emissions
/// at `t1+1..=t2`.
pub fn segment_score(model: &LogModel, obs: &ObservationSequence, x: &[usize], t1: usize, t2: usize) -> f64 {
    (t1 + 1..=t2)
        .map(|t| model.transition(x[t - 1], x[t]) + model.emission(x[t], obs[t]))
        .sum()
}

/// Log-probability of the prefix `x_{0..=t}`.
pub fn prefix_score(model: &LogModel, obs: &ObservationSequence, x: &[usize], t: usize) -> f64 {
    model.initial(x[0]) + model.emission(x[0], obs[0]) + segment_score(model, obs, x, 0, t)
}

/// Number of link chains from time 0 to each time that represent `x`.
pub fn chain_counts(links: &[AbstractLink], h: &AbstractionHierarchy, x: &[usize]) -> Vec<usize> {
    let mut count = vec![0usize; x.len()];
    count[0] = 1;
    let mut sorted: Vec<&AbstractLink> = links.iter().collect();
    sorted.sort_by_key(|l| l.t1);
    for l in sorted {
        if count[l.t1] > 0 && l.represents(h, &x[l.t1..=l.t2]) {
            count[l.t2] += count[l.t1];
        }
    }
    count
}

/// Admissibility and level structure of every live link, and the partition
/// of all concrete paths into link chains.
pub fn graph_violations(
    model: &LogModel,
    h: &AbstractionHierarchy,
    obs: &ObservationSequence,
    links: &[AbstractLink],
    paths: &[Vec<usize>],
) -> Vec<String> {
    let mut out = Vec::new();
    for l in links {
        if l.level > h.top_level() {
            out.push(format!("link {l:?} above the top level"));
        }
        if l.span() > 1 && l.level < h.top_level() && h.parent(l.level, l.from) != h.parent(l.level, l.to) {
            out.push(format!("link {l:?} joins states with different parents"));
        }
    }
    let len = obs.len();
    for x in paths {
        for l in links {
            if l.represents(h, &x[l.t1..=l.t2]) {
                let p = segment_score(model, obs, x, l.t1, l.t2);
                if l.log_score < p - TOL {
                    out.push(format!("link {l:?} scores below segment {x:?} ({p})"));
                }
            }
        }
        let count = chain_counts(links, h, x);
        if count[len - 1] != 1 {
            out.push(format!("path {x:?} has {} chains", count[len - 1]));
        }
    }
    out
}

/// Every instantiated `δ_t(s)` must bound the concrete prefixes ending in a
/// descendant of `s` that some chain of the graph represents.
pub fn bound_violations(
    search: &TavSearch,
    model: &LogModel,
    h: &AbstractionHierarchy,
    obs: &ObservationSequence,
    links: &[AbstractLink],
    paths: &[Vec<usize>],
) -> Vec<String> {
    let mut out = Vec::new();
    if obs.len() == 1 {
        return out;
    }
    let times = search.used_times();
    for x in paths {
        let count = chain_counts(links, h, x);
        for &t in &times {
            if count[t] == 0 {
                continue;
            }
            let p = prefix_score(model, obs, x, t);
            for (level, state) in search.used_states(t) {
                if h.ancestor(0, x[t], level) == state {
                    let d = search.delta(level, state, t).unwrap();
                    if d < p - TOL {
                        out.push(format!("delta {d} at ({level}, {state}, {t}) below prefix {x:?} ({p})"));
                    }
                }
            }
        }
    }
    out
}
