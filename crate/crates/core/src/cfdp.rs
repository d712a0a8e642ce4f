//! Coarse-to-fine dynamic programming.
//!
//! Every time step starts with the coarsest states only. Each iteration runs
//! Viterbi over the current trellis, whose single-step link scores come from
//! the abstract models, then replaces every abstract node on the optimal path
//! by its children. The search stops once the optimal path is fully concrete.

use std::time::Instant;

use crate::hierarchy::{validate_hierarchy, AbstractModelStack, AbstractionHierarchy};
use crate::hmm::{check_inputs, path_log_prob, DecodeResult, DecodeStats, HmmError, ObservationSequence, LOG_ZERO};
use crate::record::ExplorationRecord;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub level: usize,
    pub state: usize,
}

/// The working trellis: per time step, a set of possibly abstract states that
/// covers the concrete state space exactly once.
pub struct CfdpTrellis<'a> {
    stack: &'a AbstractModelStack,
    hierarchy: &'a AbstractionHierarchy,
    obs: &'a ObservationSequence,
    /// `ancestors[l][m - l][s]` is the level-`m` ancestor of level-`l` state `s`.
    ancestors: Vec<Vec<Vec<u32>>>,
    columns: Vec<Vec<Cell>>,
    delta: Vec<Vec<f64>>,
    back: Vec<Vec<u32>>,
    record: ExplorationRecord,
    cells: usize,
}

#[derive(Debug, Clone)]
pub struct CfdpTrace {
    /// Optimal-path score of the working trellis at every iteration.
    pub incumbents: Vec<f64>,
    pub record: ExplorationRecord,
}

impl<'a> CfdpTrellis<'a> {
    pub fn new(
        stack: &'a AbstractModelStack,
        hierarchy: &'a AbstractionHierarchy,
        obs: &'a ObservationSequence,
    ) -> Result<Self, Error> {
        validate_hierarchy(hierarchy, stack.concrete().num_states())?;
        if stack.top_level() != hierarchy.top_level() {
            return Err(Error::Hierarchy(crate::hierarchy::HierarchyError::SizeMismatch(
                "model stack and hierarchy differ in depth".into(),
            )));
        }
        check_inputs(stack.concrete(), obs)?;
        let top = hierarchy.top_level();
        let ancestors = (0..=top)
            .map(|l| {
                (l..=top)
                    .map(|m| {
                        (0..hierarchy.level_size(l))
                            .map(|s| hierarchy.ancestor(l, s, m) as u32)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let len = obs.len();
        let top_cells: Vec<Cell> = (0..hierarchy.level_size(top))
            .map(|state| Cell { level: top, state })
            .collect();
        let mut record = ExplorationRecord::new(len);
        for t in 0..len {
            for c in &top_cells {
                record.push(t, c.level, c.state);
            }
        }
        Ok(Self {
            stack,
            hierarchy,
            obs,
            ancestors,
            columns: vec![top_cells.clone(); len],
            delta: vec![Vec::new(); len],
            back: vec![Vec::new(); len],
            record,
            cells: top_cells.len() * len,
        })
    }

    pub fn columns(&self) -> &[Vec<Cell>] {
        &self.columns
    }

    pub fn cells_explored(&self) -> usize {
        self.cells
    }

    /// Viterbi over the working trellis. Returns the optimal score and the
    /// column indices of the optimal path.
    pub fn best_path(&mut self) -> (f64, Vec<usize>) {
        let len = self.obs.len();
        let y0 = self.obs[0];
        self.delta[0] = self.columns[0]
            .iter()
            .map(|c| {
                let m = self.stack.level(c.level);
                m.initial(c.state) + m.emission(c.state, y0)
            })
            .collect();
        for t in 1..len {
            let y = self.obs[t];
            let (done, rest) = self.delta.split_at_mut(t);
            let prev = &done[t - 1];
            let cur = &mut rest[0];
            cur.clear();
            let back = &mut self.back[t];
            back.clear();
            for &to in &self.columns[t] {
                let mut best = LOG_ZERO;
                let mut arg = 0u32;
                for (k, (&from, &d)) in self.columns[t - 1].iter().zip(prev.iter()).enumerate() {
                    let m = from.level.max(to.level);
                    let i = self.ancestors[from.level][m - from.level][from.state] as usize;
                    let j = self.ancestors[to.level][m - to.level][to.state] as usize;
                    let v = d + self.stack.level(m).transition(i, j);
                    if v > best {
                        best = v;
                        arg = k as u32;
                    }
                }
                cur.push(best + self.stack.level(to.level).emission(to.state, y));
                back.push(arg);
            }
        }
        let last = &self.delta[len - 1];
        let mut arg = 0;
        for k in 1..last.len() {
            if last[k] > last[arg] {
                arg = k;
            }
        }
        let score = last[arg];
        let mut path = vec![0usize; len];
        path[len - 1] = arg;
        for t in (1..len).rev() {
            path[t - 1] = self.back[t][path[t]] as usize;
        }
        (score, path)
    }

    /// Replaces every abstract node on `path` by its children. Returns the
    /// number of nodes refined.
    pub fn refine_path(&mut self, path: &[usize]) -> usize {
        let mut refined = 0;
        for (t, &k) in path.iter().enumerate() {
            let cell = self.columns[t][k];
            if cell.level == 0 {
                continue;
            }
            let kids = self.hierarchy.children(cell.level, cell.state);
            let replacement: Vec<Cell> = kids
                .iter()
                .map(|&state| Cell {
                    level: cell.level - 1,
                    state,
                })
                .collect();
            for c in &replacement {
                self.record.push(t, c.level, c.state);
            }
            self.cells += replacement.len();
            self.columns[t].splice(k..=k, replacement);
            refined += 1;
        }
        refined
    }

    /// Checks that each column covers every concrete state exactly once.
    pub fn check_cover(&self) -> bool {
        let n = self.hierarchy.level_size(0);
        self.columns.iter().all(|col| {
            let mut hits = vec![0u8; n];
            for c in col {
                for s in self.hierarchy.descendants(c.level, c.state) {
                    hits[s] += 1;
                }
            }
            hits.iter().all(|&h| h == 1)
        })
    }
}

/// Decodes with CFDP and returns the per-iteration incumbent scores and the
/// exploration record alongside the result.
pub fn cfdp_decode_traced(
    stack: &AbstractModelStack,
    hierarchy: &AbstractionHierarchy,
    obs: &ObservationSequence,
) -> Result<(DecodeResult, CfdpTrace), Error> {
    let start = Instant::now();
    let mut trellis = CfdpTrellis::new(stack, hierarchy, obs)?;
    let mut incumbents = Vec::new();
    let mut stats = DecodeStats::default();
    loop {
        stats.iterations += 1;
        let (score, path) = trellis.best_path();
        incumbents.push(score);
        if score == LOG_ZERO {
            return Err(HmmError::AllPathsImpossible.into());
        }
        if trellis.refine_path(&path) == 0 {
            let states: Vec<usize> = path
                .iter()
                .enumerate()
                .map(|(t, &k)| trellis.columns[t][k].state)
                .collect();
            let log_likelihood = path_log_prob(stack.concrete(), obs, &states);
            stats.cells_explored = trellis.cells;
            stats.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let result = DecodeResult {
                path: states,
                log_likelihood,
                stats,
            };
            let trace = CfdpTrace {
                incumbents,
                record: trellis.record,
            };
            return Ok((result, trace));
        }
        stats.refinements_spatial += 1;
    }
}

pub fn cfdp_decode(
    stack: &AbstractModelStack,
    hierarchy: &AbstractionHierarchy,
    obs: &ObservationSequence,
) -> Result<DecodeResult, Error> {
    cfdp_decode_traced(stack, hierarchy, obs).map(|(r, _)| r)
}
