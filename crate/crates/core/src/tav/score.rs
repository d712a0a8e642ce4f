use rustc_hash::FxHashMap;

use super::link::{LinkKind, Scope};
use super::Heuristic;
use crate::hierarchy::{AbstractModelStack, AbstractionHierarchy};
use crate::hmm::{LogModel, ObservationSequence, LOG_ZERO};

/// Prefix sums of per-time log-probabilities. Zero probabilities are counted
/// instead of summed so that range sums of finite stretches stay finite.
struct Prefix {
    sum: Vec<f64>,
    zeros: Option<Vec<u32>>,
}

impl Prefix {
    fn new(values: impl Iterator<Item = f64>, len: usize) -> Self {
        let mut sum = Vec::with_capacity(len + 1);
        let mut counts: Vec<u32> = Vec::new();
        let mut acc = 0.0;
        let mut seen = 0u32;
        sum.push(0.0);
        for (t, v) in values.enumerate() {
            if v.is_finite() {
                acc += v;
            } else {
                if counts.is_empty() {
                    counts = vec![0; t + 1];
                }
                seen += 1;
            }
            sum.push(acc);
            if !counts.is_empty() {
                counts.push(seen);
            }
        }
        Self {
            sum,
            zeros: if counts.is_empty() { None } else { Some(counts) },
        }
    }

    /// Sum of the values at times `t1+1..=t2`.
    #[inline]
    fn range(&self, t1: usize, t2: usize) -> f64 {
        if let Some(c) = &self.zeros {
            if c[t2 + 1] != c[t1 + 1] {
                return LOG_ZERO;
            }
        }
        self.sum[t2 + 1] - self.sum[t1 + 1]
    }
}

type ViterbiKey = (u32, u32, u32, u32);

/// Emission ranges up to this span are summed directly instead of building a
/// prefix over the whole sequence.
const DIRECT_SUM_SPAN: usize = 64;

/// Scores abstract links against one observation sequence.
///
/// Emission prefix sums are built lazily per `(level, state)`, so only the
/// states the search actually touches cost `O(T)` memory.
pub struct LinkScorer<'a> {
    stack: &'a AbstractModelStack,
    hierarchy: &'a AbstractionHierarchy,
    obs: &'a ObservationSequence,
    heuristic: Heuristic,
    /// Per level, plus one virtual root entry above the top level.
    emissions: Vec<Vec<Option<Prefix>>>,
    row_max: Vec<Vec<f64>>,
    col_max: Vec<Vec<f64>>,
    /// Best transition out of / into a state from a different sibling.
    exit_max: Vec<Vec<f64>>,
    entry_max: Vec<Vec<f64>>,
    /// Best transition between two different members of a scope, indexed
    /// like `emissions`.
    switch_max: Vec<Vec<f64>>,
    root_self: f64,
    root_emission: Vec<f64>,
    positions: Vec<Vec<u32>>,
    viterbi: FxHashMap<ViterbiKey, Vec<f64>>,
}

impl<'a> LinkScorer<'a> {
    pub fn new(
        stack: &'a AbstractModelStack,
        hierarchy: &'a AbstractionHierarchy,
        obs: &'a ObservationSequence,
        heuristic: Heuristic,
    ) -> Self {
        let top = hierarchy.top_level();
        let mut row_max = Vec::with_capacity(top + 1);
        let mut col_max = Vec::with_capacity(top + 1);
        let mut exit_max = Vec::with_capacity(top + 1);
        let mut entry_max = Vec::with_capacity(top + 1);
        let mut positions = Vec::with_capacity(top + 1);
        for l in 0..=top {
            let m = stack.level(l);
            let n = hierarchy.level_size(l);
            let mut rows = vec![LOG_ZERO; n];
            let mut cols = vec![LOG_ZERO; n];
            let mut exits = vec![LOG_ZERO; n];
            let mut entries = vec![LOG_ZERO; n];
            let mut pos = vec![0u32; n];
            for s in 0..n {
                let scope = Scope::of(hierarchy, l, s);
                for (k, sib) in scope.members(hierarchy, l).enumerate() {
                    rows[s] = rows[s].max(m.transition(s, sib));
                    cols[s] = cols[s].max(m.transition(sib, s));
                    if sib == s {
                        pos[s] = k as u32;
                    } else {
                        exits[s] = exits[s].max(m.transition(s, sib));
                        entries[s] = entries[s].max(m.transition(sib, s));
                    }
                }
            }
            row_max.push(rows);
            col_max.push(cols);
            exit_max.push(exits);
            entry_max.push(entries);
            positions.push(pos);
        }
        let top_model = stack.level(top);
        let root_self = (0..hierarchy.level_size(top))
            .flat_map(|i| top_model.transition_row(i).iter().copied())
            .fold(LOG_ZERO, f64::max);
        let root_emission = (0..top_model.num_symbols())
            .map(|k| {
                (0..hierarchy.level_size(top))
                    .map(|s| top_model.emission(s, k))
                    .fold(LOG_ZERO, f64::max)
            })
            .collect();
        let mut switch_max: Vec<Vec<f64>> = (1..=top).map(|l| vec![LOG_ZERO; hierarchy.level_size(l)]).collect();
        switch_max.insert(0, Vec::new());
        for l in 0..top {
            for (s, &exit) in exit_max[l].iter().enumerate() {
                let p = hierarchy.parent(l, s);
                switch_max[l + 1][p] = switch_max[l + 1][p].max(exit);
            }
        }
        switch_max.push(vec![exit_max[top].iter().copied().fold(LOG_ZERO, f64::max)]);
        let mut emissions: Vec<Vec<Option<Prefix>>> = (0..=top)
            .map(|l| (0..hierarchy.level_size(l)).map(|_| None).collect())
            .collect();
        emissions.push(vec![None]);
        Self {
            stack,
            hierarchy,
            obs,
            heuristic,
            emissions,
            row_max,
            col_max,
            exit_max,
            entry_max,
            switch_max,
            root_self,
            root_emission,
            positions,
            viterbi: FxHashMap::default(),
        }
    }

    pub fn heuristic(&self) -> Heuristic {
        self.heuristic
    }

    fn emission_sum(&mut self, level: usize, state: usize, t1: usize, t2: usize) -> f64 {
        if let Some(p) = &self.emissions[level][state] {
            return p.range(t1, t2);
        }
        if t2 - t1 <= DIRECT_SUM_SPAN {
            let symbols = &self.obs.symbols()[t1 + 1..=t2];
            return if level > self.hierarchy.top_level() {
                symbols.iter().map(|&y| self.root_emission[y]).sum()
            } else {
                let row = self.stack.level(level).emission_row(state);
                symbols.iter().map(|&y| row[y]).sum()
            };
        }
        let symbols = self.obs.symbols();
        let p = if level > self.hierarchy.top_level() {
            Prefix::new(symbols.iter().map(|&y| self.root_emission[y]), symbols.len())
        } else {
            let row = self.stack.level(level).emission_row(state);
            Prefix::new(symbols.iter().map(|&y| row[y]), symbols.len())
        };
        let sum = p.range(t1, t2);
        self.emissions[level][state] = Some(p);
        sum
    }

    fn scope_key(&self, level: usize, scope: Scope) -> (usize, usize) {
        match scope {
            Scope::Root => (self.hierarchy.top_level() + 1, 0),
            Scope::State(p) => (level + 1, p),
        }
    }

    fn scope_self(&self, level: usize, scope: Scope) -> f64 {
        match scope {
            Scope::Root => self.root_self,
            Scope::State(p) => self.stack.level(level + 1).transition(p, p),
        }
    }

    /// Exact score of the direct link `d(s, t1, t2)`.
    pub fn direct(&mut self, level: usize, s: usize, t1: usize, t2: usize) -> f64 {
        let a = self.stack.level(level).transition(s, s);
        if a == LOG_ZERO {
            return LOG_ZERO;
        }
        (t2 - t1) as f64 * a + self.emission_sum(level, s, t1, t2)
    }

    /// Exact score of a single transition `i -> j` into time `t`.
    pub fn step(&self, level: usize, i: usize, j: usize, t: usize) -> f64 {
        let m = self.stack.level(level);
        m.transition(i, j) + m.emission(j, self.obs[t])
    }

    /// Cheap bound for a cross or reentry link with span at least two: the
    /// best exit from `i`, the best scope-internal transition for the middle
    /// steps, the best entry into `j`, and the best scope emission at every
    /// time.
    pub fn cheap_formula(&mut self, level: usize, i: usize, j: usize, t1: usize, t2: usize) -> f64 {
        self.product_bound(level, j, self.row_max[level][i], self.col_max[level][j], t1, t2)
    }

    /// Cheap bound for a cross link that also counts the step at which the
    /// trajectory switches between two different siblings, whether that is
    /// the first, the last or a middle step. Never above
    /// [`LinkScorer::cheap_formula`].
    pub fn cheap_cross(&mut self, level: usize, i: usize, j: usize, t1: usize, t2: usize) -> f64 {
        let span = t2 - t1;
        debug_assert!(span >= 2);
        let scope = Scope::of(self.hierarchy, level, j);
        let (sl, ss) = self.scope_key(level, scope);
        let mid = self.scope_self(level, scope);
        let (row, col) = (self.row_max[level][i], self.col_max[level][j]);
        let first = self.exit_max[level][i] + col;
        let last = row + self.entry_max[level][j];
        let mut best = first.max(last);
        if span > 2 {
            best += (span - 2) as f64 * mid;
            let middle = row + self.switch_max[sl][ss] + col;
            let middle = if span > 3 { middle + (span - 3) as f64 * mid } else { middle };
            best = best.max(middle);
        }
        if best == LOG_ZERO {
            return LOG_ZERO;
        }
        best + self.emission_sum(sl, ss, t1, t2)
    }

    /// Cheap bound for a reentry link that counts the step leaving `j` and
    /// the step returning to it, both to or from a different sibling. A state
    /// without siblings has no such trajectory.
    pub fn cheap_reentry(&mut self, level: usize, j: usize, t1: usize, t2: usize) -> f64 {
        self.product_bound(level, j, self.exit_max[level][j], self.entry_max[level][j], t1, t2)
    }

    fn product_bound(&mut self, level: usize, j: usize, first: f64, last: f64, t1: usize, t2: usize) -> f64 {
        let span = t2 - t1;
        debug_assert!(span >= 2);
        if first == LOG_ZERO || last == LOG_ZERO {
            return LOG_ZERO;
        }
        let scope = Scope::of(self.hierarchy, level, j);
        let (sl, ss) = self.scope_key(level, scope);
        let mut total = first + last;
        if span > 2 {
            total += (span - 2) as f64 * self.scope_self(level, scope);
        }
        total + self.emission_sum(sl, ss, t1, t2)
    }

    /// Exact maximum over trajectories from `i` at `t1` to `j` at `t2` that
    /// stay among the siblings of `j` in between, scored with the level's
    /// abstract parameters. For `i == j` only trajectories that visit another
    /// sibling count.
    pub fn restricted_viterbi(&mut self, level: usize, i: usize, j: usize, t1: usize, t2: usize) -> f64 {
        let key = (level as u32, t1 as u32, t2 as u32, j as u32);
        let pos = self.positions[level][i] as usize;
        if let Some(v) = self.viterbi.get(&key) {
            return v[pos];
        }
        let members: Vec<usize> = Scope::of(self.hierarchy, level, j).members(self.hierarchy, level).collect();
        let mut values = self.backward(level, &members, j, t1, t2);
        values[self.positions[level][j] as usize] = self.leave_and_return(level, &members, j, t1, t2);
        let v = values[pos];
        self.viterbi.insert(key, values);
        v
    }

    /// Best score into `j` at `t2` from every sibling at `t1`.
    fn backward(&self, level: usize, members: &[usize], j: usize, t1: usize, t2: usize) -> Vec<f64> {
        let m = self.stack.level(level);
        let c = members.len();
        let trans = sibling_transitions(m, members);
        let mut beta: Vec<f64> = members.iter().map(|&k| if k == j { 0.0 } else { LOG_ZERO }).collect();
        let mut next = vec![LOG_ZERO; c];
        let mut gain = vec![LOG_ZERO; c];
        for t in (t1 + 1..=t2).rev() {
            let y = self.obs[t];
            for (z, &q) in members.iter().enumerate() {
                gain[z] = m.emission(q, y) + beta[z];
            }
            for (x, out) in next.iter_mut().enumerate() {
                let row = &trans[x * c..(x + 1) * c];
                *out = row.iter().zip(&gain).map(|(w, g)| w + g).fold(LOG_ZERO, f64::max);
            }
            std::mem::swap(&mut beta, &mut next);
        }
        beta
    }

    /// Best score from `j` at `t1` back to `j` at `t2` through some other
    /// sibling.
    fn leave_and_return(&self, level: usize, members: &[usize], j: usize, t1: usize, t2: usize) -> f64 {
        let m = self.stack.level(level);
        let c = members.len();
        let home = members.iter().position(|&k| k == j).expect("j is its own sibling");
        let trans = sibling_transitions(m, members);
        // stayed[x]: never left j so far (only x == home is reachable);
        // left[x]: visited another sibling already
        let mut stayed = 0.0;
        let mut left = vec![LOG_ZERO; c];
        let mut next = vec![LOG_ZERO; c];
        for t in t1 + 1..=t2 {
            let y = self.obs[t];
            for (z, &q) in members.iter().enumerate() {
                let mut best = left
                    .iter()
                    .enumerate()
                    .map(|(x, &d)| d + trans[x * c + z])
                    .fold(LOG_ZERO, f64::max);
                if z != home {
                    best = best.max(stayed + trans[home * c + z]);
                }
                next[z] = best + m.emission(q, y);
            }
            stayed += trans[home * c + home] + m.emission(j, y);
            std::mem::swap(&mut left, &mut next);
        }
        left[home]
    }

    /// Score of a link under the configured heuristic.
    pub fn score(&mut self, kind: LinkKind, level: usize, i: usize, j: usize, t1: usize, t2: usize) -> f64 {
        if t2 - t1 == 1 {
            return self.step(level, i, j, t2);
        }
        match kind {
            LinkKind::Direct => self.direct(level, j, t1, t2),
            LinkKind::Cross => match self.heuristic {
                Heuristic::Cheap => self.cheap_cross(level, i, j, t1, t2),
                Heuristic::Viterbi => self.restricted_viterbi(level, i, j, t1, t2),
            },
            LinkKind::Reentry => match self.heuristic {
                Heuristic::Cheap => self.cheap_reentry(level, j, t1, t2),
                Heuristic::Viterbi => self.restricted_viterbi(level, j, j, t1, t2),
            },
        }
    }
}

fn sibling_transitions(m: &LogModel, members: &[usize]) -> Vec<f64> {
    members
        .iter()
        .flat_map(|&p| members.iter().map(move |&q| m.transition(p, q)))
        .collect()
}
