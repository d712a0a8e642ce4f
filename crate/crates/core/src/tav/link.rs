use serde::{Deserialize, Serialize};

use crate::hierarchy::AbstractionHierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    /// Trajectories that stay inside one state for the whole interval.
    Direct,
    /// Trajectories between two different sibling states.
    Cross,
    /// Trajectories that leave a state and come back to it.
    Reentry,
}

/// The state whose descendants confine a link's intermediate states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    /// Virtual parent of every top-level state.
    Root,
    /// A state one level above the link's endpoints.
    State(usize),
}

impl Scope {
    /// Scope of links between children of `state` (or of the top level).
    pub fn of(h: &AbstractionHierarchy, level: usize, state: usize) -> Self {
        if level == h.top_level() {
            Scope::Root
        } else {
            Scope::State(h.parent(level, state))
        }
    }

    /// States at `level` confined by this scope.
    pub fn members<'h>(&self, h: &'h AbstractionHierarchy, level: usize) -> ScopeMembers<'h> {
        match *self {
            Scope::Root => ScopeMembers::Range(0..h.level_size(level)),
            Scope::State(p) => ScopeMembers::Slice(h.children(level + 1, p).iter()),
        }
    }
}

pub enum ScopeMembers<'h> {
    Range(std::ops::Range<usize>),
    Slice(std::slice::Iter<'h, usize>),
}

impl Iterator for ScopeMembers<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            ScopeMembers::Range(r) => r.next(),
            ScopeMembers::Slice(s) => s.next().copied(),
        }
    }
}

/// A temporally abstract link `((from, t1), (to, t2))` between two states of
/// the same level. Times are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbstractLink {
    pub kind: LinkKind,
    pub level: usize,
    pub from: usize,
    pub t1: usize,
    pub to: usize,
    pub t2: usize,
    /// `None` for single-step links whose endpoints have different parents.
    pub scope: Option<Scope>,
    /// Admissible upper bound on the log-probability of every represented
    /// trajectory segment, counting transitions into and emissions at
    /// `t1+1..=t2`.
    pub log_score: f64,
}

impl AbstractLink {
    pub fn span(&self) -> usize {
        self.t2 - self.t1
    }

    /// Fully refined: a concrete direct link or a concrete single step.
    pub fn is_concrete(&self) -> bool {
        self.level == 0 && (self.kind == LinkKind::Direct || self.span() == 1)
    }

    /// Whether the concrete segment `x_{t1..=t2}` is one of the trajectories
    /// this link stands for.
    pub fn represents(&self, h: &AbstractionHierarchy, segment: &[usize]) -> bool {
        assert_eq!(segment.len(), self.span() + 1);
        let up = |s: usize| h.ancestor(0, s, self.level);
        if up(segment[0]) != self.from || up(*segment.last().unwrap()) != self.to {
            return false;
        }
        if self.span() == 1 {
            return true;
        }
        let inside_scope = match self.scope {
            Some(Scope::State(p)) => segment.iter().all(|&x| h.ancestor(0, x, self.level + 1) == p),
            _ => true,
        };
        if !inside_scope {
            return false;
        }
        let stays = segment.iter().all(|&x| up(x) == self.from);
        match self.kind {
            LinkKind::Direct => stays,
            LinkKind::Reentry => !stays,
            LinkKind::Cross => true,
        }
    }
}
