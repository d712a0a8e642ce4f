//! Temporally abstract Viterbi.
//!
//! The search works on a graph of abstract links, each standing for a set of
//! concrete trajectory segments between two time points and scored with an
//! admissible upper bound. Every iteration finds the best path through the
//! graph and refines its abstract links, either spatially (one level down)
//! or temporally (splitting the time interval at its midpoint). When the best
//! path consists of concrete links only it is the Viterbi path.

mod graph;
mod link;
mod score;

use std::rc::Rc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

use crate::hierarchy::{validate_hierarchy, AbstractModelStack, AbstractionHierarchy, HierarchyError};
use crate::hmm::{check_inputs, path_log_prob, DecodeResult, DecodeStats, HmmError, ObservationSequence, LOG_ZERO};
use crate::record::ExplorationRecord;
use crate::Error;
use graph::{Graph, Link};

pub use link::{AbstractLink, LinkKind, Scope};
pub use score::LinkScorer;

/// Upper bound used for abstract cross and reentry links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    /// Products of per-step maxima. Constant time per link.
    #[default]
    Cheap,
    /// Viterbi restricted to the link's sibling set. Tighter and slower.
    Viterbi,
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cheap" => Ok(Heuristic::Cheap),
            "viterbi" => Ok(Heuristic::Viterbi),
            other => Err(format!("unknown heuristic `{other}` (expected cheap or viterbi)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TavOptions {
    pub heuristic: Heuristic,
    /// Number of equal top-level segments to start from; 0 starts from a
    /// single segment.
    pub presegments: usize,
    pub max_iterations: usize,
}

impl Default for TavOptions {
    fn default() -> Self {
        Self {
            heuristic: Heuristic::Cheap,
            presegments: 0,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, ThisError, Clone, PartialEq)]
pub enum TavError {
    #[error("link is already concrete")]
    AlreadyConcrete,
    #[error("interval ({t1}, {t2}) is too short to split")]
    SpanTooShort { t1: usize, t2: usize },
    #[error("node (level {level}, state {state}) at time {time} has no incoming link and no instantiated relative")]
    Disconnected { level: usize, state: usize, time: usize },
    #[error("cannot cut a sequence of length {len} into {segments} segments")]
    BadSegmentCount { segments: usize, len: usize },
    #[error("no concrete path after {0} iterations")]
    IterationCapExceeded(usize),
    #[error("no live link matches {0:?}")]
    UnknownLink(AbstractLink),
    #[error("link structure violated: {0}")]
    Invariant(String),
}

/// Time points at which the top level is cut before the search starts.
///
/// `segments` of 0 means no cuts. Otherwise it must satisfy
/// `2 <= segments < len`.
pub fn presegment_times(len: usize, segments: usize) -> Result<Vec<usize>, TavError> {
    if segments == 0 {
        return Ok(if len > 1 { vec![0, len - 1] } else { vec![0] });
    }
    if segments < 2 || segments >= len {
        return Err(TavError::BadSegmentCount { segments, len });
    }
    Ok((0..=segments).map(|j| j * (len - 1) / segments).collect())
}

/// Midpoint used when splitting the interval `(t1, t2)`.
pub fn split_point(t1: usize, t2: usize) -> usize {
    (t1 + t2).div_ceil(2)
}

/// Best path of the current graph.
#[derive(Debug, Clone)]
pub struct IncumbentPath {
    pub links: Vec<AbstractLink>,
    pub log_score: f64,
    ids: Vec<u32>,
}

impl IncumbentPath {
    pub fn is_concrete(&self) -> bool {
        self.links.iter().all(AbstractLink::is_concrete)
    }
}

#[derive(Debug, Clone)]
pub struct TavTrace {
    /// Best-path score of the graph at every iteration.
    pub incumbents: Vec<f64>,
    pub record: ExplorationRecord,
}

/// A TAV search in progress. [`TavSearch::run`] drives it to completion; the
/// stepping methods expose the intermediate graphs.
pub struct TavSearch<'a> {
    stack: &'a AbstractModelStack,
    hierarchy: &'a AbstractionHierarchy,
    obs: &'a ObservationSequence,
    options: TavOptions,
    scorer: LinkScorer<'a>,
    graph: Graph,
    record: ExplorationRecord,
    stats: DecodeStats,
    incumbents: Vec<f64>,
    started: Instant,
    top_states: Rc<[usize]>,
}

/// Members of a scope, borrowed from the hierarchy where possible.
enum Members<'a> {
    Borrowed(&'a [usize]),
    Shared(Rc<[usize]>),
}

impl std::ops::Deref for Members<'_> {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        match self {
            Members::Borrowed(s) => s,
            Members::Shared(s) => s,
        }
    }
}

impl<'a> TavSearch<'a> {
    /// Validates the inputs and builds the initial graph: the top level at
    /// the segment boundaries, joined by direct, cross and reentry links.
    pub fn new(
        stack: &'a AbstractModelStack,
        hierarchy: &'a AbstractionHierarchy,
        obs: &'a ObservationSequence,
        options: TavOptions,
    ) -> Result<Self, Error> {
        let started = Instant::now();
        validate_hierarchy(hierarchy, stack.concrete().num_states())?;
        if stack.top_level() != hierarchy.top_level() {
            return Err(HierarchyError::SizeMismatch("model stack and hierarchy differ in depth".into()).into());
        }
        check_inputs(stack.concrete(), obs)?;
        let cuts = presegment_times(obs.len(), options.presegments)?;
        let mut search = Self {
            stack,
            hierarchy,
            obs,
            options,
            scorer: LinkScorer::new(stack, hierarchy, obs, options.heuristic),
            graph: Graph::new(obs.len()),
            record: ExplorationRecord::new(obs.len()),
            stats: DecodeStats::default(),
            incumbents: Vec::new(),
            started,
            top_states: (0..hierarchy.level_size(hierarchy.top_level())).collect(),
        };
        let top = hierarchy.top_level();
        for &t in &cuts {
            for s in 0..hierarchy.level_size(top) {
                search.node(top, s, t);
            }
        }
        for w in cuts.windows(2) {
            search.add_scope_links(Scope::Root, top, w[0], w[1])?;
        }
        Ok(search)
    }

    fn members(&self, scope: Scope, level: usize) -> Members<'a> {
        match scope {
            Scope::Root => Members::Shared(self.top_states.clone()),
            Scope::State(p) => Members::Borrowed(self.hierarchy.children(level + 1, p)),
        }
    }

    pub fn options(&self) -> &TavOptions {
        &self.options
    }

    pub fn stats(&self) -> &DecodeStats {
        &self.stats
    }

    pub fn record(&self) -> &ExplorationRecord {
        &self.record
    }

    /// Live links of the graph.
    pub fn links(&self) -> Vec<AbstractLink> {
        (0..self.graph.links.len() as u32)
            .filter(|&k| self.graph.links[k as usize].alive)
            .map(|k| self.graph.view(k))
            .collect()
    }

    pub fn used_times(&self) -> Vec<usize> {
        (0..self.graph.columns.len())
            .filter(|&t| !self.graph.columns[t].is_empty())
            .collect()
    }

    /// Instantiated `(level, state)` pairs at time `t`, top level first.
    pub fn used_states(&self, t: usize) -> Vec<(usize, usize)> {
        self.graph.columns[t]
            .iter()
            .map(|&k| {
                let n = &self.graph.nodes[k as usize];
                (n.level as usize, n.state as usize)
            })
            .collect()
    }

    /// `δ_t(s)` from the most recent [`TavSearch::best_path`] call.
    pub fn delta(&self, level: usize, state: usize, t: usize) -> Option<f64> {
        self.graph.lookup(level, state, t).map(|k| self.graph.nodes[k as usize].delta)
    }

    fn node(&mut self, level: usize, state: usize, t: usize) -> u32 {
        if let Some(k) = self.graph.lookup(level, state, t) {
            return k;
        }
        let delta = if t == 0 {
            let m = self.stack.level(level);
            m.initial(state) + m.emission(state, self.obs[0])
        } else {
            LOG_ZERO
        };
        self.record.push(t, level, state);
        self.stats.cells_explored += 1;
        self.graph.insert_node(self.hierarchy, level, state, t, delta)
    }

    fn add_link(&mut self, kind: LinkKind, from: u32, to: u32, scope: Option<Scope>) -> Result<u32, TavError> {
        let (a, b) = (&self.graph.nodes[from as usize], &self.graph.nodes[to as usize]);
        let (level, i, j) = (a.level as usize, a.state as usize, b.state as usize);
        let (t1, t2) = (a.time as usize, b.time as usize);
        if a.level != b.level || t2 <= t1 {
            return Err(TavError::Invariant(format!(
                "link from level {} time {t1} to level {} time {t2}",
                a.level, b.level
            )));
        }
        let span = t2 - t1;
        let shape_ok = match kind {
            LinkKind::Direct => i == j,
            LinkKind::Reentry => i == j && span > 1,
            LinkKind::Cross => i != j,
        };
        if !shape_ok {
            return Err(TavError::Invariant(format!("{kind:?} link {i} -> {j} over ({t1}, {t2})")));
        }
        // endpoints of a multi-step link share every ancestor
        if span > 1 && level < self.hierarchy.top_level() && self.hierarchy.parent(level, i) != self.hierarchy.parent(level, j) {
            return Err(TavError::Invariant(format!(
                "states {i} and {j} at level {level} have different parents"
            )));
        }
        let score = self.scorer.score(kind, level, i, j, t1, t2);
        self.stats.links_created += 1;
        Ok(self.graph.push_link(Link {
            kind,
            level: level as u32,
            from,
            to,
            scope,
            score,
            alive: true,
        }))
    }

    /// Direct, cross and reentry links among the members of `scope` over
    /// `(t1, t2)`.
    fn add_scope_links(&mut self, scope: Scope, level: usize, t1: usize, t2: usize) -> Result<(), TavError> {
        let members = self.members(scope, level);
        let starts: Vec<u32> = members.iter().map(|&s| self.node(level, s, t1)).collect();
        let ends: Vec<u32> = members.iter().map(|&s| self.node(level, s, t2)).collect();
        for (k, &b) in ends.iter().enumerate() {
            self.add_link(LinkKind::Direct, starts[k], b, Some(scope))?;
            for (r, &a) in starts.iter().enumerate() {
                if r != k {
                    self.add_link(LinkKind::Cross, a, b, Some(scope))?;
                } else if t2 - t1 > 1 {
                    self.add_link(LinkKind::Reentry, a, b, Some(scope))?;
                }
            }
        }
        Ok(())
    }

    fn resolve(&self, link: &AbstractLink) -> Result<u32, TavError> {
        self.graph
            .find_link(link.kind, link.level, link.from, link.t1, link.to, link.t2)
            .ok_or(TavError::UnknownLink(*link))
    }

    /// Runs the forward sweep and returns the best path of the current graph.
    pub fn best_path(&mut self) -> Result<IncumbentPath, Error> {
        if self.obs.len() == 1 {
            return Ok(self.single_step_path());
        }
        let (log_score, ids) = self.graph.best_path()?;
        let links = ids.iter().map(|&k| self.graph.view(k)).collect();
        Ok(IncumbentPath { links, log_score, ids })
    }

    fn single_step_path(&self) -> IncumbentPath {
        let top = self.hierarchy.top_level();
        let log_score = (0..self.hierarchy.level_size(top))
            .filter_map(|s| self.delta(top, s, 0))
            .fold(LOG_ZERO, f64::max);
        IncumbentPath {
            links: Vec::new(),
            log_score,
            ids: Vec::new(),
        }
    }

    /// Replaces the link by the links of its children over the same
    /// interval.
    pub fn spatial_refine(&mut self, link: &AbstractLink) -> Result<(), Error> {
        let id = self.resolve(link)?;
        self.spatial_refine_id(id).map_err(Into::into)
    }

    fn spatial_refine_id(&mut self, id: u32) -> Result<(), TavError> {
        let link = self.graph.view(id);
        if link.level == 0 {
            return Err(TavError::AlreadyConcrete);
        }
        if link.span() > 1 && link.kind != LinkKind::Direct {
            return Err(TavError::Invariant(format!("{:?} link over ({}, {}) cannot be refined spatially", link.kind, link.t1, link.t2)));
        }
        self.graph.remove_link(id);
        self.stats.refinements_spatial += 1;
        let level = link.level - 1;
        if link.span() > 1 {
            return self.add_scope_links(Scope::State(link.from), level, link.t1, link.t2);
        }
        let sources = self.hierarchy.children(link.level, link.from);
        let targets = self.hierarchy.children(link.level, link.to);
        let scope = (link.from == link.to).then_some(Scope::State(link.from));
        let starts: Vec<u32> = sources.iter().map(|&s| self.node(level, s, link.t1)).collect();
        let ends: Vec<u32> = targets.iter().map(|&s| self.node(level, s, link.t2)).collect();
        for (&s, &b) in targets.iter().zip(&ends) {
            for (&r, &a) in sources.iter().zip(&starts) {
                let kind = if r == s { LinkKind::Direct } else { LinkKind::Cross };
                self.add_link(kind, a, b, scope)?;
            }
        }
        Ok(())
    }

    /// Splits the interval of a cross or reentry link at its midpoint, for
    /// the link's whole scope. Returns `false` when the scope was already
    /// split there.
    pub fn temporal_refine(&mut self, link: &AbstractLink) -> Result<bool, Error> {
        self.resolve(link)?;
        let scope = link
            .scope
            .ok_or_else(|| TavError::Invariant("single-step link has no scope".into()))?;
        let split = self.temporal_split(scope, link.level, link.t1, link.t2)?;
        if split {
            self.stats.refinements_temporal += 1;
        }
        Ok(split)
    }

    fn temporal_split(&mut self, scope: Scope, level: usize, t1: usize, t2: usize) -> Result<bool, TavError> {
        if t2 - t1 <= 1 {
            return Err(TavError::SpanTooShort { t1, t2 });
        }
        let members = self.members(scope, level);
        let lookup = |s: usize, t: usize| self.graph.lookup(level, s, t);
        let (Some(first_start), Some(first_end)) = (lookup(members[0], t1), lookup(members[0], t2)) else {
            return Ok(false);
        };
        let unsplit = self.graph.nodes[first_end as usize].incoming.iter().any(|&k| {
            let l = &self.graph.links[k as usize];
            l.from == first_start && l.kind == LinkKind::Reentry
        });
        if !unsplit {
            return Ok(false);
        }
        let missing = || TavError::Invariant(format!("scope {scope:?} lacks nodes at ({t1}, {t2})"));
        let starts: Vec<u32> = members.iter().map(|&s| lookup(s, t1).ok_or_else(missing)).collect::<Result<_, _>>()?;
        let ends: Vec<u32> = members.iter().map(|&s| lookup(s, t2).ok_or_else(missing)).collect::<Result<_, _>>()?;
        let mid = split_point(t1, t2);
        let mids: Vec<u32> = members.iter().map(|&s| self.node(level, s, mid)).collect();
        for (k, &s) in members.iter().enumerate() {
            let over = self.graph.links_over(ends[k], t1);
            let direct = over.iter().copied().find(|&x| self.graph.links[x as usize].kind == LinkKind::Direct);
            if let Some(d) = direct {
                self.graph.remove_link(d);
                self.add_link(LinkKind::Direct, starts[k], mids[k], Some(scope))?;
                self.add_link(LinkKind::Direct, mids[k], ends[k], Some(scope))?;
            } else if level == 0 {
                return Err(TavError::Invariant(format!(
                    "concrete state {s} has no direct link over ({t1}, {t2})"
                )));
            } else {
                self.temporal_split(Scope::State(s), level - 1, t1, t2)?;
            }
            for x in over {
                let link = &self.graph.links[x as usize];
                let kind = link.kind;
                if kind == LinkKind::Direct {
                    continue;
                }
                let r = starts.iter().position(|&a| a == link.from).ok_or_else(|| {
                    TavError::Invariant(format!("link into state {s} over ({t1}, {t2}) leaves its scope"))
                })?;
                self.graph.remove_link(x);
                if r != k || t2 - mid > 1 {
                    self.add_link(kind, mids[r], ends[k], Some(scope))?;
                }
                if r != k || mid - t1 > 1 {
                    self.add_link(kind, starts[r], mids[k], Some(scope))?;
                }
            }
        }
        Ok(true)
    }

    /// Refines every abstract link of `path`. Returns `true` when the path
    /// was already concrete and nothing changed.
    pub fn refine(&mut self, path: &IncumbentPath) -> Result<bool, Error> {
        let mut concrete = true;
        for &id in &path.ids {
            let link = &self.graph.links[id as usize];
            if !link.alive {
                continue;
            }
            let view = self.graph.view(id);
            if view.is_concrete() {
                continue;
            }
            concrete = false;
            if view.kind == LinkKind::Direct || view.span() == 1 {
                self.spatial_refine_id(id)?;
            } else {
                let scope = view.scope.ok_or_else(|| TavError::Invariant("multi-step link has no scope".into()))?;
                if self.temporal_split(scope, view.level, view.t1, view.t2)? {
                    self.stats.refinements_temporal += 1;
                }
            }
        }
        Ok(concrete)
    }

    /// One iteration: best path, then refinement. Returns the concrete path
    /// once the best path needs no refinement.
    pub fn step(&mut self) -> Result<Option<Vec<usize>>, Error> {
        self.stats.iterations += 1;
        if self.stats.iterations > self.options.max_iterations {
            return Err(TavError::IterationCapExceeded(self.options.max_iterations).into());
        }
        let path = self.best_path()?;
        self.incumbents.push(path.log_score);
        if path.log_score == LOG_ZERO {
            return Err(HmmError::AllPathsImpossible.into());
        }
        if self.obs.len() == 1 {
            return Ok(Some(vec![self.best_initial_state()]));
        }
        if self.refine(&path)? {
            return Ok(Some(expand(&path.links, self.obs.len())));
        }
        Ok(None)
    }

    fn best_initial_state(&self) -> usize {
        let m = self.stack.concrete();
        let y = self.obs[0];
        let mut best = 0;
        for s in 1..m.num_states() {
            if m.initial(s) + m.emission(s, y) > m.initial(best) + m.emission(best, y) {
                best = s;
            }
        }
        best
    }

    /// Iterates until the best path is concrete.
    pub fn run(mut self) -> Result<(DecodeResult, TavTrace), Error> {
        let path = loop {
            if let Some(path) = self.step()? {
                break path;
            }
        };
        let mut stats = self.stats;
        stats.wall_ms = self.started.elapsed().as_secs_f64() * 1e3;
        let result = DecodeResult {
            log_likelihood: path_log_prob(self.stack.concrete(), self.obs, &path),
            path,
            stats,
        };
        let trace = TavTrace {
            incumbents: self.incumbents,
            record: self.record,
        };
        Ok((result, trace))
    }
}

/// Concrete state sequence of a path of concrete links.
fn expand(links: &[AbstractLink], len: usize) -> Vec<usize> {
    let mut path = vec![0usize; len];
    if let Some(first) = links.first() {
        path[first.t1] = first.from;
    }
    for l in links {
        for x in &mut path[l.t1 + 1..=l.t2] {
            *x = l.to;
        }
    }
    path
}

/// Decodes with TAV. Equal to [`viterbi_decode`](crate::hmm::viterbi_decode)
/// in log-likelihood.
pub fn tav_decode(
    stack: &AbstractModelStack,
    hierarchy: &AbstractionHierarchy,
    obs: &ObservationSequence,
    options: TavOptions,
) -> Result<DecodeResult, Error> {
    tav_decode_traced(stack, hierarchy, obs, options).map(|(r, _)| r)
}

pub fn tav_decode_traced(
    stack: &AbstractModelStack,
    hierarchy: &AbstractionHierarchy,
    obs: &ObservationSequence,
    options: TavOptions,
) -> Result<(DecodeResult, TavTrace), Error> {
    TavSearch::new(stack, hierarchy, obs, options)?.run()
}
