use rustc_hash::FxHashMap;

use super::link::{AbstractLink, LinkKind, Scope};
use super::TavError;
use crate::hierarchy::AbstractionHierarchy;
use crate::hmm::LOG_ZERO;

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub level: u32,
    pub state: u32,
    pub time: u32,
    pub incoming: Vec<u32>,
    /// Instantiated parent at the same time, if any.
    pub parent: u32,
    /// Number of instantiated children at the same time.
    pub children: u32,
    pub delta: f64,
    /// Link on the best known path into this node.
    pub psi: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Link {
    pub kind: LinkKind,
    pub level: u32,
    pub from: u32,
    pub to: u32,
    pub scope: Option<Scope>,
    pub score: f64,
    pub alive: bool,
}

/// Nodes `(level, state, time)` joined by abstract links.
#[derive(Debug)]
pub(crate) struct Graph {
    pub nodes: Vec<Node>,
    index: FxHashMap<(u32, u32, u32), u32>,
    pub links: Vec<Link>,
    /// Per time, its nodes ordered from the top level down. A time is used
    /// when its column is not empty.
    pub columns: Vec<Vec<u32>>,
}

impl Graph {
    pub fn new(len: usize) -> Self {
        Self {
            nodes: Vec::new(),
            index: FxHashMap::default(),
            links: Vec::new(),
            columns: vec![Vec::new(); len],
        }
    }

    pub fn lookup(&self, level: usize, state: usize, time: usize) -> Option<u32> {
        self.index.get(&(level as u32, state as u32, time as u32)).copied()
    }

    /// Inserts a node that is known to be absent and wires it to its
    /// instantiated parent and children.
    pub fn insert_node(&mut self, h: &AbstractionHierarchy, level: usize, state: usize, time: usize, delta: f64) -> u32 {
        let id = self.nodes.len() as u32;
        let parent = if level < h.top_level() {
            self.lookup(level + 1, h.parent(level, state), time).unwrap_or(NONE)
        } else {
            NONE
        };
        if parent != NONE {
            self.nodes[parent as usize].children += 1;
        }
        let mut children = 0;
        if level > 0 {
            for &c in h.children(level, state) {
                if let Some(k) = self.lookup(level - 1, c, time) {
                    self.nodes[k as usize].parent = id;
                    children += 1;
                }
            }
        }
        self.nodes.push(Node {
            level: level as u32,
            state: state as u32,
            time: time as u32,
            incoming: Vec::with_capacity(4),
            parent,
            children,
            delta,
            psi: NONE,
        });
        self.index.insert((level as u32, state as u32, time as u32), id);
        let nodes = &self.nodes;
        let column = &mut self.columns[time];
        let at = column.partition_point(|&k| nodes[k as usize].level >= level as u32);
        column.insert(at, id);
        id
    }

    /// Live links into `to` that start at time `t1` on the same level.
    pub fn links_over(&self, to: u32, t1: usize) -> Vec<u32> {
        let level = self.nodes[to as usize].level;
        self.nodes[to as usize]
            .incoming
            .iter()
            .copied()
            .filter(|&k| {
                let from = &self.nodes[self.links[k as usize].from as usize];
                from.time == t1 as u32 && from.level == level
            })
            .collect()
    }

    pub fn push_link(&mut self, link: Link) -> u32 {
        let id = self.links.len() as u32;
        self.nodes[link.to as usize].incoming.push(id);
        self.links.push(link);
        id
    }

    pub fn remove_link(&mut self, id: u32) {
        let link = &mut self.links[id as usize];
        debug_assert!(link.alive);
        link.alive = false;
        let incoming = &mut self.nodes[link.to as usize].incoming;
        if let Some(k) = incoming.iter().position(|&x| x == id) {
            incoming.swap_remove(k);
        }
    }

    /// The live link of `kind` from `(from, t1)` to `(to, t2)` at `level`.
    pub fn find_link(&self, kind: LinkKind, level: usize, from: usize, t1: usize, to: usize, t2: usize) -> Option<u32> {
        let src = self.lookup(level, from, t1)?;
        let dst = self.lookup(level, to, t2)?;
        self.nodes[dst as usize]
            .incoming
            .iter()
            .copied()
            .find(|&k| {
                let l = &self.links[k as usize];
                l.from == src && l.kind == kind
            })
    }

    pub fn view(&self, id: u32) -> AbstractLink {
        let l = &self.links[id as usize];
        let a = &self.nodes[l.from as usize];
        let b = &self.nodes[l.to as usize];
        AbstractLink {
            kind: l.kind,
            level: l.level as usize,
            from: a.state as usize,
            t1: a.time as usize,
            to: b.state as usize,
            t2: b.time as usize,
            scope: l.scope,
            log_score: l.score,
        }
    }

    /// Forward sweep over the used times. Returns the best final score and
    /// the links of the corresponding path in time order.
    pub fn best_path(&mut self) -> Result<(f64, Vec<u32>), TavError> {
        let Self {
            nodes, links, columns, ..
        } = self;
        let mut last_time = 0;
        for (t, column) in columns.iter().enumerate().skip(1) {
            if column.is_empty() {
                continue;
            }
            last_time = t;
            for &id in column.iter() {
                let mut best = LOG_ZERO;
                let mut arg = NONE;
                let node = &nodes[id as usize];
                if node.incoming.is_empty() && node.parent == NONE && node.children == 0 {
                    return Err(TavError::Disconnected {
                        level: node.level as usize,
                        state: node.state as usize,
                        time: t,
                    });
                }
                for &k in &node.incoming {
                    let link = &links[k as usize];
                    let v = nodes[link.from as usize].delta + link.score;
                    // a direct link wins exact ties against the bounds
                    if v > best || (v == best && arg != NONE && link.kind == LinkKind::Direct) {
                        best = v;
                        arg = k;
                    }
                }
                let node = &mut nodes[id as usize];
                node.delta = best;
                node.psi = arg;
            }
            for &id in column.iter() {
                let p = nodes[id as usize].parent;
                if p != NONE && nodes[p as usize].delta > nodes[id as usize].delta {
                    let (d, psi) = (nodes[p as usize].delta, nodes[p as usize].psi);
                    let node = &mut nodes[id as usize];
                    node.delta = d;
                    node.psi = psi;
                }
            }
            for &id in column.iter().rev() {
                let p = nodes[id as usize].parent;
                if p != NONE && nodes[p as usize].delta <= nodes[id as usize].delta {
                    let (d, psi) = (nodes[id as usize].delta, nodes[id as usize].psi);
                    let parent = &mut nodes[p as usize];
                    parent.delta = d;
                    parent.psi = psi;
                }
            }
        }
        let mut best = LOG_ZERO;
        let mut end = NONE;
        for &id in &columns[last_time] {
            if end == NONE || nodes[id as usize].delta > best {
                best = nodes[id as usize].delta;
                end = id;
            }
        }
        let mut path = Vec::new();
        if best == LOG_ZERO {
            return Ok((best, path));
        }
        let mut k = nodes[end as usize].psi;
        while k != NONE {
            path.push(k);
            let from = links[k as usize].from;
            if nodes[from as usize].time == 0 {
                break;
            }
            k = nodes[from as usize].psi;
        }
        path.reverse();
        Ok((best, path))
    }
}
