//! Space-time indexes of planned paths: hard obstacles for frozen agents,
//! soft conflict counts for tie-breaking, and CBS constraints.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::graph::NodeId;
use crate::plan::{Path, Solution};

pub const FOREVER: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Stay {
    from: u32,
    to: u32,
    agent: u32,
}

/// Per-node list of `[from, to]` time intervals during which an agent sits
/// there. The final stay of every path lasts forever.
#[derive(Clone, Debug)]
pub struct Occupancy {
    stays: Vec<Vec<Stay>>,
    parked_from: Vec<Option<u32>>,
}

impl Occupancy {
    pub fn new(node_count: usize, num_agents: usize) -> Self {
        Occupancy {
            stays: vec![Vec::new(); node_count],
            parked_from: vec![None; num_agents],
        }
    }

    pub fn from_solution(node_count: usize, solution: &Solution) -> Self {
        let mut occ = Self::new(node_count, solution.num_agents());
        for (a, p) in solution.paths().iter().enumerate() {
            occ.insert(a, p);
        }
        occ
    }

    pub fn num_agents(&self) -> usize {
        self.parked_from.len()
    }

    /// Time from which `agent` stays at its final location, if indexed.
    pub fn parked_from(&self, agent: usize) -> Option<u32> {
        self.parked_from[agent]
    }

    pub fn insert(&mut self, agent: usize, path: &Path) {
        debug_assert!(self.parked_from[agent].is_none(), "agent {agent} indexed twice");
        let cost = path.cost();
        let mut t0 = 0;
        for t in 1..=cost {
            if path[t] != path[t - 1] {
                self.push(path[t - 1], t0 as u32, t as u32 - 1, agent);
                t0 = t;
            }
        }
        self.push(path[cost], t0 as u32, FOREVER, agent);
        self.parked_from[agent] = Some(cost as u32);
    }

    pub fn remove(&mut self, agent: usize, path: &Path) {
        let a = agent as u32;
        let mut seen = FxHashSet::default();
        for &v in path.iter() {
            if seen.insert(v) {
                self.stays[v.index()].retain(|s| s.agent != a);
            }
        }
        self.parked_from[agent] = None;
    }

    pub fn replace(&mut self, agent: usize, old: &Path, new: &Path) {
        self.remove(agent, old);
        self.insert(agent, new);
    }

    fn push(&mut self, v: NodeId, from: u32, to: u32, agent: usize) {
        self.stays[v.index()].push(Stay {
            from,
            to,
            agent: agent as u32,
        });
    }

    /// Agents at `v` at time `t`.
    pub fn occupants(&self, v: NodeId, t: u32) -> impl Iterator<Item = usize> + '_ {
        self.stays[v.index()]
            .iter()
            .filter(move |s| s.from <= t && t <= s.to)
            .map(|s| s.agent as usize)
    }

    pub fn is_at(&self, agent: usize, v: NodeId, t: u32) -> bool {
        let a = agent as u32;
        self.stays[v.index()]
            .iter()
            .any(|s| s.agent == a && s.from <= t && t <= s.to)
    }

    /// Agents that would swap with a move `from → to` during `t → t+1`.
    pub fn swappers(&self, from: NodeId, to: NodeId, t: u32) -> impl Iterator<Item = usize> + '_ {
        self.occupants(to, t)
            .filter(move |&b| self.is_at(b, from, t.saturating_add(1)))
    }

    /// Latest time any agent accepted by `keep` is at `v`.
    pub fn last_visit(&self, v: NodeId, keep: impl Fn(usize) -> bool) -> Option<u32> {
        self.stays[v.index()]
            .iter()
            .filter(|s| keep(s.agent as usize))
            .map(|s| s.to)
            .max()
    }
}

/// Hard space-time obstacles for a single-agent search.
pub trait Obstacles {
    fn vertex_blocked(&self, v: NodeId, t: u32) -> bool;
    /// Whether moving `from → to` during `t → t+1` swaps with an obstacle.
    fn edge_blocked(&self, from: NodeId, to: NodeId, t: u32) -> bool;
    /// Latest blocked time at `v` (`FOREVER` if permanent).
    fn last_blocked(&self, v: NodeId) -> Option<u32>;
    /// No obstacle moves after this time.
    fn settle_time(&self) -> u32;
}

pub struct NoObstacles;

impl Obstacles for NoObstacles {
    fn vertex_blocked(&self, _: NodeId, _: u32) -> bool {
        false
    }
    fn edge_blocked(&self, _: NodeId, _: NodeId, _: u32) -> bool {
        false
    }
    fn last_blocked(&self, _: NodeId) -> Option<u32> {
        None
    }
    fn settle_time(&self) -> u32 {
        0
    }
}

/// Indexed paths of every agent not marked in `free`.
pub struct FixedObstacles<'a> {
    occ: &'a Occupancy,
    free: &'a [bool],
    settle: u32,
}

impl<'a> FixedObstacles<'a> {
    pub fn new(occ: &'a Occupancy, free: &'a [bool]) -> Self {
        let settle = (0..occ.num_agents())
            .filter(|&a| !free[a])
            .filter_map(|a| occ.parked_from(a))
            .max()
            .unwrap_or(0);
        FixedObstacles { occ, free, settle }
    }
}

impl Obstacles for FixedObstacles<'_> {
    fn vertex_blocked(&self, v: NodeId, t: u32) -> bool {
        self.occ.occupants(v, t).any(|a| !self.free[a])
    }
    fn edge_blocked(&self, from: NodeId, to: NodeId, t: u32) -> bool {
        self.occ.swappers(from, to, t).any(|a| !self.free[a])
    }
    fn last_blocked(&self, v: NodeId) -> Option<u32> {
        self.occ.last_visit(v, |a| !self.free[a])
    }
    fn settle_time(&self) -> u32 {
        self.settle
    }
}

/// Paths used to count soft conflicts during tie-breaking.
#[derive(Default)]
pub struct PathTable {
    vertices: FxHashMap<(NodeId, u32), u32>,
    moves: FxHashMap<(NodeId, NodeId, u32), u32>,
    parked: FxHashMap<NodeId, Vec<u32>>,
    settle: u32,
}

impl PathTable {
    pub fn new(paths: Vec<&Path>) -> Self {
        let mut tab = PathTable::default();
        for p in paths {
            let end = p.len() - 1;
            for t in 0..end {
                *tab.vertices.entry((p[t], t as u32)).or_default() += 1;
                if p[t] != p[t + 1] {
                    *tab.moves.entry((p[t], p[t + 1], t as u32)).or_default() += 1;
                }
            }
            tab.parked.entry(p.last()).or_default().push(end as u32);
            tab.settle = tab.settle.max(p.cost() as u32);
        }
        tab
    }

    pub fn settle_time(&self) -> u32 {
        self.settle
    }

    /// Conflicts caused by moving `from → to` during `t → t+1`.
    pub fn count(&self, from: NodeId, to: NodeId, t: u32) -> u32 {
        let nt = t + 1;
        let mut n = self.vertices.get(&(to, nt)).copied().unwrap_or(0);
        if let Some(ends) = self.parked.get(&to) {
            n += ends.iter().filter(|&&e| e <= nt).count() as u32;
        }
        if from != to {
            n += self.moves.get(&(to, from, t)).copied().unwrap_or(0);
        }
        n
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// Not at `v` at `t`.
    Vertex { v: NodeId, t: u32 },
    /// No move `from → to` during `t → t+1`.
    Edge { from: NodeId, to: NodeId, t: u32 },
}

/// Negative constraints on one agent.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    vertex: FxHashSet<(NodeId, u32)>,
    edge: FxHashSet<(NodeId, NodeId, u32)>,
    latest: u32,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_iter<'c>(items: impl IntoIterator<Item = &'c Constraint>) -> Self {
        let mut s = Self::new();
        for &c in items {
            s.add(c);
        }
        s
    }

    pub fn add(&mut self, c: Constraint) {
        match c {
            Constraint::Vertex { v, t } => {
                self.vertex.insert((v, t));
                self.latest = self.latest.max(t);
            }
            Constraint::Edge { from, to, t } => {
                self.edge.insert((from, to, t));
                self.latest = self.latest.max(t + 1);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty() && self.edge.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertex.len() + self.edge.len()
    }

    pub fn vertex_forbidden(&self, v: NodeId, t: u32) -> bool {
        !self.vertex.is_empty() && self.vertex.contains(&(v, t))
    }

    pub fn edge_forbidden(&self, from: NodeId, to: NodeId, t: u32) -> bool {
        !self.edge.is_empty() && self.edge.contains(&(from, to, t))
    }

    /// Latest time mentioned by any constraint.
    pub fn latest(&self) -> u32 {
        self.latest
    }

    pub fn last_vertex_at(&self, v: NodeId) -> Option<u32> {
        self.vertex.iter().filter(|(u, _)| *u == v).map(|&(_, t)| t).max()
    }
}
