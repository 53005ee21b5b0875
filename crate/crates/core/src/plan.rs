//! Timed paths, sum-of-costs, conflict validation and schedule compression.

use std::fmt;

use thiserror::Error;

use crate::graph::{Grid, NodeId};
use crate::instance::Instance;

/// Locations of one agent at `t = 0..=T`. Past its end an agent is treated
/// as parked at its final location forever.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path(Vec<NodeId>);

impl Path {
    pub fn new(locations: Vec<NodeId>) -> Self {
        assert!(!locations.is_empty(), "a path has at least one location");
        Path(locations)
    }

    /// Location at `t`, clamped to the final location.
    #[inline]
    pub fn at(&self, t: usize) -> NodeId {
        self.0[t.min(self.0.len() - 1)]
    }

    pub fn first(&self) -> NodeId {
        self.0[0]
    }

    pub fn last(&self) -> NodeId {
        *self.0.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<NodeId> {
        self.0
    }

    /// Earliest timestep after which the agent never leaves its final location.
    pub fn cost(&self) -> usize {
        agent_cost(&self.0)
    }

    fn set_len(&mut self, len: usize) {
        let last = self.last();
        self.0.resize(len, last);
    }
}

impl From<Vec<NodeId>> for Path {
    fn from(v: Vec<NodeId>) -> Self {
        Path::new(v)
    }
}

impl std::ops::Deref for Path {
    type Target = [NodeId];

    fn deref(&self) -> &[NodeId] {
        &self.0
    }
}

/// `T_i`: the earliest `t` with `path[t] = path[t+1] = ... = path[T]`.
pub fn agent_cost(path: &[NodeId]) -> usize {
    let Some(&last) = path.last() else { return 0 };
    let mut t = path.len() - 1;
    while t > 0 && path[t - 1] == last {
        t -= 1;
    }
    t
}

/// One path per agent, all padded to a common horizon equal to the largest
/// agent cost.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Solution {
    paths: Vec<Path>,
}

impl Solution {
    pub fn new(mut paths: Vec<Path>) -> Self {
        let horizon = paths.iter().map(Path::cost).max().unwrap_or(0);
        for p in &mut paths {
            p.set_len(horizon + 1);
        }
        Solution { paths }
    }

    pub fn from_vecs(paths: Vec<Vec<NodeId>>) -> Self {
        Self::new(paths.into_iter().map(Path::new).collect())
    }

    pub fn num_agents(&self) -> usize {
        self.paths.len()
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn path(&self, i: usize) -> &Path {
        &self.paths[i]
    }

    /// Common horizon `T` (the makespan).
    pub fn horizon(&self) -> usize {
        self.paths.first().map_or(0, |p| p.len() - 1)
    }

    pub fn cost(&self, i: usize) -> usize {
        self.paths[i].cost()
    }

    pub fn costs(&self) -> Vec<usize> {
        self.paths.iter().map(Path::cost).collect()
    }

    pub fn sum_of_costs(&self) -> u64 {
        self.paths.iter().map(|p| p.cost() as u64).sum()
    }

    /// Replaces the given agents' paths and re-pads.
    pub fn replace(&mut self, updates: impl IntoIterator<Item = (usize, Path)>) {
        let mut paths = std::mem::take(&mut self.paths);
        for (i, p) in updates {
            paths[i] = p;
        }
        *self = Solution::new(paths);
    }

    /// Configuration (everyone's location) at `t`.
    pub fn config_at(&self, t: usize) -> Vec<NodeId> {
        self.paths.iter().map(|p| p.at(t)).collect()
    }

    /// Extends all paths to `horizon` (no-op if already longer).
    pub fn padded(&self, horizon: usize) -> Vec<Path> {
        self.paths
            .iter()
            .map(|p| {
                let mut q = p.clone();
                if q.len() < horizon + 1 {
                    q.set_len(horizon + 1);
                }
                q
            })
            .collect()
    }

    /// Concatenates `suffix` after this plan's final configuration.
    pub fn concat(&self, suffix: &Solution) -> Solution {
        assert_eq!(self.num_agents(), suffix.num_agents());
        let paths = self
            .paths
            .iter()
            .zip(&suffix.paths)
            .map(|(head, tail)| {
                assert_eq!(head.last(), tail.first(), "suffix must start where the head ends");
                let mut v = head.as_slice().to_vec();
                v.extend_from_slice(&tail.as_slice()[1..]);
                Path::new(v)
            })
            .collect();
        Solution::new(paths)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConflictKind {
    /// Both agents at this node at `t`.
    Vertex(NodeId),
    /// First agent moves `from → to` during `t → t+1` while the second moves back.
    Swap { from: NodeId, to: NodeId },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConflictReport {
    pub kind: ConflictKind,
    pub agents: (usize, usize),
    pub t: usize,
}

impl fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.agents;
        match self.kind {
            ConflictKind::Vertex(v) => write!(f, "vertex conflict: agents {a} and {b} at {v}, t={}", self.t),
            ConflictKind::Swap { from, to } => write!(
                f,
                "swap conflict: agents {a} and {b} on {from}-{to}, t={}..{}",
                self.t,
                self.t + 1
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("expected {expected} paths, found {found}")]
    AgentCount { expected: usize, found: usize },
    #[error("agent {agent} starts at {found}, expected {expected}")]
    WrongStart { agent: usize, expected: NodeId, found: NodeId },
    #[error("agent {agent} ends at {found}, expected {expected}")]
    WrongGoal { agent: usize, expected: NodeId, found: NodeId },
    #[error("agent {agent} jumps {from} -> {to} at t={t}")]
    IllegalMove { agent: usize, t: usize, from: NodeId, to: NodeId },
    #[error("{0}")]
    Conflict(ConflictReport),
}

impl Violation {
    pub fn is_conflict(&self) -> bool {
        matches!(self, Violation::Conflict(_))
    }
}

/// Full solution check: endpoints, legal moves and conflict freedom.
pub fn validate(instance: &Instance, solution: &Solution) -> Result<(), Vec<Violation>> {
    check(instance, solution, true)
}

/// Like [`validate`] but does not require agents to end at their goals;
/// used for horizon-limited plans.
pub fn validate_partial(instance: &Instance, solution: &Solution) -> Result<(), Vec<Violation>> {
    check(instance, solution, false)
}

fn check(instance: &Instance, solution: &Solution, goals: bool) -> Result<(), Vec<Violation>> {
    let n = instance.num_agents();
    if solution.num_agents() != n {
        return Err(vec![Violation::AgentCount {
            expected: n,
            found: solution.num_agents(),
        }]);
    }
    let grid = instance.grid();
    let mut out = Vec::new();
    for (i, p) in solution.paths().iter().enumerate() {
        if p.first() != instance.start(i) {
            out.push(Violation::WrongStart {
                agent: i,
                expected: instance.start(i),
                found: p.first(),
            });
        }
        if goals && p.last() != instance.goal(i) {
            out.push(Violation::WrongGoal {
                agent: i,
                expected: instance.goal(i),
                found: p.last(),
            });
        }
        for t in 0..p.len() - 1 {
            let (u, v) = (p[t], p[t + 1]);
            if u != v && !grid.are_adjacent(u, v) {
                out.push(Violation::IllegalMove {
                    agent: i,
                    t,
                    from: u,
                    to: v,
                });
            }
        }
    }
    out.extend(find_conflicts(grid, solution.paths()).into_iter().map(Violation::Conflict));
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// All vertex and swap conflicts among `paths` (agents parked at their last
/// location after their path ends).
pub fn find_conflicts(grid: &Grid, paths: &[Path]) -> Vec<ConflictReport> {
    let horizon = paths.iter().map(|p| p.len() - 1).max().unwrap_or(0);
    let mut here = vec![u32::MAX; grid.node_count()];
    let mut touched = Vec::with_capacity(paths.len());
    let mut out = Vec::new();
    let fill = |t: usize, here: &mut Vec<u32>, touched: &mut Vec<usize>, out: &mut Vec<ConflictReport>| {
        for &v in touched.iter() {
            here[v] = u32::MAX;
        }
        touched.clear();
        for (i, p) in paths.iter().enumerate() {
            let v = p.at(t);
            match here[v.index()] {
                u32::MAX => {
                    here[v.index()] = i as u32;
                    touched.push(v.index());
                }
                j => out.push(ConflictReport {
                    kind: ConflictKind::Vertex(v),
                    agents: (j as usize, i),
                    t,
                }),
            }
        }
    };
    fill(0, &mut here, &mut touched, &mut out);
    for t in 0..horizon {
        // `here` holds occupancy at t
        for (i, p) in paths.iter().enumerate() {
            let (u, v) = (p.at(t), p.at(t + 1));
            if u == v {
                continue;
            }
            if let Some(j) = Some(here[v.index()]).filter(|&j| j != u32::MAX) {
                let j = j as usize;
                if i < j && paths[j].at(t + 1) == u {
                    out.push(ConflictReport {
                        kind: ConflictKind::Swap { from: u, to: v },
                        agents: (i, j),
                        t,
                    });
                }
            }
        }
        fill(t + 1, &mut here, &mut touched, &mut out);
    }
    out
}

/// Sequential single-agent moves, in execution order.
#[derive(Clone, Debug, Default)]
pub struct MoveLog {
    moves: Vec<(usize, NodeId, NodeId)>,
}

impl MoveLog {
    pub fn push(&mut self, agent: usize, from: NodeId, to: NodeId) {
        self.moves.push((agent, from, to));
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.moves.truncate(len);
    }

    pub fn moves(&self) -> &[(usize, NodeId, NodeId)] {
        &self.moves
    }

    /// One move per timestep.
    pub fn to_solution(&self, starts: &[NodeId]) -> Solution {
        let mut cur = starts.to_vec();
        let mut paths: Vec<Vec<NodeId>> = starts.iter().map(|&s| vec![s]).collect();
        for &(a, from, to) in &self.moves {
            debug_assert_eq!(cur[a], from);
            cur[a] = to;
            for (i, p) in paths.iter_mut().enumerate() {
                p.push(cur[i]);
            }
        }
        Solution::from_vecs(paths)
    }

    /// Executes the log as early as the order of node visits allows.
    pub fn compress(&self, starts: &[NodeId], node_count: usize) -> Solution {
        let mut routes: Vec<Vec<NodeId>> = starts.iter().map(|&s| vec![s]).collect();
        let mut visits: Vec<Vec<(u32, u32)>> = vec![Vec::new(); node_count];
        for (a, &s) in starts.iter().enumerate() {
            visits[s.index()].push((a as u32, 0));
        }
        for &(a, _, to) in &self.moves {
            routes[a].push(to);
            visits[to.index()].push((a as u32, (routes[a].len() - 1) as u32));
        }
        schedule(&routes, &visits).unwrap_or_else(|| self.to_solution(starts))
    }
}

/// Shifts every move as early as possible while keeping, for every node, the
/// order in which agents visit it.
///
/// The result is valid whenever the input is, and no agent finishes later
/// than before, so the sum-of-costs never increases.
pub fn compress(instance: &Instance, solution: &Solution) -> Solution {
    let n = solution.num_agents();
    let mut routes: Vec<Vec<NodeId>> = Vec::with_capacity(n);
    let mut entries: Vec<(usize, usize, usize)> = Vec::new(); // (t, agent, route idx)
    for (a, p) in solution.paths().iter().enumerate() {
        let mut r = vec![p[0]];
        entries.push((0, a, 0));
        for t in 1..p.len() {
            if p[t] != p[t - 1] {
                r.push(p[t]);
                entries.push((t, a, r.len() - 1));
            }
        }
        routes.push(r);
    }
    entries.sort_unstable();
    let mut visits: Vec<Vec<(u32, u32)>> = vec![Vec::new(); instance.grid().node_count()];
    for &(_, a, k) in &entries {
        visits[routes[a][k].index()].push((a as u32, k as u32));
    }
    schedule(&routes, &visits).unwrap_or_else(|| solution.clone())
}

fn schedule(routes: &[Vec<NodeId>], visits: &[Vec<(u32, u32)>]) -> Option<Solution> {
    let n = routes.len();
    // queue position of visit (a, k) within its node's visit list
    let mut slot: Vec<Vec<u32>> = routes.iter().map(|r| vec![0; r.len()]).collect();
    for vs in visits {
        for (pos, &(a, k)) in vs.iter().enumerate() {
            slot[a as usize][k as usize] = pos as u32;
        }
    }
    let mut done = vec![0u32; visits.len()];
    let mut progress = vec![0usize; n];
    let mut paths: Vec<Vec<NodeId>> = routes.iter().map(|r| vec![r[0]]).collect();
    let mut remaining = routes.iter().filter(|r| r.len() > 1).count();
    let mut moving = vec![false; n];
    let mut cand: Vec<usize> = Vec::with_capacity(n);
    while remaining > 0 {
        cand.clear();
        for a in 0..n {
            moving[a] = false;
            let k = progress[a];
            if k + 1 < routes[a].len() {
                let w = routes[a][k + 1].index();
                let pos = slot[a][k + 1];
                if done[w] == pos || (done[w] + 1 == pos && occupant_ready(visits, &progress, w, pos)) {
                    moving[a] = true;
                    cand.push(a);
                }
            }
        }
        // drop movers whose predecessor at the target node does not leave now
        loop {
            let mut changed = false;
            for &a in &cand {
                if !moving[a] {
                    continue;
                }
                let k = progress[a];
                let w = routes[a][k + 1].index();
                let pos = slot[a][k + 1];
                if done[w] != pos {
                    let b = visits[w][pos as usize - 1].0 as usize;
                    if !moving[b] {
                        moving[a] = false;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut any = false;
        for &a in &cand {
            if moving[a] {
                any = true;
                let k = progress[a];
                done[routes[a][k].index()] += 1;
                progress[a] = k + 1;
                if k + 2 == routes[a].len() {
                    remaining -= 1;
                }
            }
        }
        if !any {
            return None;
        }
        for (a, p) in paths.iter_mut().enumerate() {
            p.push(routes[a][progress[a]]);
        }
    }
    Some(Solution::from_vecs(paths))
}

/// Whether the visit just before `pos` at node `w` is currently occupying it.
fn occupant_ready(visits: &[Vec<(u32, u32)>], progress: &[usize], w: usize, pos: u32) -> bool {
    let (b, kb) = visits[w][pos as usize - 1];
    progress[b as usize] == kb as usize
}

/// Text form: one line per agent, `(x,y)` per timestep separated by commas.
pub fn format_solution(grid: &Grid, solution: &Solution) -> String {
    let mut out = String::new();
    for p in solution.paths() {
        let cells: Vec<String> = p
            .iter()
            .map(|&v| {
                let (x, y) = grid.coords(v);
                format!("({x},{y})")
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {msg}")]
pub struct SolutionParseError {
    pub line: usize,
    pub msg: String,
}

pub fn parse_solution(grid: &Grid, text: &str) -> Result<Solution, SolutionParseError> {
    let mut paths = Vec::new();
    for (idx, l) in text.lines().enumerate() {
        let line = idx + 1;
        let l = l.trim();
        if l.is_empty() {
            continue;
        }
        let err = |msg: String| SolutionParseError { line, msg };
        let mut path = Vec::new();
        for cell in l.split("),") {
            let cell = cell.trim().trim_start_matches('(').trim_end_matches(')');
            let (x, y) = cell
                .split_once(',')
                .ok_or_else(|| err(format!("bad cell {cell:?}")))?;
            let x: usize = x.trim().parse().map_err(|_| err(format!("bad x {x:?}")))?;
            let y: usize = y.trim().parse().map_err(|_| err(format!("bad y {y:?}")))?;
            path.push(grid.node_at(x, y).ok_or_else(|| err(format!("({x},{y}) is not passable")))?);
        }
        paths.push(Path::new(path));
    }
    Ok(Solution::new(paths))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;

    fn ids(v: &[u32]) -> Vec<NodeId> {
        v.iter().map(|&x| NodeId(x)).collect()
    }

    #[test]
    fn agent_costs() {
        assert_eq!(agent_cost(&ids(&[4])), 0);
        assert_eq!(agent_cost(&ids(&[4, 4, 4])), 0);
        // v2 v3 v6 v3 v3 with goal v3
        assert_eq!(agent_cost(&ids(&[2, 3, 6, 3, 3])), 3);
        assert_eq!(agent_cost(&ids(&[1, 2, 3, 4, 5])), 4);
    }

    #[test]
    fn padding_invariance() {
        let s = Solution::from_vecs(vec![ids(&[0, 1, 2]), ids(&[5])]);
        assert_eq!(s.horizon(), 2);
        assert_eq!(s.path(1).len(), 3);
        assert_eq!(s.sum_of_costs(), 2);
        let longer = Solution::from_vecs(vec![ids(&[0, 1, 2, 2, 2]), ids(&[5, 5, 5, 5])]);
        assert_eq!(longer, s);
    }

    fn line(n: usize) -> Arc<crate::graph::Grid> {
        Arc::new(crate::graph::Grid::open(n, 1))
    }

    #[test]
    fn detects_swap_and_vertex_conflicts() {
        let g = line(4);
        let inst = Instance::new(g.clone(), ids(&[1, 2]), ids(&[2, 1])).unwrap();
        let s = Solution::from_vecs(vec![ids(&[1, 2]), ids(&[2, 1])]);
        let errs = validate(&inst, &s).unwrap_err();
        assert_eq!(
            errs,
            vec![Violation::Conflict(ConflictReport {
                kind: ConflictKind::Swap {
                    from: NodeId(1),
                    to: NodeId(2)
                },
                agents: (0, 1),
                t: 0
            })]
        );

        let inst = Instance::new(g.clone(), ids(&[0, 2]), ids(&[1, 1 + 2])).unwrap();
        let s = Solution::from_vecs(vec![ids(&[0, 1]), ids(&[2, 1, 3])]);
        let errs = validate(&inst, &s).unwrap_err();
        assert!(errs.contains(&Violation::Conflict(ConflictReport {
            kind: ConflictKind::Vertex(NodeId(1)),
            agents: (0, 1),
            t: 1
        })));
    }

    #[test]
    fn parked_agent_blocks_forever() {
        let g = line(3);
        let inst = Instance::new(g, ids(&[1, 0]), ids(&[1, 2])).unwrap();
        let s = Solution::from_vecs(vec![ids(&[1]), ids(&[0, 0, 1, 2])]);
        assert!(validate(&inst, &s).unwrap_err().iter().all(Violation::is_conflict));
    }

    #[test]
    fn structural_errors_are_distinct() {
        let g = line(4);
        let inst = Instance::new(g, ids(&[0]), ids(&[3])).unwrap();
        let s = Solution::from_vecs(vec![ids(&[1, 3])]);
        let errs = validate(&inst, &s).unwrap_err();
        assert!(errs.iter().any(|e| matches!(e, Violation::WrongStart { .. })));
        assert!(errs.iter().any(|e| matches!(e, Violation::IllegalMove { t: 0, .. })));
        assert!(!errs.iter().any(Violation::is_conflict));
    }

    #[test]
    fn following_is_allowed() {
        let g = line(4);
        let inst = Instance::new(g, ids(&[0, 1]), ids(&[1, 2])).unwrap();
        let s = Solution::from_vecs(vec![ids(&[0, 1]), ids(&[1, 2])]);
        validate(&inst, &s).unwrap();
    }

    #[test]
    fn compress_fixed_point_and_concurrency() {
        let g = Arc::new(crate::graph::Grid::open(4, 2));
        // rows: nodes 0..4 top, 4..8 bottom
        let inst = Instance::new(g.clone(), ids(&[0, 4]), ids(&[3, 7])).unwrap();
        let opt = Solution::from_vecs(vec![ids(&[0, 1, 2, 3]), ids(&[4, 5, 6, 7])]);
        assert_eq!(compress(&inst, &opt), opt);
        let sequential = Solution::from_vecs(vec![
            ids(&[0, 1, 2, 3, 3, 3, 3]),
            ids(&[4, 4, 4, 4, 5, 6, 7]),
        ]);
        validate(&inst, &sequential).unwrap();
        assert_eq!(compress(&inst, &sequential), opt);
    }

    #[test]
    fn compress_keeps_visit_order() {
        let g = line(5);
        // agent 1 must pass node 2 only after agent 0 has left it
        let inst = Instance::new(g, ids(&[1, 0]), ids(&[3, 2])).unwrap();
        let s = Solution::from_vecs(vec![ids(&[1, 1, 2, 3, 3]), ids(&[0, 0, 0, 1, 2])]);
        validate(&inst, &s).unwrap();
        let c = compress(&inst, &s);
        validate(&inst, &c).unwrap();
        assert_eq!(c, Solution::from_vecs(vec![ids(&[1, 2, 3]), ids(&[0, 1, 2])]));
    }

    #[test]
    fn text_round_trip() {
        let g = crate::graph::Grid::open(3, 2);
        let s = Solution::from_vecs(vec![ids(&[0, 1, 4]), ids(&[5, 2])]);
        let text = format_solution(&g, &s);
        assert!(text.starts_with("(0,0),(1,0),(1,1)\n"));
        assert_eq!(parse_solution(&g, &text).unwrap(), s);
    }
}
