//! Push and Swap: sequential single-agent moves. Agents walk to their goals
//! one at a time, pushing others aside; when blocked, the two agents travel
//! to a junction and exchange places there.

use std::collections::VecDeque;

use thiserror::Error;

use crate::graph::{Grid, NodeId};
use crate::instance::Instance;
use crate::plan::{MoveLog, Solution};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PushSwapError {
    #[error("need at least two unoccupied vertices, found {0}")]
    TooCrowded(usize),
    #[error("agent {0} could not swap with agent {1} at any junction")]
    NoSwap(usize, usize),
    #[error("gave up after {0} moves")]
    StepLimit(usize),
}

const EMPTY: u32 = u32::MAX;

struct World<'a> {
    grid: &'a Grid,
    pos: Vec<NodeId>,
    occ: Vec<u32>,
    log: MoveLog,
    // BFS scratch
    mark: Vec<u32>,
    stamp: u32,
    parent: Vec<NodeId>,
}

impl<'a> World<'a> {
    fn new(grid: &'a Grid, starts: &[NodeId]) -> Self {
        let mut occ = vec![EMPTY; grid.node_count()];
        for (a, &v) in starts.iter().enumerate() {
            occ[v.index()] = a as u32;
        }
        World {
            grid,
            pos: starts.to_vec(),
            occ,
            log: MoveLog::default(),
            mark: vec![0; grid.node_count()],
            stamp: 0,
            parent: vec![NodeId(0); grid.node_count()],
        }
    }

    fn occupant(&self, v: NodeId) -> Option<usize> {
        let a = self.occ[v.index()];
        (a != EMPTY).then_some(a as usize)
    }

    fn step(&mut self, a: usize, to: NodeId) {
        let from = self.pos[a];
        debug_assert!(self.grid.are_adjacent(from, to));
        debug_assert_eq!(self.occ[to.index()], EMPTY);
        self.occ[from.index()] = EMPTY;
        self.occ[to.index()] = a as u32;
        self.pos[a] = to;
        self.log.push(a, from, to);
    }

    /// BFS from `src` through nodes not in `blocked`; returns the path to the
    /// first node accepted by `stop`.
    fn bfs(&mut self, src: NodeId, blocked: &dyn Fn(NodeId) -> bool, stop: &dyn Fn(&Self, NodeId) -> bool) -> Option<Vec<NodeId>> {
        self.stamp += 1;
        let s = self.stamp;
        self.mark[src.index()] = s;
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            if stop(self, v) {
                let mut path = vec![v];
                let mut x = v;
                while x != src {
                    x = self.parent[x.index()];
                    path.push(x);
                }
                path.reverse();
                return Some(path);
            }
            for i in 0..self.grid.neighbors(v).len() {
                let w = self.grid.neighbors(v)[i];
                if self.mark[w.index()] != s && !blocked(w) {
                    self.mark[w.index()] = s;
                    self.parent[w.index()] = v;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Empties `v` by shifting the agents between it and the nearest free
    /// vertex one step along a path avoiding `blocked`.
    fn clear(&mut self, v: NodeId, blocked: &dyn Fn(NodeId) -> bool) -> bool {
        if self.occupant(v).is_none() {
            return true;
        }
        let Some(path) = self.bfs(v, blocked, &|w: &Self, x| w.occupant(x).is_none()) else {
            return false;
        };
        for i in (0..path.len() - 1).rev() {
            if let Some(a) = self.occupant(path[i]) {
                self.step(a, path[i + 1]);
            }
        }
        true
    }

    fn snapshot(&self) -> (Vec<NodeId>, Vec<u32>, usize) {
        (self.pos.clone(), self.occ.clone(), self.log.len())
    }

    fn restore(&mut self, snap: (Vec<NodeId>, Vec<u32>, usize)) {
        self.pos = snap.0;
        self.occ = snap.1;
        self.log.truncate(snap.2);
    }

    /// Moves the adjacent pair so that `lead` stands on `w` and `follow` right behind.
    fn multipush(&mut self, lead: usize, follow: usize, path: &[NodeId]) -> bool {
        for &x in &path[1..] {
            let (l, f) = (self.pos[lead], self.pos[follow]);
            if !self.clear(x, &|y| y == l || y == f) {
                return false;
            }
            self.step(lead, x);
            self.step(follow, l);
        }
        true
    }

    /// Frees two neighbors of `w` other than `keep`, where `lead` stands on `w`
    /// and `follow` on `keep`.
    fn clear_junction(&mut self, w: NodeId, keep: NodeId, lead: usize, follow: usize) -> Option<(NodeId, NodeId)> {
        let ns: Vec<NodeId> = self.grid.neighbors(w).iter().copied().filter(|&x| x != keep).collect();
        let mut free: Vec<NodeId> = ns.iter().copied().filter(|&x| self.occupant(x).is_none()).collect();
        for &n in &ns {
            if free.len() >= 2 {
                break;
            }
            if free.contains(&n) {
                continue;
            }
            let f2 = free.clone();
            if self.clear(n, &|y| y == w || y == keep || f2.contains(&y)) {
                free.push(n);
                continue;
            }
            // step the pair onto a free neighbor to open up `keep`, then retry
            if let Some(&e) = free.first() {
                let snap = self.snapshot();
                self.step(lead, e);
                self.step(follow, w);
                if self.clear(n, &|y| y == w || y == e) && self.occupant(keep).is_none() {
                    self.step(follow, keep);
                    self.step(lead, w);
                    free.push(n);
                } else {
                    self.restore(snap);
                }
            }
        }
        free.retain(|&x| self.occupant(x).is_none());
        (free.len() >= 2).then(|| (free[0], free[1]))
    }

    /// Exchanges the positions of adjacent agents `r` and `s`; every other
    /// agent ends where it started.
    fn swap(&mut self, r: usize, s: usize, junctions: &[NodeId]) -> bool {
        let mut order: Vec<(u32, NodeId)> = Vec::new();
        let table_r = self.pos[r];
        for &w in junctions {
            if let Some(d) = self.grid.dist(table_r, w) {
                order.push((d, w));
            }
        }
        order.sort_unstable();
        for (_, w) in order {
            let snap = self.snapshot();
            let start = self.log.len();
            let (pr, ps) = (self.pos[r], self.pos[s]);
            let via_r = self.bfs(pr, &|y| y == ps, &|_, x| x == w);
            let via_s = self.bfs(ps, &|y| y == pr, &|_, x| x == w);
            let (lead, follow, path) = match (via_r, via_s) {
                (Some(a), Some(b)) if b.len() < a.len() => (s, r, b),
                (Some(a), _) => (r, s, a),
                (None, Some(b)) => (s, r, b),
                (None, None) => continue,
            };
            if !self.multipush(lead, follow, &path) {
                self.restore(snap);
                continue;
            }
            let keep = self.pos[follow];
            let Some((e1, e2)) = self.clear_junction(w, keep, lead, follow) else {
                self.restore(snap);
                continue;
            };
            let setup: Vec<(usize, NodeId, NodeId)> = self.log.moves()[start..].to_vec();
            self.step(lead, e1);
            self.step(follow, w);
            self.step(follow, e2);
            self.step(lead, w);
            self.step(lead, keep);
            self.step(follow, w);
            for &(a, from, _) in setup.iter().rev() {
                let b = if a == r {
                    s
                } else if a == s {
                    r
                } else {
                    a
                };
                self.step(b, from);
            }
            debug_assert_eq!(self.pos[r], ps);
            debug_assert_eq!(self.pos[s], pr);
            return true;
        }
        false
    }
}

/// Push and Swap. Fails when fewer than two vertices are free, when two
/// agents cannot exchange places at any vertex of degree three or more, or
/// after too many moves.
pub fn push_and_swap(instance: &Instance) -> Result<Solution, PushSwapError> {
    let log = push_and_swap_moves(instance)?;
    Ok(log.to_solution(instance.starts()))
}

/// The raw move sequence produced by [`push_and_swap`].
pub fn push_and_swap_moves(instance: &Instance) -> Result<MoveLog, PushSwapError> {
    let grid = instance.grid();
    let n = instance.num_agents();
    let free = grid.node_count() - n;
    if free < 2 {
        return Err(PushSwapError::TooCrowded(free));
    }
    let junctions: Vec<NodeId> = grid.nodes().filter(|&v| grid.degree(v) >= 3).collect();
    let mut world = World::new(grid, instance.starts());
    let mut locked = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for a in 0..n {
        if world.pos[a] == instance.goal(a) {
            locked[a] = true;
        } else {
            queue.push_back(a);
        }
    }
    let max_moves = 200 * grid.node_count() * n.max(1) + 10_000;
    while let Some(r) = queue.pop_front() {
        if locked[r] {
            continue;
        }
        let goal = instance.goal(r);
        let mut displaced = Vec::new();
        while world.pos[r] != goal {
            if world.log.len() > max_moves {
                return Err(PushSwapError::StepLimit(world.log.len()));
            }
            let here = world.pos[r];
            let mut mask = vec![false; grid.node_count()];
            for a in (0..n).filter(|&a| locked[a]) {
                mask[world.pos[a].index()] = true;
            }
            let route = world
                .bfs(here, &|y| mask[y.index()], &|_, x| x == goal)
                .or_else(|| world.bfs(here, &|_| false, &|_, x| x == goal))
                .expect("goal reachable");
            let v = route[1];
            match world.occupant(v) {
                None => {
                    world.step(r, v);
                    continue;
                }
                Some(s) if !locked[s] => {
                    if world.clear(v, &|y| y == here || mask[y.index()]) {
                        world.step(r, v);
                        continue;
                    }
                }
                Some(_) => {}
            }
            let s = world.occupant(v).unwrap();
            if !world.swap(r, s, &junctions) {
                return Err(PushSwapError::NoSwap(r, s));
            }
            if locked[s] {
                locked[s] = false;
                displaced.push(s);
            }
        }
        locked[r] = true;
        for &s in displaced.iter().rev() {
            queue.push_front(s);
        }
        // agents knocked off their goals by pushes
        for a in 0..n {
            if locked[a] && world.pos[a] != instance.goal(a) {
                locked[a] = false;
                queue.push_front(a);
            }
        }
    }
    Ok(world.log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::validate;
    use std::sync::Arc;

    fn inst(rows: &[&str], pairs: &[((usize, usize), (usize, usize))]) -> Instance {
        Instance::from_coords(Arc::new(Grid::from_rows(rows).unwrap()), pairs).unwrap()
    }

    fn single_moves(s: &Solution) -> bool {
        (0..s.horizon()).all(|t| (0..s.num_agents()).filter(|&a| s.path(a)[t] != s.path(a)[t + 1]).count() <= 1)
    }

    #[test]
    fn lone_agent_takes_shortest_path() {
        let i = inst(&["....", "....", "...."], &[((0, 0), (3, 2))]);
        let s = push_and_swap(&i).unwrap();
        assert_eq!(s.sum_of_costs(), 5);
    }

    #[test]
    fn swap_at_junction() {
        // path graph with one degree-3 junction at (2,0)
        let i = inst(&[".....", "@@.@@", "@@.@@"], &[((1, 0), (3, 0)), ((3, 0), (1, 0))]);
        let s = push_and_swap(&i).unwrap();
        validate(&i, &s).unwrap();
        assert!(single_moves(&s));
    }

    #[test]
    fn no_junction_fails() {
        let i = inst(&["....."], &[((0, 0), (4, 0)), ((4, 0), (0, 0))]);
        assert_eq!(push_and_swap(&i), Err(PushSwapError::NoSwap(0, 1)));
    }

    #[test]
    fn too_crowded_fails() {
        let i = inst(&["..."], &[((0, 0), (1, 0)), ((1, 0), (0, 0))]);
        assert_eq!(push_and_swap(&i), Err(PushSwapError::TooCrowded(1)));
    }

    #[test]
    fn dense_random_instances_validate() {
        let g = Arc::new(Grid::open(5, 5));
        for seed in 0..30 {
            let i = crate::instance::random_instance(g.clone(), 15, seed).unwrap();
            let s = push_and_swap(&i).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
            validate(&i, &s).unwrap();
            assert!(single_moves(&s));
        }
    }
}
