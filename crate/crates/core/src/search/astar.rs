//! Single-agent space-time search under constraints and fixed obstacles.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use rustc_hash::FxHashMap;

use super::limits::SearchLimits;
use super::occupancy::{ConstraintSet, Obstacles, PathTable, FOREVER};
use crate::graph::{Grid, NodeId, UNREACHABLE};
use crate::plan::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LowLevelError {
    Infeasible,
    Aborted,
}

/// One single-agent query.
pub struct LowLevel<'a> {
    pub grid: &'a Grid,
    pub start: NodeId,
    pub goal: NodeId,
    pub constraints: &'a ConstraintSet,
    pub obstacles: &'a dyn Obstacles,
    /// Paths whose conflicts are minimized among equal-cost candidates.
    pub soft: Option<&'a PathTable>,
    /// No state later than this is generated.
    pub max_time: u32,
    pub limits: &'a SearchLimits,
}

struct SNode {
    v: NodeId,
    t: u32,
    h: u32,
    conflicts: u32,
    parent: u32,
}

const CHECK_EVERY: u64 = 1024;

impl LowLevel<'_> {
    /// Earliest time the agent may stop at its goal for good.
    fn goal_free(&self) -> Option<u32> {
        let a = self.obstacles.last_blocked(self.goal);
        let b = self.constraints.last_vertex_at(self.goal);
        match a.max(b) {
            Some(FOREVER) => None,
            Some(t) => Some(t + 1),
            None => Some(0),
        }
    }

    /// After this time the search space repeats, so `t` can be capped in
    /// the duplicate-detection key.
    fn static_time(&self, goal_free: u32) -> u32 {
        let soft = self.soft.map_or(0, |s| s.settle_time());
        self.obstacles
            .settle_time()
            .max(self.constraints.latest())
            .max(soft)
            .max(goal_free)
            + 1
    }

    fn blocked_start(&self) -> bool {
        self.obstacles.vertex_blocked(self.start, 0) || self.constraints.vertex_forbidden(self.start, 0)
    }

    fn allowed(&self, v: NodeId, w: NodeId, t: u32) -> bool {
        let nt = t + 1;
        if self.obstacles.vertex_blocked(w, nt) || self.constraints.vertex_forbidden(w, nt) {
            return false;
        }
        v == w || !(self.obstacles.edge_blocked(v, w, t) || self.constraints.edge_forbidden(v, w, t))
    }

    fn conflicts(&self, v: NodeId, w: NodeId, t: u32) -> u32 {
        self.soft.map_or(0, |s| s.count(v, w, t))
    }
}

fn reconstruct(nodes: &[SNode], mut i: u32) -> Path {
    let mut out = Vec::new();
    loop {
        let n = &nodes[i as usize];
        out.push(n.v);
        if n.parent == u32::MAX {
            break;
        }
        i = n.parent;
    }
    out.reverse();
    Path::new(out)
}

/// Optimal path for one agent: least arrival time after which it can stay
/// at its goal. Ties prefer fewer soft conflicts, then smaller `h`, then
/// smaller node id.
pub fn space_time_astar(q: &LowLevel) -> Result<Path, LowLevelError> {
    let Some(goal_free) = q.goal_free() else {
        return Err(LowLevelError::Infeasible);
    };
    let to_goal = q.grid.distance_table(q.goal);
    if to_goal.raw(q.start) == UNREACHABLE || q.blocked_start() {
        return Err(LowLevelError::Infeasible);
    }
    let t_static = q.static_time(goal_free);
    let h = |v: NodeId, t: u32| to_goal.raw(v).max(goal_free.saturating_sub(t));

    let mut nodes = vec![SNode {
        v: q.start,
        t: 0,
        h: h(q.start, 0),
        conflicts: 0,
        parent: u32::MAX,
    }];
    // state key -> (earliest generated t, expanded)
    let mut seen: FxHashMap<(NodeId, u32), (u32, bool)> = FxHashMap::default();
    seen.insert((q.start, 0), (0, false));
    let mut open = BinaryHeap::new();
    open.push(Reverse((nodes[0].h, 0u32, nodes[0].h, q.start, 0u32)));
    let mut expanded = 0u64;

    while let Some(Reverse((_, _, _, _, idx))) = open.pop() {
        let (v, t) = (nodes[idx as usize].v, nodes[idx as usize].t);
        let key = (v, t.min(t_static));
        let entry = seen.get_mut(&key).expect("generated state");
        if entry.1 || entry.0 < t {
            continue;
        }
        entry.1 = true;
        if v == q.goal && t >= goal_free {
            return Ok(reconstruct(&nodes, idx));
        }
        expanded += 1;
        if expanded % CHECK_EVERY == 0 && q.limits.expired() {
            return Err(LowLevelError::Aborted);
        }
        if t >= q.max_time {
            continue;
        }
        let base = nodes[idx as usize].conflicts;
        for w in std::iter::once(v).chain(q.grid.neighbors(v).iter().copied()) {
            let nt = t + 1;
            let hw = h(w, nt);
            if to_goal.raw(w) == UNREACHABLE || !q.allowed(v, w, t) {
                continue;
            }
            let k = (w, nt.min(t_static));
            match seen.get(&k) {
                Some(&(bt, _)) if bt <= nt => continue,
                _ => {}
            }
            seen.insert(k, (nt, false));
            let c = base + q.conflicts(v, w, t);
            nodes.push(SNode {
                v: w,
                t: nt,
                h: hw,
                conflicts: c,
                parent: idx,
            });
            let id = nodes.len() as u32 - 1;
            open.push(Reverse((nt + hw, c, hw, w, id)));
        }
    }
    Err(LowLevelError::Infeasible)
}

/// Bounded-suboptimal focal search: returns a path of cost at most
/// `w · lb` together with the lower bound `lb` on the optimal cost.
/// Among admissible candidates it expands the one with fewest soft conflicts.
pub fn focal_astar(q: &LowLevel, w: f64) -> Result<(Path, u32), LowLevelError> {
    let Some(goal_free) = q.goal_free() else {
        return Err(LowLevelError::Infeasible);
    };
    let to_goal = q.grid.distance_table(q.goal);
    if to_goal.raw(q.start) == UNREACHABLE || q.blocked_start() {
        return Err(LowLevelError::Infeasible);
    }
    let t_static = q.static_time(goal_free);
    let h = |v: NodeId, t: u32| to_goal.raw(v).max(goal_free.saturating_sub(t));
    let within = |f: u32, fmin: u32| f as f64 <= w * fmin as f64 + 1e-9;

    let mut nodes = vec![SNode {
        v: q.start,
        t: 0,
        h: h(q.start, 0),
        conflicts: 0,
        parent: u32::MAX,
    }];
    let mut best: FxHashMap<(NodeId, u32), u32> = FxHashMap::default();
    best.insert((q.start, 0), 0);
    // (f, h, idx)
    let mut open: BTreeSet<(u32, u32, u32)> = BTreeSet::new();
    // (conflicts, f, h, idx)
    let mut focal: BinaryHeap<Reverse<(u32, u32, u32, u32)>> = BinaryHeap::new();
    let f0 = nodes[0].h;
    open.insert((f0, f0, 0));
    focal.push(Reverse((0, f0, f0, 0)));
    let mut fmin = f0;
    let mut expanded = 0u64;

    loop {
        let Some(&(lowest, _, _)) = open.first() else {
            return Err(LowLevelError::Infeasible);
        };
        if lowest > fmin {
            for &(f, hh, i) in open.range((fmin, 0, 0)..) {
                if within(f, lowest) && !within(f, fmin) {
                    focal.push(Reverse((nodes[i as usize].conflicts, f, hh, i)));
                }
                if !within(f, lowest) {
                    break;
                }
            }
            fmin = lowest;
        }
        let Some(Reverse((_, f, hh, idx))) = focal.pop() else {
            return Err(LowLevelError::Infeasible);
        };
        if !open.remove(&(f, hh, idx)) {
            continue;
        }
        let (v, t) = (nodes[idx as usize].v, nodes[idx as usize].t);
        if best.get(&(v, t.min(t_static))).is_some_and(|&bt| bt < t) {
            continue;
        }
        if v == q.goal && t >= goal_free {
            return Ok((reconstruct(&nodes, idx), fmin));
        }
        expanded += 1;
        if expanded % CHECK_EVERY == 0 && q.limits.expired() {
            return Err(LowLevelError::Aborted);
        }
        if t >= q.max_time {
            continue;
        }
        let base = nodes[idx as usize].conflicts;
        for wv in std::iter::once(v).chain(q.grid.neighbors(v).iter().copied()) {
            let nt = t + 1;
            if to_goal.raw(wv) == UNREACHABLE || !q.allowed(v, wv, t) {
                continue;
            }
            let k = (wv, nt.min(t_static));
            if best.get(&k).is_some_and(|&bt| bt <= nt) {
                continue;
            }
            best.insert(k, nt);
            let hw = h(wv, nt);
            let c = base + q.conflicts(v, wv, t);
            nodes.push(SNode {
                v: wv,
                t: nt,
                h: hw,
                conflicts: c,
                parent: idx,
            });
            let id = nodes.len() as u32 - 1;
            let fw = nt + hw;
            open.insert((fw, hw, id));
            if within(fw, fmin) {
                focal.push(Reverse((c, fw, hw, id)));
            }
        }
    }
}
