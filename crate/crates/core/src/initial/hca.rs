//! Prioritized planning: HCA* and its windowed variant.

use std::cmp::Reverse;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::NodeId;
use crate::instance::Instance;
use crate::plan::{Path, Solution};
use crate::search::{space_time_astar, ConstraintSet, FixedObstacles, LowLevel, Obstacles, Occupancy, SearchLimits};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum PrioritizedError {
    #[error("agent {0} has no path around higher-priority agents")]
    Blocked(usize),
    #[error("not settled after {0} windows")]
    IterationLimit(usize),
    #[error("search aborted")]
    Aborted,
}

/// Agents sorted by decreasing distance to goal (ties by index), or a
/// seeded random permutation.
pub fn default_order(instance: &Instance, seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.num_agents()).collect();
    match seed {
        Some(s) => order.shuffle(&mut ChaCha8Rng::seed_from_u64(s)),
        None => order.sort_by_key(|&a| (Reverse(instance.dist(a)), a)),
    }
    order
}

/// HCA*: agents plan one after another in `order`, each avoiding the paths
/// of those before it (parked at their goals forever after arrival).
pub fn hca(instance: &Instance, order: &[usize]) -> Result<Solution, PrioritizedError> {
    hca_limited(instance, order, &SearchLimits::none())
}

pub fn hca_limited(instance: &Instance, order: &[usize], limits: &SearchLimits) -> Result<Solution, PrioritizedError> {
    let grid = instance.grid();
    let n = instance.num_agents();
    let mut occ = Occupancy::new(grid.node_count(), n);
    let free = vec![false; n];
    let empty = ConstraintSet::new();
    let mut paths: Vec<Option<Path>> = vec![None; n];
    for &a in order {
        let obstacles = FixedObstacles::new(&occ, &free);
        let q = LowLevel {
            grid,
            start: instance.start(a),
            goal: instance.goal(a),
            constraints: &empty,
            obstacles: &obstacles,
            soft: None,
            max_time: obstacles.settle_time() + grid.node_count() as u32,
            limits,
        };
        let p = match space_time_astar(&q) {
            Ok(p) => p,
            Err(crate::search::LowLevelError::Aborted) => return Err(PrioritizedError::Aborted),
            Err(_) => return Err(PrioritizedError::Blocked(a)),
        };
        occ.insert(a, &p);
        paths[a] = Some(p);
    }
    Ok(Solution::new(paths.into_iter().map(|p| p.expect("every agent planned")).collect()))
}

/// WHCA*: cooperative planning over a `window`-step horizon, executed and
/// repeated until everyone rests at its goal. Gives up after `max_windows`
/// windows (default `4 · |V|` via [`whca`]).
pub fn whca(instance: &Instance, window: usize) -> Result<Solution, PrioritizedError> {
    whca_with(instance, window, &default_order(instance, None), 4 * instance.grid().node_count())
}

pub fn whca_with(
    instance: &Instance,
    window: usize,
    order: &[usize],
    max_windows: usize,
) -> Result<Solution, PrioritizedError> {
    assert!(window >= 1, "window must be positive");
    let n = instance.num_agents();
    let mut order = order.to_vec();
    let mut now = instance.starts().to_vec();
    let mut paths: Vec<Vec<NodeId>> = now.iter().map(|&v| vec![v]).collect();
    for _ in 0..max_windows {
        if (0..n).all(|a| now[a] == instance.goal(a)) {
            return Ok(Solution::from_vecs(paths));
        }
        let mut retries = 0;
        let reserved = loop {
            match plan_window(instance, &now, window, &order) {
                Ok(r) => break r,
                Err(a) if retries < n => {
                    // a blocked agent gets top priority from now on
                    retries += 1;
                    order.retain(|&b| b != a);
                    order.insert(0, a);
                }
                Err(a) => return Err(PrioritizedError::Blocked(a)),
            }
        };
        for a in 0..n {
            paths[a].extend_from_slice(&reserved[a][1..]);
            now[a] = *reserved[a].last().unwrap();
        }
    }
    if (0..n).all(|a| now[a] == instance.goal(a)) {
        return Ok(Solution::from_vecs(paths));
    }
    Err(PrioritizedError::IterationLimit(max_windows))
}

/// One window of cooperative plans in `order`, or the first agent left without a plan.
fn plan_window(instance: &Instance, now: &[NodeId], window: usize, order: &[usize]) -> Result<Vec<Vec<NodeId>>, usize> {
    let n = instance.num_agents();
    // reservations: planned agents' moves, and the current cell of agents
    // not yet planned at t = 1
    let mut reserved: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut planned = vec![false; n];
    for &a in order {
        reserved[a] = window_plan(instance, a, now, window, &reserved, &planned).ok_or(a)?;
        planned[a] = true;
    }
    Ok(reserved)
}

/// Best `window`-step plan for `a`: each step costs one unless the agent
/// rests at its goal; the end state adds its distance to the goal.
fn window_plan(
    instance: &Instance,
    a: usize,
    now: &[NodeId],
    window: usize,
    reserved: &[Vec<NodeId>],
    planned: &[bool],
) -> Option<Vec<NodeId>> {
    use std::collections::BinaryHeap;
    let grid = instance.grid();
    let goal = instance.goal(a);
    let table = grid.distance_table(goal);
    let at = |b: usize, t: usize| reserved[b][t.min(reserved[b].len() - 1)];
    let blocked = |from: NodeId, to: NodeId, t: usize| {
        // move during t -> t+1
        (0..now.len()).any(|b| {
            if b == a {
                return false;
            }
            if planned[b] {
                at(b, t + 1) == to || (from != to && at(b, t) == to && at(b, t + 1) == from)
            } else {
                t == 0 && now[b] == to
            }
        })
    };
    // (t, v) -> (g, parent)
    let w = window;
    let vc = grid.node_count();
    let mut best = vec![u32::MAX; (w + 1) * vc];
    let mut parent = vec![u32::MAX; (w + 1) * vc];
    let idx = |t: usize, v: NodeId| t * vc + v.index();
    let mut open = BinaryHeap::new();
    best[idx(0, now[a])] = 0;
    open.push(Reverse((table.raw(now[a]), 0u32, now[a], 0usize)));
    while let Some(Reverse((_, g, v, t))) = open.pop() {
        if g > best[idx(t, v)] {
            continue;
        }
        if t == w {
            let mut out = vec![v];
            let mut k = idx(t, v);
            while parent[k] != u32::MAX {
                k = parent[k] as usize;
                out.push(NodeId((k % vc) as u32));
            }
            out.reverse();
            return Some(out);
        }
        for u in std::iter::once(v).chain(grid.neighbors(v).iter().copied()) {
            if blocked(v, u, t) {
                continue;
            }
            let ng = g + u32::from(!(v == goal && u == goal));
            let k = idx(t + 1, u);
            if ng < best[k] {
                best[k] = ng;
                parent[k] = idx(t, v) as u32;
                open.push(Reverse((ng + table.raw(u), ng, u, t + 1)));
            }
        }
    }
    None
}
