#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use mapf_ir::plan::validate;
use mapf_ir::{Grid, Instance, NodeId, Path, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn n(i: usize) -> NodeId {
    NodeId(i as u32)
}

pub fn nodes(ids: &[usize]) -> Vec<NodeId> {
    ids.iter().map(|&i| n(i)).collect()
}

pub fn path(ids: &[usize]) -> Path {
    Path::new(nodes(ids))
}

pub fn assert_valid(instance: &Instance, solution: &Solution) {
    if let Err(v) = validate(instance, solution) {
        panic!("invalid solution: {:?}", &v[..v.len().min(3)]);
    }
}

/// Grid with each cell blocked with probability `density`.
pub fn random_grid(w: usize, h: usize, density: f64, seed: u64) -> Arc<Grid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = (0..w * h).map(|_| !rng.gen_bool(density)).collect();
    Arc::new(Grid::from_mask(w, h, mask))
}

pub fn load_map(name: &str) -> Arc<Grid> {
    let p = format!("{}/../../maps/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{p}: {e}"));
    Arc::new(mapf_ir::parse_map(&text).unwrap())
}

/// Optimal sum-of-costs by A* over joint configurations.
///
/// A state is every agent's location plus the set of agents that have
/// committed to staying at their goal forever. Committing is free; every
/// other agent pays 1 per step, so an agent committing at time `t` has
/// cost `t`. Committed agents are obstacles from then on.
pub fn joint_optimum(instance: &Instance, max_states: usize) -> Option<u64> {
    let g = instance.grid();
    let k = instance.num_agents();
    assert!(k <= 8);
    let goals = instance.goals().to_vec();
    let h = |pos: &[NodeId], done: u8| -> u64 {
        (0..k)
            .filter(|&a| done & (1 << a) == 0)
            .map(|a| g.dist(pos[a], goals[a]).unwrap() as u64)
            .sum()
    };
    let full: u8 = ((1u16 << k) - 1) as u8;
    let start = (instance.starts().to_vec(), 0u8);
    let mut best: HashMap<(Vec<NodeId>, u8), u64> = HashMap::new();
    let mut open = BinaryHeap::new();
    best.insert(start.clone(), 0);
    open.push(Reverse((h(&start.0, 0), 0u64, start)));
    while let Some(Reverse((_, cost, (pos, done)))) = open.pop() {
        if best.get(&(pos.clone(), done)).is_some_and(|&c| c < cost) {
            continue;
        }
        if done == full {
            return Some(cost);
        }
        if best.len() > max_states {
            return None;
        }
        // each undone agent: commit (only at goal), wait, or move
        let undone: Vec<usize> = (0..k).filter(|&a| done & (1 << a) == 0).collect();
        let mut choices: Vec<Vec<(NodeId, bool)>> = Vec::new();
        for &a in &undone {
            let mut c = vec![(pos[a], false)];
            if pos[a] == goals[a] {
                c.push((pos[a], true));
            }
            c.extend(g.neighbors(pos[a]).iter().map(|&v| (v, false)));
            choices.push(c);
        }
        let mut pick = vec![0usize; undone.len()];
        'outer: loop {
            let mut next = pos.clone();
            let mut nd = done;
            let mut step = 0u64;
            for (x, &a) in undone.iter().enumerate() {
                let (v, commit) = choices[x][pick[x]];
                next[a] = v;
                if commit {
                    nd |= 1 << a;
                } else {
                    step += 1;
                }
            }
            let ok = (0..k).all(|a| {
                (a + 1..k).all(|b| next[a] != next[b] && !(next[a] == pos[b] && next[b] == pos[a]))
            });
            if ok {
                let c = cost + step;
                let key = (next, nd);
                if best.get(&key).is_none_or(|&old| c < old) {
                    best.insert(key.clone(), c);
                    let f = c + h(&key.0, nd);
                    open.push(Reverse((f, c, key)));
                }
            }
            for x in 0..pick.len() {
                pick[x] += 1;
                if pick[x] < choices[x].len() {
                    continue 'outer;
                }
                pick[x] = 0;
            }
            break;
        }
    }
    None
}

/// All walks with exactly `len` moves from `start` ending at `goal`.
pub fn walks(grid: &Grid, start: NodeId, goal: NodeId, len: usize) -> Vec<Vec<NodeId>> {
    let mut out = Vec::new();
    let mut cur = vec![start];
    fn rec(grid: &Grid, goal: NodeId, len: usize, cur: &mut Vec<NodeId>, out: &mut Vec<Vec<NodeId>>) {
        let here = *cur.last().unwrap();
        let left = len + 1 - cur.len();
        if grid.dist(here, goal).is_none_or(|d| d as usize > left) {
            return;
        }
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        let mut next: Vec<NodeId> = grid.neighbors(here).to_vec();
        next.push(here);
        for v in next {
            cur.push(v);
            rec(grid, goal, len, cur, out);
            cur.pop();
        }
    }
    rec(grid, goal, len, &mut cur, &mut out);
    out
}

/// True when walk `w` (parked at its end afterwards) never collides with `p`.
pub fn compatible(w: &[NodeId], p: &Path) -> bool {
    let at = |t: usize| w[t.min(w.len() - 1)];
    let end = (w.len() - 1).max(p.len() - 1);
    (0..=end).all(|t| at(t) != p.at(t))
        && (0..end).all(|t| !(at(t) == p.at(t + 1) && at(t + 1) == p.at(t)))
}

/// Cheapest cost of `agent` against the fixed paths `others`, by exhaustive
/// walk enumeration up to `max_len` moves.
pub fn brute_best(instance: &Instance, agent: usize, others: &[&Path], max_len: usize) -> Option<usize> {
    let g = instance.grid();
    (0..=max_len).find(|&len| {
        walks(g, instance.start(agent), instance.goal(agent), len)
            .iter()
            .any(|w| others.iter().all(|p| compatible(w, p)))
    })
}

/// The local-minimum gadget: a short side `a1 – x – a2's goal – a1's goal`
/// with a spur at `a2`'s goal, closed into a ring by a path of length `k`.
///
/// Nodes: 0 = a1's goal, 1 = a2's goal, 2 = a2's start, 3 = a1's start,
/// 4 = spur, then the `k - 1` inner nodes of the long side.
pub fn local_minimum_gadget(k: usize) -> (Instance, Solution) {
    assert!(k >= 2);
    let mut edges = vec![(0, 1), (1, 2), (2, 3), (4, 1)];
    let inner: Vec<usize> = (5..5 + k - 1).collect();
    let mut prev = 3;
    for &v in &inner {
        edges.push((prev, v));
        prev = v;
    }
    edges.push((prev, 0));
    let grid = Arc::new(Grid::from_edges(5 + k - 1, &edges));
    let inst = Instance::new(grid, nodes(&[3, 2]), nodes(&[0, 1])).unwrap();
    let mut a1 = vec![3];
    a1.extend(&inner);
    a1.push(0);
    let sol = Solution::new(vec![path(&a1), path(&[2, 1])]);
    (inst, sol)
}

/// The local-repair gadget on `v1..v7` (node `i` is `v_{i+1}`): `a1` goes
/// `v2 → v3`, `a2` goes `v1 → v5`, and `a1` steps off its goal for `a2`.
/// With `long`, the bypass `v6 – v7 – v4` gets one extra node.
pub fn local_repair_gadget(long: bool) -> (Instance, Solution) {
    let mut edges = vec![(0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (2, 5)];
    let count = if long {
        edges.extend([(5, 6), (6, 7), (7, 3)]);
        8
    } else {
        edges.extend([(5, 6), (6, 3)]);
        7
    };
    let grid = Arc::new(Grid::from_edges(count, &edges));
    let inst = Instance::new(grid, nodes(&[1, 0]), nodes(&[2, 4])).unwrap();
    let sol = Solution::new(vec![path(&[1, 2, 5, 2, 2]), path(&[0, 1, 2, 3, 4])]);
    (inst, sol)
}

/// The MDD gadget on `v1..v7` (node `i` is `v_{i+1}`): `a1` goes `v3 → v5`
/// whose only shortest route runs through `v4`, `a2` crosses `v4` at t = 1.
pub fn mdd_gadget() -> (Instance, Solution) {
    let edges = [(0, 1), (1, 2), (1, 3), (2, 3), (3, 4), (3, 6), (4, 5), (5, 6)];
    let grid = Arc::new(Grid::from_edges(7, &edges));
    let inst = Instance::new(grid, nodes(&[2, 6]), nodes(&[4, 0])).unwrap();
    let sol = Solution::new(vec![path(&[2, 2, 3, 4]), path(&[6, 3, 1, 0])]);
    (inst, sol)
}

/// Whether some walk of exactly `c` moves from `start` to `goal`, parked at
/// `goal` afterwards, avoids every path in `others`. Layered reachability
/// over the time-expanded graph.
pub fn feasible_at_cost(grid: &Grid, start: NodeId, goal: NodeId, c: usize, others: &[&Path]) -> bool {
    let horizon = others.iter().map(|p| p.len()).max().unwrap_or(1);
    if others.iter().any(|p| (c..=horizon).any(|t| p.at(t) == goal)) {
        return false;
    }
    let free = |v: NodeId, t: usize| others.iter().all(|p| p.at(t) != v);
    let no_swap = |u: NodeId, v: NodeId, t: usize| others.iter().all(|p| !(p.at(t) == v && p.at(t + 1) == u));
    let mut layer: Vec<NodeId> = if free(start, 0) { vec![start] } else { vec![] };
    for t in 0..c {
        let mut next = Vec::new();
        for &u in &layer {
            let mut cand = grid.neighbors(u).to_vec();
            cand.push(u);
            for v in cand {
                if free(v, t + 1) && no_swap(u, v, t) && !next.contains(&v) {
                    next.push(v);
                }
            }
        }
        layer = next;
    }
    layer.contains(&goal)
}

/// Cheapest cost for `agent` among `others`, searching costs `dist..limit`.
pub fn best_below(instance: &Instance, agent: usize, others: &[&Path], limit: usize) -> Option<usize> {
    (instance.dist(agent) as usize..limit)
        .find(|&c| feasible_at_cost(instance.grid(), instance.start(agent), instance.goal(agent), c, others))
}
