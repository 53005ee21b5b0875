//! Priority inheritance with backtracking: one-step-at-a-time planning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::NodeId;
use crate::instance::Instance;
use crate::plan::Solution;

const NONE: u32 = u32::MAX;

struct Step<'a> {
    instance: &'a Instance,
    now: &'a [NodeId],
    next: Vec<NodeId>,
    decided: Vec<bool>,
    occupied_now: Vec<u32>,
    occupied_next: Vec<u32>,
    rng: &'a mut ChaCha8Rng,
}

impl Step<'_> {
    fn plan(&mut self, a: usize, parent: Option<usize>) -> bool {
        let grid = self.instance.grid();
        let table = grid.distance_table(self.instance.goal(a));
        let here = self.now[a];
        let mut cands: Vec<NodeId> = grid.neighbors(here).to_vec();
        cands.push(here);
        cands.shuffle(self.rng);
        cands.sort_by_key(|&u| (table.raw(u), self.occupied_now[u.index()] != NONE));
        for u in cands {
            if self.occupied_next[u.index()] != NONE {
                continue;
            }
            if parent.is_some_and(|p| self.now[p] == u) {
                continue;
            }
            self.occupied_next[u.index()] = a as u32;
            self.next[a] = u;
            self.decided[a] = true;
            let k = self.occupied_now[u.index()];
            if k != NONE && k as usize != a && !self.decided[k as usize] && !self.plan(k as usize, Some(a)) {
                continue;
            }
            return true;
        }
        self.occupied_next[here.index()] = a as u32;
        self.next[a] = here;
        self.decided[a] = true;
        false
    }
}

/// Runs PIBT for at most `horizon` steps (stopping early once everyone is at
/// its goal). The plan is conflict-free but agents need not end at goals.
pub fn pibt(instance: &Instance, horizon: usize) -> Solution {
    pibt_seeded(instance, horizon, 0)
}

/// [`pibt`] with an explicit seed for tie-breaking among equally good moves.
pub fn pibt_seeded(instance: &Instance, horizon: usize, seed: u64) -> Solution {
    let n = instance.num_agents();
    let vcount = instance.grid().node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths: Vec<Vec<NodeId>> = instance.starts().iter().map(|&s| vec![s]).collect();
    let mut now = instance.starts().to_vec();
    let mut elapsed = vec![0u64; n];
    let mut occupied_now = vec![NONE; vcount];
    let mut occupied_next = vec![NONE; vcount];
    for (a, &v) in now.iter().enumerate() {
        occupied_now[v.index()] = a as u32;
    }
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..horizon {
        if (0..n).all(|a| now[a] == instance.goal(a)) {
            break;
        }
        order.sort_by_key(|&a| (std::cmp::Reverse(elapsed[a]), a));
        let mut step = Step {
            instance,
            now: &now,
            next: now.clone(),
            decided: vec![false; n],
            occupied_now: std::mem::take(&mut occupied_now),
            occupied_next: std::mem::take(&mut occupied_next),
            rng: &mut rng,
        };
        for &a in &order {
            if !step.decided[a] {
                step.plan(a, None);
            }
        }
        let Step {
            next,
            occupied_now: mut on,
            occupied_next: mut onx,
            ..
        } = step;
        for a in 0..n {
            on[now[a].index()] = NONE;
        }
        for a in 0..n {
            on[next[a].index()] = a as u32;
            onx[next[a].index()] = NONE;
            paths[a].push(next[a]);
            elapsed[a] = if next[a] == instance.goal(a) { 0 } else { elapsed[a] + 1 };
        }
        occupied_now = on;
        occupied_next = onx;
        now = next;
    }
    Solution::from_vecs(paths)
}
