//! Bounded-suboptimal CBS with focal search at both levels.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};
use std::rc::Rc;

use super::astar::{focal_astar, LowLevel, LowLevelError};
use super::cbs::{all_conflicts, update_conflicts, CbsProblem, CbsResult, PairConflict, SolveError, Tree};
use super::limits::SearchLimits;
use super::occupancy::{ConstraintSet, NoObstacles, PathTable};
use crate::instance::Instance;
use crate::plan::{Path, Solution};

struct ENode {
    paths: Vec<Rc<Path>>,
    lbs: Vec<u32>,
    cost: u64,
    lb: u64,
    conflicts: Vec<PairConflict>,
}

impl CbsProblem<'_> {
    fn plan_focal(
        &self,
        agent: usize,
        constraints: &ConstraintSet,
        soft: &PathTable,
        w: f64,
        limits: &SearchLimits,
    ) -> Result<(Path, u32), LowLevelError> {
        focal_astar(
            &LowLevel {
                grid: self.grid,
                start: self.starts[agent],
                goal: self.goals[agent],
                constraints,
                obstacles: self.obstacles,
                soft: Some(soft),
                max_time: self.max_time,
                limits,
            },
            w,
        )
    }
}

fn others(paths: &[Rc<Path>], skip: usize) -> PathTable {
    PathTable::new(
        paths
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != skip)
            .map(|(_, p)| p.as_ref())
            .collect(),
    )
}

/// ECBS with suboptimality factor `w ≥ 1`: the returned paths cost at most
/// `w` times the optimum. Nodes whose lower bound reaches `upper_bound` are dropped.
pub fn ecbs_search(problem: &CbsProblem, w: f64, upper_bound: Option<u64>, limits: &SearchLimits) -> CbsResult {
    assert!(w >= 1.0, "suboptimality factor must be at least 1");
    let k = problem.starts.len();
    let within = |cost: u64, lb: u64| cost as f64 <= w * lb as f64 + 1e-9;

    let empty = ConstraintSet::new();
    let mut paths: Vec<Rc<Path>> = Vec::with_capacity(k);
    let mut lbs = Vec::with_capacity(k);
    for a in 0..k {
        let soft = PathTable::new(paths.iter().map(|p| p.as_ref()).collect());
        match problem.plan_focal(a, &empty, &soft, w, limits) {
            Ok((p, lb)) => {
                paths.push(Rc::new(p));
                lbs.push(lb);
            }
            Err(LowLevelError::Infeasible) => return CbsResult::RootInfeasible(a),
            Err(LowLevelError::Aborted) => return CbsResult::Aborted,
        }
    }
    let cost: u64 = paths.iter().map(|p| p.cost() as u64).sum();
    let lb: u64 = lbs.iter().map(|&x| x as u64).sum();
    if upper_bound.is_some_and(|ub| lb >= ub) {
        return CbsResult::Bounded;
    }
    let mut conflicts = all_conflicts(&paths);
    conflicts.sort_by_key(|c| (c.t, c.a, c.b));
    let mut tree = Tree::new();
    let mut nodes: Vec<Option<ENode>> = vec![Some(ENode {
        paths,
        lbs,
        cost,
        lb,
        conflicts,
    })];
    let mut in_focal = vec![true];
    let mut open: BTreeSet<(u64, usize)> = BTreeSet::new();
    open.insert((lb, 0));
    let mut focal = BinaryHeap::new();
    focal.push(Reverse((nodes[0].as_ref().unwrap().conflicts.len(), cost, 0usize)));
    let mut bound_lb = lb;
    let mut expanded = 0u64;

    loop {
        let Some(&(lowest, _)) = open.first() else {
            return if upper_bound.is_some() {
                CbsResult::Bounded
            } else {
                CbsResult::Infeasible
            };
        };
        if lowest > bound_lb {
            bound_lb = lowest;
            for &(_, id) in &open {
                let n = nodes[id].as_ref().unwrap();
                if !in_focal[id] && within(n.cost, bound_lb) {
                    in_focal[id] = true;
                    focal.push(Reverse((n.conflicts.len(), n.cost, id)));
                }
            }
        }
        let Some(Reverse((_, _, id))) = focal.pop() else {
            return CbsResult::Infeasible;
        };
        let Some(node) = nodes[id].take() else { continue };
        open.remove(&(node.lb, id));
        if limits.expired() || limits.nodes_exhausted(expanded) {
            return CbsResult::Aborted;
        }
        if node.conflicts.is_empty() {
            return CbsResult::Solved(node.paths.iter().map(|p| p.as_ref().clone()).collect());
        }
        expanded += 1;
        let chosen = node.conflicts[0];
        for agent in [chosen.a, chosen.b] {
            let child = tree.push(id, agent, chosen.constraint_for(agent));
            nodes.push(None);
            in_focal.push(false);
            let cs = tree.constraints(child, agent);
            let soft = others(&node.paths, agent);
            let (path, plb) = match problem.plan_focal(agent, &cs, &soft, w, limits) {
                Ok(r) => r,
                Err(LowLevelError::Infeasible) => continue,
                Err(LowLevelError::Aborted) => return CbsResult::Aborted,
            };
            let mut paths = node.paths.clone();
            let mut lbs = node.lbs.clone();
            let plb = plb.max(lbs[agent]);
            let cost = node.cost - paths[agent].cost() as u64 + path.cost() as u64;
            let lb = node.lb - lbs[agent] as u64 + plb as u64;
            if upper_bound.is_some_and(|ub| lb >= ub) {
                continue;
            }
            paths[agent] = Rc::new(path);
            lbs[agent] = plb;
            let conflicts = update_conflicts(&node.conflicts, &paths, agent);
            open.insert((lb, child));
            if within(cost, bound_lb) {
                in_focal[child] = true;
                focal.push(Reverse((conflicts.len(), cost, child)));
            }
            nodes[child] = Some(ENode {
                paths,
                lbs,
                cost,
                lb,
                conflicts,
            });
        }
    }
}

/// Solution of the whole instance costing at most `w` times the optimum.
pub fn ecbs(instance: &Instance, w: f64, limits: &SearchLimits) -> Result<Solution, SolveError> {
    let grid = instance.grid();
    let problem = CbsProblem {
        grid,
        starts: instance.starts(),
        goals: instance.goals(),
        obstacles: &NoObstacles,
        max_time: instance.lower_bound() as u32 + grid.node_count() as u32,
    };
    match ecbs_search(&problem, w, None, limits) {
        CbsResult::Solved(paths) => Ok(Solution::new(paths)),
        CbsResult::Aborted => Err(SolveError::Timeout),
        _ => Err(SolveError::Infeasible),
    }
}
