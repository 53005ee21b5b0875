//! Conflict-based search with MDD conflict classification (ICBS), run either
//! on the whole instance or on a subset of agents while the others are frozen.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::rc::Rc;

use super::astar::{space_time_astar, LowLevel, LowLevelError};
use super::limits::SearchLimits;
use super::occupancy::{Constraint, ConstraintSet, FixedObstacles, NoObstacles, Obstacles, Occupancy, PathTable};
use crate::graph::{Grid, NodeId};
use crate::instance::Instance;
use crate::mdd::Mdd;
use crate::plan::{Path, Solution};

/// A group of agents planned jointly around fixed obstacles.
pub struct CbsProblem<'a> {
    pub grid: &'a Grid,
    pub starts: &'a [NodeId],
    pub goals: &'a [NodeId],
    pub obstacles: &'a dyn Obstacles,
    pub max_time: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CbsResult {
    Solved(Vec<Path>),
    /// No conflict-free node costs less than the upper bound.
    Bounded,
    Infeasible,
    /// Agent (local index) has no path even ignoring the other agents.
    RootInfeasible(usize),
    Aborted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CbsStats {
    pub expanded: u64,
    pub generated: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ConflictClass {
    Cardinal,
    SemiCardinal,
    NonCardinal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum PairKind {
    Vertex(NodeId),
    /// Agent `a` moves `.0 → .1` while `b` moves back.
    Edge(NodeId, NodeId),
}

/// Earliest conflict between local agents `a < b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PairConflict {
    pub a: usize,
    pub b: usize,
    pub t: u32,
    pub kind: PairKind,
}

impl PairConflict {
    /// The constraint that resolves this conflict for `agent` (either `a` or `b`).
    pub fn constraint_for(&self, agent: usize) -> Constraint {
        match self.kind {
            PairKind::Vertex(v) => Constraint::Vertex { v, t: self.t },
            PairKind::Edge(u, w) if agent == self.a => Constraint::Edge {
                from: u,
                to: w,
                t: self.t,
            },
            PairKind::Edge(u, w) => Constraint::Edge {
                from: w,
                to: u,
                t: self.t,
            },
        }
    }
}

pub(crate) fn first_conflict(a: usize, p: &Path, b: usize, q: &Path) -> Option<PairConflict> {
    let end = p.len().max(q.len());
    for t in 0..end {
        let (pa, qa) = (p.at(t), q.at(t));
        if pa == qa {
            return Some(PairConflict {
                a,
                b,
                t: t as u32,
                kind: PairKind::Vertex(pa),
            });
        }
        let (pb, qb) = (p.at(t + 1), q.at(t + 1));
        if pa != pb && pa == qb && pb == qa {
            return Some(PairConflict {
                a,
                b,
                t: t as u32,
                kind: PairKind::Edge(pa, pb),
            });
        }
    }
    None
}

pub(crate) fn all_conflicts(paths: &[Rc<Path>]) -> Vec<PairConflict> {
    let mut out = Vec::new();
    for a in 0..paths.len() {
        for b in a + 1..paths.len() {
            out.extend(first_conflict(a, &paths[a], b, &paths[b]));
        }
    }
    out
}

/// Conflicts of `paths` after `agent`'s path changed, reusing `old` for other pairs.
pub(crate) fn update_conflicts(old: &[PairConflict], paths: &[Rc<Path>], agent: usize) -> Vec<PairConflict> {
    let mut out: Vec<PairConflict> = old
        .iter()
        .filter(|c| c.a != agent && c.b != agent)
        .copied()
        .collect();
    for o in 0..paths.len() {
        if o == agent {
            continue;
        }
        let (a, b) = (agent.min(o), agent.max(o));
        out.extend(first_conflict(a, &paths[a], b, &paths[b]));
    }
    out.sort_by_key(|c| (c.t, c.a, c.b));
    out
}

/// Constraint-tree storage shared by the CBS variants.
pub(crate) struct Tree {
    parent: Vec<u32>,
    added: Vec<Option<(usize, Constraint)>>,
}

impl Tree {
    pub fn new() -> Self {
        Tree {
            parent: vec![u32::MAX],
            added: vec![None],
        }
    }

    pub fn push(&mut self, parent: usize, agent: usize, c: Constraint) -> usize {
        self.parent.push(parent as u32);
        self.added.push(Some((agent, c)));
        self.parent.len() - 1
    }

    pub fn constraints(&self, mut node: usize, agent: usize) -> ConstraintSet {
        let mut set = ConstraintSet::new();
        loop {
            if let Some((a, c)) = self.added[node] {
                if a == agent {
                    set.add(c);
                }
            }
            let p = self.parent[node];
            if p == u32::MAX {
                return set;
            }
            node = p as usize;
        }
    }
}

struct CtNode {
    paths: Vec<Rc<Path>>,
    cost: u64,
    conflicts: Vec<PairConflict>,
    mdds: Vec<Option<Rc<Mdd>>>,
}

fn sum_cost(paths: &[Rc<Path>]) -> u64 {
    paths.iter().map(|p| p.cost() as u64).sum()
}

impl CbsProblem<'_> {
    pub(crate) fn plan(
        &self,
        agent: usize,
        constraints: &ConstraintSet,
        soft: &PathTable,
        limits: &SearchLimits,
    ) -> Result<Path, LowLevelError> {
        space_time_astar(&LowLevel {
            grid: self.grid,
            start: self.starts[agent],
            goal: self.goals[agent],
            constraints,
            obstacles: self.obstacles,
            soft: Some(soft),
            max_time: self.max_time,
            limits,
        })
    }

    fn mdd(&self, agent: usize, cost: usize, cs: &ConstraintSet) -> Mdd {
        Mdd::build_filtered(
            self.grid,
            self.starts[agent],
            self.goals[agent],
            cost,
            |v, t| !(self.obstacles.vertex_blocked(v, t as u32) || cs.vertex_forbidden(v, t as u32)),
            |u, w, t| !(self.obstacles.edge_blocked(u, w, t as u32) || cs.edge_forbidden(u, w, t as u32)),
        )
    }

    /// Independently optimal paths, planned in order with earlier ones as soft obstacles.
    pub(crate) fn root_paths(&self, limits: &SearchLimits) -> Result<Vec<Rc<Path>>, CbsResult> {
        let empty = ConstraintSet::new();
        let mut paths: Vec<Rc<Path>> = Vec::with_capacity(self.starts.len());
        for a in 0..self.starts.len() {
            let soft = PathTable::new(paths.iter().map(|p| p.as_ref()).collect());
            match self.plan(a, &empty, &soft, limits) {
                Ok(p) => paths.push(Rc::new(p)),
                Err(LowLevelError::Infeasible) => return Err(CbsResult::RootInfeasible(a)),
                Err(LowLevelError::Aborted) => return Err(CbsResult::Aborted),
            }
        }
        Ok(paths)
    }
}

/// Whether `agent`'s part of the conflict lies on a width-one MDD layer.
fn is_cardinal_for(c: &PairConflict, agent: usize, path: &Path, mdd: &Mdd) -> bool {
    let t = c.t as usize;
    let cost = path.cost();
    match c.kind {
        PairKind::Vertex(v) => t >= cost || mdd.layer(t) == [v],
        PairKind::Edge(u, w) => {
            let (from, to) = if agent == c.a { (u, w) } else { (w, u) };
            t < cost && mdd.layer(t) == [from] && mdd.layer(t + 1) == [to]
        }
    }
}

/// ICBS over the agents of `problem`. Nodes costing `upper_bound` or more are
/// discarded, so `Bounded` means nothing strictly better exists.
pub fn icbs(problem: &CbsProblem, upper_bound: Option<u64>, limits: &SearchLimits) -> (CbsResult, CbsStats) {
    let mut stats = CbsStats::default();
    let k = problem.starts.len();
    let root = match problem.root_paths(limits) {
        Ok(p) => p,
        Err(e) => return (e, stats),
    };
    let cost = sum_cost(&root);
    if upper_bound.is_some_and(|ub| cost >= ub) {
        return (CbsResult::Bounded, stats);
    }
    let mut conflicts = all_conflicts(&root);
    conflicts.sort_by_key(|c| (c.t, c.a, c.b));
    let mut tree = Tree::new();
    let mut nodes: Vec<Option<CtNode>> = vec![Some(CtNode {
        paths: root,
        cost,
        conflicts,
        mdds: vec![None; k],
    })];
    let mut open = BinaryHeap::new();
    open.push(Reverse((cost, nodes[0].as_ref().unwrap().conflicts.len(), 0usize)));
    stats.generated = 1;

    while let Some(Reverse((_, _, id))) = open.pop() {
        if limits.expired() || limits.nodes_exhausted(stats.expanded) {
            return (CbsResult::Aborted, stats);
        }
        let mut node = nodes[id].take().expect("queued nodes are present");
        if node.conflicts.is_empty() {
            let paths = node.paths.iter().map(|p| p.as_ref().clone()).collect();
            return (CbsResult::Solved(paths), stats);
        }
        stats.expanded += 1;
        let (chosen, sides) = choose_conflict(problem, &tree, id, &mut node);
        let mut kids: Vec<(usize, Option<CtNode>)> = Vec::with_capacity(2);
        for (agent, cardinal) in [chosen.a, chosen.b].into_iter().zip(sides) {
            let c = chosen.constraint_for(agent);
            let child = tree.push(id, agent, c);
            if cardinal && upper_bound.is_some_and(|ub| node.cost + 1 >= ub) {
                kids.push((child, None));
                continue;
            }
            let cs = tree.constraints(child, agent);
            let soft = PathTable::new(
                node.paths
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != agent)
                    .map(|(_, p)| p.as_ref())
                    .collect(),
            );
            let path = match problem.plan(agent, &cs, &soft, limits) {
                Ok(p) => p,
                Err(LowLevelError::Infeasible) => {
                    kids.push((child, None));
                    continue;
                }
                Err(LowLevelError::Aborted) => return (CbsResult::Aborted, stats),
            };
            let mut paths = node.paths.clone();
            let cost = node.cost - paths[agent].cost() as u64 + path.cost() as u64;
            paths[agent] = Rc::new(path);
            if upper_bound.is_some_and(|ub| cost >= ub) {
                kids.push((child, None));
                continue;
            }
            let conflicts = update_conflicts(&node.conflicts, &paths, agent);
            let mut mdds = node.mdds.clone();
            mdds[agent] = None;
            kids.push((
                child,
                Some(CtNode {
                    paths,
                    cost,
                    conflicts,
                    mdds,
                }),
            ));
        }
        // bypass: a same-cost child with fewer conflicts replaces the parent
        let bypass = kids.iter().position(|(_, k)| {
            k.as_ref()
                .is_some_and(|k| k.cost == node.cost && k.conflicts.len() < node.conflicts.len())
        });
        if let Some(b) = bypass {
            let better = kids[b].1.take().expect("checked above");
            for _ in &kids {
                nodes.push(None);
            }
            let n = better.conflicts.len();
            nodes[id] = Some(better);
            open.push(Reverse((node.cost, n, id)));
            continue;
        }
        for (child, kid) in kids {
            debug_assert_eq!(nodes.len(), child);
            if let Some(k) = &kid {
                stats.generated += 1;
                open.push(Reverse((k.cost, k.conflicts.len(), child)));
            }
            nodes.push(kid);
        }
    }
    if upper_bound.is_some() {
        (CbsResult::Bounded, stats)
    } else {
        (CbsResult::Infeasible, stats)
    }
}

/// The conflict to split on, preferring cardinal ones, and which of its two
/// agents must pay one more step to resolve it.
fn choose_conflict(problem: &CbsProblem, tree: &Tree, id: usize, node: &mut CtNode) -> (PairConflict, [bool; 2]) {
    let mut best = (node.conflicts[0], [false; 2]);
    let mut best_class = ConflictClass::NonCardinal;
    for i in 0..node.conflicts.len() {
        let c = node.conflicts[i];
        let sides = cardinal_sides(problem, tree, id, node, &c);
        let class = class_of(sides);
        if class < best_class || i == 0 {
            best = (c, sides);
            best_class = class;
        }
        if best_class == ConflictClass::Cardinal {
            break;
        }
    }
    best
}

fn class_of(sides: [bool; 2]) -> ConflictClass {
    match sides {
        [true, true] => ConflictClass::Cardinal,
        [false, false] => ConflictClass::NonCardinal,
        _ => ConflictClass::SemiCardinal,
    }
}

fn cardinal_sides(problem: &CbsProblem, tree: &Tree, id: usize, node: &mut CtNode, c: &PairConflict) -> [bool; 2] {
    let mut out = [false; 2];
    for (k, agent) in [c.a, c.b].into_iter().enumerate() {
        if node.mdds[agent].is_none() {
            let cs = tree.constraints(id, agent);
            let cost = node.paths[agent].cost();
            node.mdds[agent] = Some(Rc::new(problem.mdd(agent, cost, &cs)));
        }
        let mdd = node.mdds[agent].as_ref().unwrap();
        out[k] = is_cardinal_for(c, agent, &node.paths[agent], mdd);
    }
    out
}

#[cfg(test)]
fn classify(problem: &CbsProblem, tree: &Tree, id: usize, node: &mut CtNode, c: &PairConflict) -> ConflictClass {
    class_of(cardinal_sides(problem, tree, id, node, c))
}

/// Result of refining a subset of agents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubsetOutcome<T> {
    Improved(T),
    NoImprovement,
    Aborted,
}

/// Re-plans the agents in `subset` with everyone else frozen as obstacles.
/// `occ` must index every path of `current`. On improvement returns the
/// replaced paths; their total cost is strictly below the incumbent's.
pub fn refine_subset(
    instance: &Instance,
    subset: &[usize],
    current: &Solution,
    occ: &Occupancy,
    limits: &SearchLimits,
    solve: impl Fn(&CbsProblem, Option<u64>, &SearchLimits) -> CbsResult,
) -> SubsetOutcome<Vec<(usize, Path)>> {
    let grid = instance.grid();
    let mut free = vec![false; instance.num_agents()];
    for &a in subset {
        free[a] = true;
    }
    let mut active: Vec<usize> = subset.to_vec();
    loop {
        if active.is_empty() {
            return SubsetOutcome::NoImprovement;
        }
        let incumbent: u64 = active.iter().map(|&a| current.cost(a) as u64).sum();
        let lower: u64 = active.iter().map(|&a| instance.dist(a) as u64).sum();
        if incumbent <= lower {
            return SubsetOutcome::NoImprovement;
        }
        let obstacles = FixedObstacles::new(occ, &free);
        let makespan = active.iter().map(|&a| current.cost(a) as u32).max().unwrap_or(0);
        let starts: Vec<NodeId> = active.iter().map(|&a| instance.start(a)).collect();
        let goals: Vec<NodeId> = active.iter().map(|&a| instance.goal(a)).collect();
        let problem = CbsProblem {
            grid,
            starts: &starts,
            goals: &goals,
            obstacles: &obstacles,
            max_time: obstacles.settle_time().max(makespan) + grid.node_count() as u32,
        };
        match solve(&problem, Some(incumbent), limits) {
            CbsResult::Solved(paths) => {
                let cost: u64 = paths.iter().map(|p| p.cost() as u64).sum();
                if cost < incumbent {
                    return SubsetOutcome::Improved(active.into_iter().zip(paths).collect());
                }
                return SubsetOutcome::NoImprovement;
            }
            CbsResult::Bounded | CbsResult::Infeasible => return SubsetOutcome::NoImprovement,
            CbsResult::RootInfeasible(k) => {
                free[active[k]] = false;
                active.remove(k);
            }
            CbsResult::Aborted => return SubsetOutcome::Aborted,
        }
    }
}

/// ICBS on the agents in `subset` with all others frozen. Returns `current`
/// with the subset's paths replaced when their total cost strictly drops.
pub fn icbs_subset(
    instance: &Instance,
    subset: &[usize],
    current: &Solution,
    limits: &SearchLimits,
) -> SubsetOutcome<Solution> {
    let occ = Occupancy::from_solution(instance.grid().node_count(), current);
    match refine_subset(instance, subset, current, &occ, limits, |p, ub, l| icbs(p, ub, l).0) {
        SubsetOutcome::Improved(paths) => {
            let mut out = current.clone();
            out.replace(paths);
            SubsetOutcome::Improved(out)
        }
        SubsetOutcome::NoImprovement => SubsetOutcome::NoImprovement,
        SubsetOutcome::Aborted => SubsetOutcome::Aborted,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error("search timed out")]
    Timeout,
    #[error("no solution exists")]
    Infeasible,
}

/// Optimal solution of the whole instance.
pub fn icbs_full(instance: &Instance, limits: &SearchLimits) -> Result<Solution, SolveError> {
    let grid = instance.grid();
    let lb = instance.lower_bound() as u32;
    let problem = CbsProblem {
        grid,
        starts: instance.starts(),
        goals: instance.goals(),
        obstacles: &NoObstacles,
        max_time: lb + grid.node_count() as u32,
    };
    match icbs(&problem, None, limits).0 {
        CbsResult::Solved(paths) => Ok(Solution::new(paths)),
        CbsResult::Aborted => Err(SolveError::Timeout),
        _ => Err(SolveError::Infeasible),
    }
}
