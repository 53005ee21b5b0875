//! Multi-valued decision diagrams: the layered DAG of every `(node, t)` an
//! agent can occupy on some path of exactly a given cost.

use rustc_hash::FxHashSet;

use crate::graph::{Grid, NodeId};
use crate::plan::Path;

/// All cost-`c` paths of one agent. `layers[t]` is sorted; `edges[t]` holds
/// the moves (waits included) from layer `t` to layer `t + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mdd {
    start: NodeId,
    goal: NodeId,
    cost: usize,
    layers: Vec<Vec<NodeId>>,
    edges: Vec<Vec<(NodeId, NodeId)>>,
}

/// What a pruning pass removed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneReport {
    /// Vertices removed because they collide with the pruning path.
    pub conflicting: Vec<(NodeId, usize)>,
    /// Edges removed because they swap with the pruning path, as `(from, to, t)`.
    pub cut_edges: Vec<(NodeId, NodeId, usize)>,
    /// Vertices that lost every start-to-goal route as a consequence.
    pub redundant: Vec<(NodeId, usize)>,
}

impl PruneReport {
    pub fn changed(&self) -> bool {
        !(self.conflicting.is_empty() && self.cut_edges.is_empty() && self.redundant.is_empty())
    }
}

/// Complete MDD of all paths from `start` to `goal` with cost exactly `c`.
pub fn build_mdd(grid: &Grid, start: NodeId, goal: NodeId, c: usize) -> Mdd {
    Mdd::build_filtered(grid, start, goal, c, |_, _| true, |_, _, _| true)
}

/// Returns a pruned copy of `mdd` and whether anything was removed.
pub fn prune_mdd(mdd: &Mdd, other: &Path) -> (Mdd, bool) {
    let mut out = mdd.clone();
    let changed = out.prune_by_path(other).changed();
    (out, changed)
}

impl Mdd {
    /// MDD restricted to vertices accepted by `vertex_ok(v, t)` and moves
    /// accepted by `edge_ok(from, to, t)` (a move from `t` to `t + 1`).
    pub fn build_filtered(
        grid: &Grid,
        start: NodeId,
        goal: NodeId,
        c: usize,
        vertex_ok: impl Fn(NodeId, usize) -> bool,
        edge_ok: impl Fn(NodeId, NodeId, usize) -> bool,
    ) -> Mdd {
        let to_goal = grid.distance_table(goal);
        let mut mdd = Mdd {
            start,
            goal,
            cost: c,
            layers: vec![Vec::new(); c + 1],
            edges: vec![Vec::new(); c],
        };
        if (to_goal.raw(start) as usize) > c || !vertex_ok(start, 0) {
            mdd.clear();
            return mdd;
        }
        mdd.layers[0].push(start);
        let mut seen = FxHashSet::default();
        for t in 0..c {
            seen.clear();
            let (cur, rest) = mdd.layers.split_at_mut(t + 1);
            let next = &mut rest[0];
            for &v in &cur[t] {
                let moves = std::iter::once(v).chain(grid.neighbors(v).iter().copied());
                for w in moves {
                    let d = to_goal.raw(w);
                    if d == crate::graph::UNREACHABLE || t + 1 + d as usize > c {
                        continue;
                    }
                    if !vertex_ok(w, t + 1) || (w != v && !edge_ok(v, w, t)) {
                        continue;
                    }
                    mdd.edges[t].push((v, w));
                    if seen.insert(w) {
                        next.push(w);
                    }
                }
            }
            next.sort_unstable();
            mdd.edges[t].sort_unstable();
        }
        mdd.trim();
        mdd
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn goal(&self) -> NodeId {
        self.goal
    }

    pub fn cost(&self) -> usize {
        self.cost
    }

    pub fn is_empty(&self) -> bool {
        self.layers[0].is_empty()
    }

    pub fn layer(&self, t: usize) -> &[NodeId] {
        &self.layers[t]
    }

    pub fn edges(&self, t: usize) -> &[(NodeId, NodeId)] {
        &self.edges[t]
    }

    pub fn contains(&self, v: NodeId, t: usize) -> bool {
        t <= self.cost && self.layers[t].binary_search(&v).is_ok()
    }

    pub fn vertex_count(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn vertices(&self) -> impl Iterator<Item = (NodeId, usize)> + '_ {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(t, l)| l.iter().map(move |&v| (v, t)))
    }

    /// Every path in the diagram. Exponential; meant for small diagrams.
    pub fn paths(&self) -> Vec<Vec<NodeId>> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let mut stack = vec![vec![self.start]];
        while let Some(p) = stack.pop() {
            let t = p.len() - 1;
            if t == self.cost {
                out.push(p);
                continue;
            }
            let v = p[t];
            for &(a, b) in &self.edges[t] {
                if a == v {
                    let mut q = p.clone();
                    q.push(b);
                    stack.push(q);
                }
            }
        }
        out.sort();
        out
    }

    /// Removes every vertex colliding with `other` and every edge that would
    /// swap with it, then everything left without a start-to-goal route.
    ///
    /// Because an agent following a cost-`c` path stays at its goal after
    /// `c`, the final goal vertex also collides with `other` visiting the
    /// goal at any time `≥ c`.
    pub fn prune_by_path(&mut self, other: &Path) -> PruneReport {
        let c = self.cost;
        let goal = self.goal;
        let goal_hit_late = if c + 1 >= other.len() {
            other.last() == goal
        } else {
            other[c..].contains(&goal)
        };
        self.prune(
            |v, t| other.at(t) == v || (t == c && v == goal && goal_hit_late),
            |u, w, t| other.at(t) == w && other.at(t + 1) == u,
        )
    }

    /// Generic pruning by blocked vertices and blocked moves.
    pub fn prune(
        &mut self,
        vertex_blocked: impl Fn(NodeId, usize) -> bool,
        edge_blocked: impl Fn(NodeId, NodeId, usize) -> bool,
    ) -> PruneReport {
        let mut report = PruneReport::default();
        if self.is_empty() {
            return report;
        }
        let before: Vec<Vec<NodeId>> = self.layers.clone();
        for (t, layer) in self.layers.iter_mut().enumerate() {
            layer.retain(|&v| {
                let hit = vertex_blocked(v, t);
                if hit {
                    report.conflicting.push((v, t));
                }
                !hit
            });
        }
        for t in 0..self.cost {
            let (layers, edges) = (&self.layers, &mut self.edges[t]);
            edges.retain(|&(u, w)| {
                let live = layers[t].binary_search(&u).is_ok() && layers[t + 1].binary_search(&w).is_ok();
                if !live {
                    return false;
                }
                if u != w && edge_blocked(u, w, t) {
                    report.cut_edges.push((u, w, t));
                    return false;
                }
                true
            });
        }
        self.trim();
        for (t, layer) in before.iter().enumerate() {
            for &v in layer {
                if !self.contains(v, t) && !report.conflicting.contains(&(v, t)) {
                    report.redundant.push((v, t));
                }
            }
        }
        report
    }

    /// Keeps only vertices and edges on some start-to-goal route.
    fn trim(&mut self) {
        let c = self.cost;
        if self.layers[0] != [self.start] || self.layers[c] != [self.goal] {
            if !(self.layers[0] == [self.start] && self.layers[c].contains(&self.goal)) {
                self.clear();
                return;
            }
        }
        // forward reachability
        let mut alive: Vec<FxHashSet<NodeId>> = vec![FxHashSet::default(); c + 1];
        alive[0].insert(self.start);
        for t in 0..c {
            let (cur, rest) = alive.split_at_mut(t + 1);
            self.edges[t].retain(|(u, _)| cur[t].contains(u));
            for &(_, w) in &self.edges[t] {
                rest[0].insert(w);
            }
        }
        // backward reachability, restricted to the forward set
        alive[c].retain(|&v| v == self.goal);
        for t in (0..c).rev() {
            let (cur, rest) = alive.split_at_mut(t + 1);
            self.edges[t].retain(|(_, w)| rest[0].contains(w));
            let sources: FxHashSet<NodeId> = self.edges[t].iter().map(|&(u, _)| u).collect();
            cur[t].retain(|u| sources.contains(u));
        }
        if alive[0].is_empty() {
            self.clear();
            return;
        }
        for (t, layer) in self.layers.iter_mut().enumerate() {
            layer.retain(|v| alive[t].contains(v));
        }
    }

    fn clear(&mut self) {
        for l in &mut self.layers {
            l.clear();
        }
        for e in &mut self.edges {
            e.clear();
        }
    }
}
