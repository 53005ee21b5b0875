//! MAPF instances: scenario ingestion, random generation and well-formedness.

use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Grid, NodeId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("{starts} starts but {goals} goals")]
    LengthMismatch { starts: usize, goals: usize },
    #[error("agents {0} and {1} share a start")]
    DuplicateStart(usize, usize),
    #[error("agents {0} and {1} share a goal")]
    DuplicateGoal(usize, usize),
    #[error("agent {0} cannot reach its goal")]
    Unreachable(usize),
    #[error("agent {agent}: cell ({x}, {y}) is not a passable cell")]
    Blocked { agent: usize, x: usize, y: usize },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("scenario line {line} expects a {width}x{height} map")]
    MapMismatch { line: usize, width: usize, height: usize },
    #[error("requested {requested} agents but only {available} are available")]
    TooManyAgents { requested: usize, available: usize },
}

/// Agents with pairwise-distinct starts and pairwise-distinct goals.
///
/// An agent's goal may coincide with another agent's start.
#[derive(Clone, Debug)]
pub struct Instance {
    grid: Arc<Grid>,
    starts: Vec<NodeId>,
    goals: Vec<NodeId>,
}

impl Instance {
    pub fn new(grid: Arc<Grid>, starts: Vec<NodeId>, goals: Vec<NodeId>) -> Result<Self, InstanceError> {
        if starts.len() != goals.len() {
            return Err(InstanceError::LengthMismatch {
                starts: starts.len(),
                goals: goals.len(),
            });
        }
        if let Some((a, b)) = first_duplicate(&starts) {
            return Err(InstanceError::DuplicateStart(a, b));
        }
        if let Some((a, b)) = first_duplicate(&goals) {
            return Err(InstanceError::DuplicateGoal(a, b));
        }
        let labels = grid.components();
        for (i, (s, g)) in starts.iter().zip(&goals).enumerate() {
            if labels[s.index()] != labels[g.index()] {
                return Err(InstanceError::Unreachable(i));
            }
        }
        Ok(Instance { grid, starts, goals })
    }

    /// Builds an instance from `((sx, sy), (gx, gy))` cell coordinates.
    pub fn from_coords(
        grid: Arc<Grid>,
        pairs: &[((usize, usize), (usize, usize))],
    ) -> Result<Self, InstanceError> {
        let mut starts = Vec::with_capacity(pairs.len());
        let mut goals = Vec::with_capacity(pairs.len());
        for (agent, &((sx, sy), (gx, gy))) in pairs.iter().enumerate() {
            let node = |x, y| grid.node_at(x, y).ok_or(InstanceError::Blocked { agent, x, y });
            starts.push(node(sx, sy)?);
            goals.push(node(gx, gy)?);
        }
        Self::new(grid, starts, goals)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn num_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn starts(&self) -> &[NodeId] {
        &self.starts
    }

    pub fn goals(&self) -> &[NodeId] {
        &self.goals
    }

    pub fn start(&self, i: usize) -> NodeId {
        self.starts[i]
    }

    pub fn goal(&self, i: usize) -> NodeId {
        self.goals[i]
    }

    /// Shortest-path length of agent `i` ignoring everyone else.
    pub fn dist(&self, i: usize) -> u32 {
        self.grid
            .dist(self.starts[i], self.goals[i])
            .expect("instance invariant: goals reachable")
    }

    /// Σ_i dist(start_i, goal_i); the trivial lower bound on sum-of-costs.
    pub fn lower_bound(&self) -> u64 {
        (0..self.num_agents()).map(|i| self.dist(i) as u64).sum()
    }

    /// Same agents with new start locations, e.g. to continue planning from
    /// an intermediate configuration.
    pub fn with_starts(&self, starts: Vec<NodeId>) -> Result<Self, InstanceError> {
        Self::new(self.grid.clone(), starts, self.goals.clone())
    }

    /// Keeps only the listed agents, in the given order.
    pub fn restrict(&self, agents: &[usize]) -> Self {
        Instance {
            grid: self.grid.clone(),
            starts: agents.iter().map(|&i| self.starts[i]).collect(),
            goals: agents.iter().map(|&i| self.goals[i]).collect(),
        }
    }

    /// True iff every agent can reach its goal without touching any other
    /// agent's start or goal.
    pub fn is_well_formed(&self) -> bool {
        let n = self.num_agents();
        let grid = self.grid();
        let mut endpoint_owners: Vec<Vec<usize>> = vec![Vec::new(); grid.node_count()];
        for i in 0..n {
            endpoint_owners[self.starts[i].index()].push(i);
            endpoint_owners[self.goals[i].index()].push(i);
        }
        let blocked_for = |v: NodeId, i: usize| endpoint_owners[v.index()].iter().any(|&j| j != i);
        let mut seen = vec![u32::MAX; grid.node_count()];
        let mut queue = VecDeque::new();
        for i in 0..n {
            let (s, g) = (self.starts[i], self.goals[i]);
            if blocked_for(s, i) || blocked_for(g, i) {
                return false;
            }
            queue.clear();
            queue.push_back(s);
            seen[s.index()] = i as u32;
            let mut found = s == g;
            while let Some(u) = queue.pop_front() {
                if found {
                    break;
                }
                for &w in grid.neighbors(u) {
                    if seen[w.index()] == i as u32 || blocked_for(w, i) {
                        continue;
                    }
                    if w == g {
                        found = true;
                        break;
                    }
                    seen[w.index()] = i as u32;
                    queue.push_back(w);
                }
            }
            if !found {
                return false;
            }
        }
        true
    }

    /// MovingAI scenario (version 1) text for this instance.
    pub fn to_scen(&self, map_name: &str) -> String {
        let grid = self.grid();
        let mut out = String::from("version 1\n");
        for i in 0..self.num_agents() {
            let (sx, sy) = grid.coords(self.starts[i]);
            let (gx, gy) = grid.coords(self.goals[i]);
            out.push_str(&format!(
                "0\t{map_name}\t{}\t{}\t{sx}\t{sy}\t{gx}\t{gy}\t{}\n",
                grid.width(),
                grid.height(),
                self.dist(i)
            ));
        }
        out
    }

    /// Plain-text form: `map=<path>` then one `sx sy gx gy` line per agent.
    pub fn to_plain(&self, map_path: &str) -> String {
        let grid = self.grid();
        let mut out = format!("map={map_path}\n");
        for i in 0..self.num_agents() {
            let (sx, sy) = grid.coords(self.starts[i]);
            let (gx, gy) = grid.coords(self.goals[i]);
            out.push_str(&format!("{sx} {sy} {gx} {gy}\n"));
        }
        out
    }
}

fn first_duplicate(nodes: &[NodeId]) -> Option<(usize, usize)> {
    let mut owner = rustc_hash::FxHashMap::default();
    for (i, v) in nodes.iter().enumerate() {
        if let Some(&j) = owner.get(v) {
            return Some((j, i));
        }
        owner.insert(*v, i);
    }
    None
}

/// Parses the first `n` agents of a MovingAI `.scen` file.
///
/// The optimal-length column is read but ignored; it is measured with
/// diagonal moves, which these grids do not have.
pub fn parse_scen(text: &str, grid: Arc<Grid>, n: usize) -> Result<Instance, InstanceError> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim_end_matches('\r');
        if l.trim().is_empty() {
            continue;
        }
        if idx == 0 && l.trim_start().starts_with("version") {
            let v = l.split_whitespace().nth(1);
            if !matches!(v, Some("1") | Some("1.0")) {
                return Err(InstanceError::Syntax {
                    line,
                    msg: format!("unsupported scenario header {l:?}"),
                });
            }
            continue;
        }
        let fields: Vec<&str> = if l.contains('\t') {
            l.split('\t').collect()
        } else {
            l.split_whitespace().collect()
        };
        if fields.len() != 9 {
            return Err(InstanceError::Syntax {
                line,
                msg: format!("expected 9 fields, found {}", fields.len()),
            });
        }
        let num = |k: usize| -> Result<usize, InstanceError> {
            fields[k].trim().parse().map_err(|_| InstanceError::Syntax {
                line,
                msg: format!("field {} is not a non-negative integer: {:?}", k + 1, fields[k]),
            })
        };
        let (w, h) = (num(2)?, num(3)?);
        if w != grid.width() || h != grid.height() {
            return Err(InstanceError::MapMismatch {
                line,
                width: w,
                height: h,
            });
        }
        fields[8].trim().parse::<f64>().map_err(|_| InstanceError::Syntax {
            line,
            msg: format!("optimal length is not a number: {:?}", fields[8]),
        })?;
        let start = (num(4)?, num(5)?);
        let goal = (num(6)?, num(7)?);
        for &(x, y) in &[start, goal] {
            if !grid.is_passable(x, y) {
                return Err(InstanceError::Blocked {
                    agent: pairs.len(),
                    x,
                    y,
                });
            }
        }
        pairs.push((start, goal));
    }
    if n > pairs.len() {
        return Err(InstanceError::TooManyAgents {
            requested: n,
            available: pairs.len(),
        });
    }
    pairs.truncate(n);
    Instance::from_coords(grid, &pairs)
}

/// Parses the plain instance format, returning the referenced map path and
/// the coordinate pairs.
#[allow(clippy::type_complexity)]
pub fn parse_plain(text: &str) -> Result<(String, Vec<((usize, usize), (usize, usize))>), InstanceError> {
    let mut map = None;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        if let Some(path) = l.strip_prefix("map=") {
            map = Some(path.trim().to_string());
            continue;
        }
        let nums: Result<Vec<usize>, _> = l.split_whitespace().map(str::parse).collect();
        match nums {
            Ok(v) if v.len() == 4 => pairs.push(((v[0], v[1]), (v[2], v[3]))),
            _ => {
                return Err(InstanceError::Syntax {
                    line,
                    msg: format!("expected `sx sy gx gy`, found {l:?}"),
                })
            }
        }
    }
    let map = map.ok_or(InstanceError::Syntax {
        line: 1,
        msg: "missing map= line".into(),
    })?;
    Ok((map, pairs))
}

/// Random instance with `n` agents, deterministic in `seed`.
///
/// Starts and goals are each drawn without replacement from the largest
/// connected component, so every agent can reach its goal.
pub fn random_instance(grid: Arc<Grid>, n: usize, seed: u64) -> Result<Instance, InstanceError> {
    let labels = grid.components();
    let mut sizes = rustc_hash::FxHashMap::<u32, usize>::default();
    for &l in &labels {
        *sizes.entry(l).or_default() += 1;
    }
    let largest = sizes
        .iter()
        .max_by_key(|&(&label, &size)| (size, std::cmp::Reverse(label)))
        .map(|(&l, _)| l);
    let pool: Vec<NodeId> = grid
        .nodes()
        .filter(|v| Some(labels[v.index()]) == largest)
        .collect();
    if n > pool.len() {
        return Err(InstanceError::TooManyAgents {
            requested: n,
            available: pool.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts = sample(&mut rng, pool.len(), n).into_iter().map(|k| pool[k]).collect();
    let goals = sample(&mut rng, pool.len(), n).into_iter().map(|k| pool[k]).collect();
    Instance::new(grid, starts, goals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open(w: usize, h: usize) -> Arc<Grid> {
        Arc::new(Grid::open(w, h))
    }

    #[test]
    fn rejects_duplicates() {
        let g = open(3, 1);
        let err = Instance::new(g.clone(), vec![NodeId(0), NodeId(0)], vec![NodeId(1), NodeId(2)]);
        assert_eq!(err.unwrap_err(), InstanceError::DuplicateStart(0, 1));
        let err = Instance::new(g.clone(), vec![NodeId(0), NodeId(1)], vec![NodeId(2), NodeId(2)]);
        assert_eq!(err.unwrap_err(), InstanceError::DuplicateGoal(0, 1));
        // goal of one agent equal to another's start is allowed
        Instance::new(g, vec![NodeId(0), NodeId(1)], vec![NodeId(1), NodeId(2)]).unwrap();
    }

    #[test]
    fn rejects_unreachable_goal() {
        let g = Arc::new(Grid::from_rows(&["..@.."]).unwrap());
        let err = Instance::new(g, vec![NodeId(0)], vec![NodeId(3)]).unwrap_err();
        assert_eq!(err, InstanceError::Unreachable(0));
    }

    const SCEN: &str = "version 1\n\
        0\tm.map\t3\t3\t0\t0\t2\t2\t4\n\
        0\tm.map\t3\t3\t2\t0\t0\t2\t4\n\
        0\tm.map\t3\t3\t1\t0\t1\t2\t2\n\
        0\tm.map\t3\t3\t0\t1\t2\t1\t2\n\
        0\tm.map\t3\t3\t2\t2\t0\t0\t4\n";

    #[test]
    fn scen_parsing() {
        let g = open(3, 3);
        let inst = parse_scen(SCEN, g.clone(), 5).unwrap();
        assert_eq!(inst.num_agents(), 5);
        assert_eq!(inst.grid().coords(inst.start(1)), (2, 0));
        assert_eq!(inst.grid().coords(inst.goal(4)), (0, 0));
        let mut starts = inst.starts().to_vec();
        starts.sort();
        starts.dedup();
        assert_eq!(starts.len(), 5);

        let inst = parse_scen(SCEN, g.clone(), 2).unwrap();
        assert_eq!(inst.num_agents(), 2);
        assert!(matches!(
            parse_scen(SCEN, g.clone(), 6),
            Err(InstanceError::TooManyAgents { requested: 6, available: 5 })
        ));
        assert!(matches!(
            parse_scen(SCEN, open(4, 3), 1),
            Err(InstanceError::MapMismatch { line: 2, .. })
        ));
    }

    #[test]
    fn scen_start_on_obstacle() {
        let g = Arc::new(Grid::from_rows(&["@..", "...", "..."]).unwrap());
        let err = parse_scen(SCEN, g, 1).unwrap_err();
        assert_eq!(err, InstanceError::Blocked { agent: 0, x: 0, y: 0 });
    }

    #[test]
    fn scen_round_trip() {
        let g = open(5, 4);
        let inst = random_instance(g.clone(), 7, 3).unwrap();
        let back = parse_scen(&inst.to_scen("x.map"), g, 7).unwrap();
        assert_eq!(back.starts(), inst.starts());
        assert_eq!(back.goals(), inst.goals());
    }

    #[test]
    fn plain_round_trip() {
        let g = open(4, 4);
        let inst = random_instance(g.clone(), 5, 11).unwrap();
        let (map, pairs) = parse_plain(&inst.to_plain("maps/a.map")).unwrap();
        assert_eq!(map, "maps/a.map");
        let back = Instance::from_coords(g, &pairs).unwrap();
        assert_eq!(back.starts(), inst.starts());
        assert_eq!(back.goals(), inst.goals());
    }

    #[test]
    fn random_is_deterministic_and_exhaustive() {
        let g = open(4, 4);
        let a = random_instance(g.clone(), 6, 42).unwrap();
        let b = random_instance(g.clone(), 6, 42).unwrap();
        assert_eq!(a.starts(), b.starts());
        assert_eq!(a.goals(), b.goals());
        let full = random_instance(g.clone(), 16, 1).unwrap();
        let mut s = full.starts().to_vec();
        s.sort();
        assert_eq!(s, g.nodes().collect::<Vec<_>>());
        assert!(random_instance(g, 17, 1).is_err());
    }

    #[test]
    fn well_formedness() {
        let g = open(3, 1);
        let single = Instance::new(g.clone(), vec![NodeId(0)], vec![NodeId(2)]).unwrap();
        assert!(single.is_well_formed());
        // agent 2's start sits in the middle of agent 1's only route
        let blocked = Instance::new(g, vec![NodeId(0), NodeId(1)], vec![NodeId(2), NodeId(1)]).unwrap();
        assert!(!blocked.is_well_formed());
        let g = open(3, 3);
        let ok = Instance::new(
            g,
            vec![NodeId(0), NodeId(2)],
            vec![NodeId(6), NodeId(8)],
        )
        .unwrap();
        assert!(ok.is_well_formed());
    }
}
