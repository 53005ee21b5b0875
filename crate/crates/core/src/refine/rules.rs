//! Rules that pick the modification set: the agents re-planned together in
//! one refinement iteration.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::instance::Instance;
use crate::mdd::build_mdd;
use crate::plan::{Path, Solution};
use crate::search::{space_time_astar, ConstraintSet, FixedObstacles, LowLevel, Obstacles, Occupancy, SearchLimits};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Random,
    Single,
    FocusGoals,
    LocalRepair,
    UsingMdd,
    Bottleneck,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::Random,
        Rule::Single,
        Rule::FocusGoals,
        Rule::LocalRepair,
        Rule::UsingMdd,
        Rule::Bottleneck,
    ];

    /// Default stage order of the composition schedule.
    pub const COMPOSITION: [Rule; 4] = [Rule::LocalRepair, Rule::FocusGoals, Rule::UsingMdd, Rule::Random];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Random => "random",
            Rule::Single => "single",
            Rule::FocusGoals => "focus-goals",
            Rule::LocalRepair => "local-repair",
            Rule::UsingMdd => "using-mdd",
            Rule::Bottleneck => "bottleneck",
        }
    }

    /// Whether the rule targets one agent at a time.
    pub fn per_agent(self) -> bool {
        self != Rule::Random
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown rule `{0}`")]
pub struct UnknownRule(pub String);

impl FromStr for Rule {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "random" => Ok(Rule::Random),
            "single" => Ok(Rule::Single),
            "focus-goals" | "focus" => Ok(Rule::FocusGoals),
            "local-repair" | "repair" => Ok(Rule::LocalRepair),
            "using-mdd" | "mdd" => Ok(Rule::UsingMdd),
            "bottleneck" => Ok(Rule::Bottleneck),
            other => Err(UnknownRule(other.to_string())),
        }
    }
}

/// Agents to re-plan together, and the rule that chose them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModificationSet {
    pub agents: Vec<usize>,
    pub origin: Rule,
}

impl ModificationSet {
    fn new(mut agents: Vec<usize>, origin: Rule) -> Self {
        agents.sort_unstable();
        agents.dedup();
        assert!(!agents.is_empty(), "modification sets are nonempty");
        ModificationSet { agents, origin }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn contains(&self, a: usize) -> bool {
        self.agents.binary_search(&a).is_ok()
    }
}

/// `k` distinct agents out of `n`, uniformly at random.
pub fn select_random(n: usize, k: usize, rng: &mut impl Rng) -> ModificationSet {
    assert!(1 <= k && k <= n, "need 1 <= k <= n");
    let agents = rand::seq::index::sample(rng, n, k).into_vec();
    ModificationSet::new(agents, Rule::Random)
}

pub fn select_single(i: usize) -> ModificationSet {
    ModificationSet::new(vec![i], Rule::Single)
}

/// Agents found on `i`'s goal at some `t` with `dist_i ≤ t ≤ cost_i`.
pub fn select_focus_goals(instance: &Instance, solution: &Solution, i: usize) -> ModificationSet {
    let g = instance.goal(i);
    let (lo, hi) = (instance.dist(i) as usize, solution.cost(i));
    let mut agents = vec![i];
    for (j, p) in solution.paths().iter().enumerate() {
        if j != i && (lo..=hi).any(|t| p.at(t) == g) {
            agents.push(j);
        }
    }
    ModificationSet::new(agents, Rule::FocusGoals)
}

/// `i` plus every agent whose path prunes some cost-`c` MDD of `i`, for
/// `dist_i ≤ c < cost_i`. Pruning is cumulative over agents in index order.
pub fn select_using_mdd(instance: &Instance, solution: &Solution, i: usize) -> ModificationSet {
    let mut agents = vec![i];
    let grid = instance.grid();
    for c in instance.dist(i) as usize..solution.cost(i) {
        let mut mdd = build_mdd(grid, instance.start(i), instance.goal(i), c);
        for (j, p) in solution.paths().iter().enumerate() {
            if mdd.is_empty() {
                break;
            }
            if j != i && mdd.prune_by_path(p).changed() {
                agents.push(j);
            }
        }
    }
    ModificationSet::new(agents, Rule::UsingMdd)
}

/// Best cost for `agent` when every agent not marked in `free` is a fixed obstacle.
pub(crate) fn best_cost_among(
    instance: &Instance,
    occ: &Occupancy,
    free: &[bool],
    agent: usize,
    limits: &SearchLimits,
) -> Option<Path> {
    let grid = instance.grid();
    let obstacles = FixedObstacles::new(occ, free);
    let empty = ConstraintSet::new();
    space_time_astar(&LowLevel {
        grid,
        start: instance.start(agent),
        goal: instance.goal(agent),
        constraints: &empty,
        obstacles: &obstacles,
        soft: None,
        max_time: obstacles.settle_time() + grid.node_count() as u32,
        limits,
    })
    .ok()
}

/// `i` plus every agent that could do strictly better if `i`'s path were gone.
/// `occ` must index all paths of `solution`.
pub fn select_bottleneck(
    instance: &Instance,
    solution: &Solution,
    occ: &Occupancy,
    i: usize,
    limits: &SearchLimits,
) -> ModificationSet {
    let n = instance.num_agents();
    let mut agents = vec![i];
    let mut free = vec![false; n];
    free[i] = true;
    for j in 0..n {
        if j == i || solution.cost(j) as u32 == instance.dist(j) {
            continue;
        }
        free[j] = true;
        if best_cost_among(instance, occ, &free, j, limits).is_some_and(|p| p.cost() < solution.cost(j)) {
            agents.push(j);
        }
        free[j] = false;
    }
    ModificationSet::new(agents, Rule::Bottleneck)
}

/// Cuts a detour that leaves `i`'s goal and comes back: `i` waits at its goal
/// from the earliest such visit, and every agent that passed over the goal
/// afterwards is re-planned around everyone else. Returns the new paths iff
/// their total cost is strictly below the old one.
pub fn repair_local_goals(
    instance: &Instance,
    solution: &Solution,
    occ: &Occupancy,
    i: usize,
    limits: &SearchLimits,
) -> Option<Vec<(usize, Path)>> {
    let p = solution.path(i);
    let g = instance.goal(i);
    let cost = p.cost();
    let horizon = solution.horizon();
    let n = instance.num_agents();
    for t0 in 0..cost {
        if p[t0] != g || p[t0 + 1] == g {
            continue;
        }
        let parked = Path::new(p[..=t0].to_vec());
        let others: Vec<usize> = (0..n)
            .filter(|&j| j != i && (t0 + 1..=horizon).any(|t| solution.path(j).at(t) == g))
            .collect();
        let old: usize = cost + others.iter().map(|&j| solution.cost(j)).sum::<usize>();
        let mut work = occ.clone();
        work.replace(i, p, &parked);
        for &j in &others {
            work.remove(j, solution.path(j));
        }
        let free = vec![false; n];
        let mut changes = vec![(i, parked)];
        let mut total = t0;
        let mut ok = true;
        for &j in &others {
            match best_cost_among(instance, &work, &free, j, limits) {
                Some(q) => {
                    total += q.cost();
                    work.insert(j, &q);
                    changes.push((j, q));
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok && total < old {
            return Some(changes);
        }
    }
    None
}
