use super::rules::Rule;
use crate::instance::Instance;
use crate::plan::Solution;

/// Order in which per-agent rules visit agents during one pass.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AgentOrder {
    #[default]
    Index,
    /// Largest `cost_i - dist_i` first, recomputed at the start of every pass.
    CostGap,
}

/// Runs each rule in turn over passes of `n` iterations and moves on after a
/// pass with no improvement. A final `random` stage never finishes.
#[derive(Clone, Debug)]
pub struct Scheduler {
    stages: Vec<Rule>,
    stage: usize,
    n: usize,
    order: Vec<usize>,
    pos: usize,
    improved: bool,
    advances: usize,
    agent_order: AgentOrder,
}

impl Scheduler {
    pub fn new(stages: Vec<Rule>, n: usize, agent_order: AgentOrder) -> Self {
        assert!(!stages.is_empty(), "empty rule schedule");
        assert!(n > 0, "no agents");
        Scheduler {
            stages,
            stage: 0,
            n,
            order: (0..n).collect(),
            pos: 0,
            improved: false,
            advances: 0,
            agent_order,
        }
    }

    pub fn current(&self) -> Option<Rule> {
        self.stages.get(self.stage).copied()
    }

    pub fn is_exhausted(&self) -> bool {
        self.stage >= self.stages.len()
    }

    /// Number of times the schedule moved to the next stage.
    pub fn advances(&self) -> usize {
        self.advances
    }

    /// The rule and the targeted agent for the next iteration. The agent is
    /// meaningless for `random`.
    pub fn next(&mut self, instance: &Instance, solution: &Solution) -> Option<(Rule, usize)> {
        let rule = self.current()?;
        if self.pos == 0 && self.agent_order == AgentOrder::CostGap {
            self.order
                .sort_by_key(|&a| (std::cmp::Reverse(solution.cost(a) - instance.dist(a) as usize), a));
        }
        Some((rule, self.order[self.pos]))
    }

    pub fn record(&mut self, improved: bool) {
        self.improved |= improved;
        self.pos += 1;
        if self.pos < self.n {
            return;
        }
        self.pos = 0;
        let last_random = self.stage + 1 == self.stages.len() && self.stages[self.stage] == Rule::Random;
        if !self.improved && !last_random {
            self.stage += 1;
            self.advances += 1;
        }
        self.improved = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Grid, NodeId};
    use std::sync::Arc;

    fn setup() -> (Instance, Solution) {
        let g = Arc::new(Grid::open(4, 1));
        let i = Instance::from_coords(g, &[((0, 0), (1, 0)), ((3, 0), (2, 0))]).unwrap();
        let s = Solution::from_vecs(vec![vec![NodeId(0), NodeId(1)], vec![NodeId(3), NodeId(3), NodeId(2)]]);
        (i, s)
    }

    #[test]
    fn passes_and_advances() {
        let (i, s) = setup();
        let mut sc = Scheduler::new(Rule::COMPOSITION.to_vec(), 2, AgentOrder::Index);
        let mut seen = vec![];
        for _ in 0..6 {
            let (r, a) = sc.next(&i, &s).unwrap();
            seen.push((r, a));
            sc.record(false);
        }
        assert_eq!(
            seen,
            vec![
                (Rule::LocalRepair, 0),
                (Rule::LocalRepair, 1),
                (Rule::FocusGoals, 0),
                (Rule::FocusGoals, 1),
                (Rule::UsingMdd, 0),
                (Rule::UsingMdd, 1)
            ]
        );
        for _ in 0..10 {
            assert_eq!(sc.next(&i, &s).unwrap().0, Rule::Random);
            sc.record(false);
        }
        assert_eq!(sc.advances(), 3);
    }

    #[test]
    fn improvement_repeats_stage() {
        let (i, s) = setup();
        let mut sc = Scheduler::new(vec![Rule::Single], 2, AgentOrder::Index);
        sc.next(&i, &s);
        sc.record(true);
        sc.record(false);
        assert_eq!(sc.current(), Some(Rule::Single));
        sc.record(false);
        sc.record(false);
        assert!(sc.is_exhausted());
        assert!(sc.next(&i, &s).is_none());
    }

    #[test]
    fn cost_gap_order_targets_worst_first() {
        let (i, s) = setup();
        let mut sc = Scheduler::new(vec![Rule::Single], 2, AgentOrder::CostGap);
        assert_eq!(sc.next(&i, &s), Some((Rule::Single, 1)));
    }
}
