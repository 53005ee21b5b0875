//! Search primitives and the subset solvers used for refinement.

pub mod astar;
pub mod cbs;
pub mod ecbs;
pub mod limits;
pub mod occupancy;

pub use astar::{focal_astar, space_time_astar, LowLevel, LowLevelError};
pub use cbs::{icbs, icbs_full, icbs_subset, refine_subset, CbsProblem, CbsResult, SolveError, SubsetOutcome};
pub use ecbs::{ecbs, ecbs_search};
pub use limits::SearchLimits;
pub use occupancy::{Constraint, ConstraintSet, FixedObstacles, NoObstacles, Obstacles, Occupancy, PathTable};

/// A solver for a group of agents among fixed obstacles. Any implementation
/// may be used for refinement as long as it never returns paths costing more
/// than the given upper bound.
pub trait SubsetSolver: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &CbsProblem, upper_bound: Option<u64>, limits: &SearchLimits) -> CbsResult;
}

/// Optimal subset solver.
#[derive(Clone, Copy, Debug, Default)]
pub struct Icbs;

impl SubsetSolver for Icbs {
    fn name(&self) -> &str {
        "icbs"
    }

    fn solve(&self, problem: &CbsProblem, upper_bound: Option<u64>, limits: &SearchLimits) -> CbsResult {
        icbs(problem, upper_bound, limits).0
    }
}

/// Bounded-suboptimal subset solver.
#[derive(Clone, Copy, Debug)]
pub struct Ecbs {
    pub w: f64,
}

impl SubsetSolver for Ecbs {
    fn name(&self) -> &str {
        "ecbs"
    }

    fn solve(&self, problem: &CbsProblem, upper_bound: Option<u64>, limits: &SearchLimits) -> CbsResult {
        ecbs_search(problem, self.w, upper_bound, limits)
    }
}
