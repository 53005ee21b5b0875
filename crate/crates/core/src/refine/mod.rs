//! The anytime loop: get a first solution, then keep re-solving small agent
//! groups against the frozen rest and keep whatever is strictly cheaper.

mod rules;
mod schedule;
mod trace;

use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use rules::{
    repair_local_goals, select_bottleneck, select_focus_goals, select_random, select_single, select_using_mdd,
    ModificationSet, Rule, UnknownRule,
};
pub use schedule::{AgentOrder, Scheduler};
pub use trace::{Outcome, Trace, TraceRow};

use crate::initial::{default_order, hca_limited, pibt_complete_seeded, pibt_seeded, push_and_swap_moves, whca};
use crate::instance::Instance;
use crate::plan::Solution;
use crate::search::{ecbs, refine_subset, Ecbs, Icbs, Occupancy, SearchLimits, SubsetOutcome, SubsetSolver};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialSolver {
    PibtComplete,
    /// Plain PIBT; fails unless everyone arrives within `horizon` steps.
    Pibt { horizon: Option<usize> },
    PushAndSwap,
    Hca,
    Whca { window: usize },
    Ecbs { w: f64 },
}

impl InitialSolver {
    pub fn name(&self) -> &'static str {
        match self {
            InitialSolver::PibtComplete => "pibt_complete",
            InitialSolver::Pibt { .. } => "pibt",
            InitialSolver::PushAndSwap => "ps",
            InitialSolver::Hca => "hca",
            InitialSolver::Whca { .. } => "whca",
            InitialSolver::Ecbs { .. } => "ecbs",
        }
    }

    pub fn run(&self, instance: &Instance, seed: u64, limits: &SearchLimits) -> Result<Solution, String> {
        let n = instance.grid().node_count();
        match *self {
            InitialSolver::PibtComplete => pibt_complete_seeded(instance, seed).map_err(|e| e.to_string()),
            InitialSolver::Pibt { horizon } => {
                let s = pibt_seeded(instance, horizon.unwrap_or(4 * n), seed);
                let end = s.config_at(s.horizon());
                if end.as_slice() == instance.goals() {
                    Ok(s)
                } else {
                    Err("PIBT did not bring every agent home".to_string())
                }
            }
            InitialSolver::PushAndSwap => push_and_swap_moves(instance)
                .map(|m| m.compress(instance.starts(), n))
                .map_err(|e| e.to_string()),
            InitialSolver::Hca => hca_limited(instance, &default_order(instance, None), limits).map_err(|e| e.to_string()),
            InitialSolver::Whca { window } => whca(instance, window).map_err(|e| e.to_string()),
            InitialSolver::Ecbs { w } => ecbs(instance, w, limits).map_err(|e| e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RefineSolver {
    Icbs,
    Ecbs { w: f64 },
}

impl RefineSolver {
    fn solver(&self) -> Box<dyn SubsetSolver> {
        match *self {
            RefineSolver::Icbs => Box::new(Icbs),
            RefineSolver::Ecbs { w } => Box::new(Ecbs { w }),
        }
    }
}

/// Parses `composition` or a comma-separated list of rule names.
pub fn parse_rules(s: &str) -> Result<Vec<Rule>, UnknownRule> {
    if s.trim() == "composition" {
        return Ok(Rule::COMPOSITION.to_vec());
    }
    s.split(',').map(Rule::from_str).collect()
}

#[derive(Clone, Debug)]
pub struct RefineConfig {
    pub initial: InitialSolver,
    /// Rules run in stages, see [`Scheduler`].
    pub rules: Vec<Rule>,
    /// Size of random sets; `min(30, n)` when unset.
    pub random_k: Option<usize>,
    pub refine_timeout: Option<Duration>,
    pub node_limit: Option<u64>,
    /// Wall-clock budget, initial solver included.
    pub budget: Option<Duration>,
    pub max_iterations: Option<u64>,
    pub seed: u64,
    /// Ignore the wall clock entirely; trace timestamps become iteration indices.
    pub deterministic: bool,
    pub agent_order: AgentOrder,
    pub solver: RefineSolver,
    pub interrupt: Option<Arc<AtomicBool>>,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            initial: InitialSolver::PibtComplete,
            rules: Rule::COMPOSITION.to_vec(),
            random_k: None,
            refine_timeout: Some(Duration::from_millis(500)),
            node_limit: Some(10_000),
            budget: Some(Duration::from_secs(1)),
            max_iterations: None,
            seed: 0,
            deterministic: false,
            agent_order: AgentOrder::Index,
            solver: RefineSolver::Icbs,
            interrupt: None,
        }
    }
}

impl RefineConfig {
    /// Deterministic defaults: no clocks, at most `iterations` iterations.
    pub fn deterministic(iterations: u64) -> Self {
        RefineConfig {
            deterministic: true,
            max_iterations: Some(iterations),
            ..Self::default()
        }
    }

    fn check(&self, n: usize) -> Result<(), RefineError> {
        let bad = |m: &str| Err(RefineError::Config(m.to_string()));
        if self.rules.is_empty() {
            return bad("rule schedule is empty");
        }
        if self.random_k == Some(0) {
            return bad("random set size must be positive");
        }
        if self.refine_timeout.is_some_and(|d| d.is_zero()) || self.budget.is_some_and(|d| d.is_zero()) {
            return bad("time budgets must be positive");
        }
        if self.node_limit == Some(0) || self.max_iterations == Some(0) {
            return bad("limits must be positive");
        }
        if n == 0 {
            return bad("instance has no agents");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RefineError {
    #[error("initial solver {solver} failed: {reason}")]
    InitialFailed { solver: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug)]
pub struct RefineResult {
    pub solution: Solution,
    pub trace: Trace,
    pub initial_cost: u64,
    pub init_time: Duration,
    pub total_time: Duration,
    pub iterations: u64,
    pub stage_advances: usize,
}

/// Runs the initial solver and then refines until a stop condition holds.
pub fn iterative_refine(instance: &Instance, config: &RefineConfig) -> Result<RefineResult, RefineError> {
    iterative_refine_with(instance, config, |_, _| {})
}

/// [`iterative_refine`] calling `observer` with every trace row and the
/// incumbent at that point, the initial solution included.
pub fn iterative_refine_with(
    instance: &Instance,
    config: &RefineConfig,
    observer: impl FnMut(&TraceRow, &Solution),
) -> Result<RefineResult, RefineError> {
    config.check(instance.num_agents())?;
    let start = Instant::now();
    let limits = SearchLimits {
        deadline: (!config.deterministic).then(|| config.budget.map(|b| start + b)).flatten(),
        node_limit: None,
        interrupt: config.interrupt.clone(),
    };
    let initial = config
        .initial
        .run(instance, config.seed, &limits)
        .map_err(|reason| RefineError::InitialFailed {
            solver: config.initial.name().to_string(),
            reason,
        })?;
    Ok(refine_from(instance, initial, config.initial.name(), config, start, observer))
}

/// Refines a given valid solution. The budget counts from `start`.
pub fn refine_from(
    instance: &Instance,
    initial: Solution,
    label: &str,
    config: &RefineConfig,
    start: Instant,
    mut observer: impl FnMut(&TraceRow, &Solution),
) -> RefineResult {
    let n = instance.num_agents();
    config.check(n).expect("invalid refinement configuration");
    let init_time = start.elapsed();
    let lower = instance.lower_bound();
    let deadline = (!config.deterministic).then(|| config.budget.map(|b| start + b)).flatten();
    let k = config.random_k.unwrap_or(30).min(n);
    let solver = config.solver.solver();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scheduler = Scheduler::new(config.rules.clone(), n, config.agent_order);
    let mut occ = Occupancy::from_solution(instance.grid().node_count(), &initial);
    let mut solution = initial;
    let initial_cost = solution.sum_of_costs();
    let mut trace = Trace::new();
    let stamp = |it: u64| if config.deterministic { it } else { start.elapsed().as_millis() as u64 };

    let first = TraceRow {
        elapsed_ms: stamp(0),
        iteration: 0,
        sum_of_costs: initial_cost,
        rule: label.to_string(),
        set_size: n,
        outcome: Outcome::Initial,
    };
    observer(&first, &solution);
    trace.push(first);

    let interrupted = || config.interrupt.as_ref().is_some_and(|f| f.load(Ordering::Relaxed));
    let mut iteration = 0u64;
    loop {
        if interrupted()
            || solution.sum_of_costs() <= lower
            || config.max_iterations.is_some_and(|m| iteration >= m)
            || deadline.is_some_and(|d| Instant::now() >= d)
        {
            break;
        }
        let Some((rule, i)) = scheduler.next(instance, &solution) else { break };
        iteration += 1;
        let limits = SearchLimits {
            deadline,
            node_limit: config.node_limit,
            interrupt: config.interrupt.clone(),
        };
        let limits = if config.deterministic { limits } else { limits.capped(config.refine_timeout) };

        let (set_size, result) = if rule == Rule::LocalRepair {
            match repair_local_goals(instance, &solution, &occ, i, &limits) {
                Some(changes) => (changes.len(), SubsetOutcome::Improved(changes)),
                None => (1, SubsetOutcome::NoImprovement),
            }
        } else {
            let m = match rule {
                Rule::Random => select_random(n, k, &mut rng),
                Rule::Single => select_single(i),
                Rule::FocusGoals => select_focus_goals(instance, &solution, i),
                Rule::UsingMdd => select_using_mdd(instance, &solution, i),
                Rule::Bottleneck => select_bottleneck(instance, &solution, &occ, i, &limits),
                Rule::LocalRepair => unreachable!(),
            };
            let a = m.agents[0];
            if m.len() == 1 && solution.cost(a) as u32 == instance.dist(a) {
                (1, SubsetOutcome::NoImprovement)
            } else {
                let r = refine_subset(instance, &m.agents, &solution, &occ, &limits, |p, ub, l| {
                    solver.solve(p, ub, l)
                });
                (m.len(), r)
            }
        };

        let outcome = match result {
            SubsetOutcome::Improved(changes) => {
                for (a, p) in &changes {
                    occ.replace(*a, solution.path(*a), p);
                }
                solution.replace(changes);
                Outcome::Improved
            }
            SubsetOutcome::NoImprovement => Outcome::NoImprovement,
            SubsetOutcome::Aborted => Outcome::Aborted,
        };
        scheduler.record(outcome == Outcome::Improved);
        let row = TraceRow {
            elapsed_ms: stamp(iteration),
            iteration,
            sum_of_costs: solution.sum_of_costs(),
            rule: rule.name().to_string(),
            set_size,
            outcome,
        };
        observer(&row, &solution);
        trace.push(row);
    }

    RefineResult {
        solution,
        trace,
        initial_cost,
        init_time,
        total_time: start.elapsed(),
        iterations: iteration,
        stage_advances: scheduler.advances(),
    }
}
