mod common;

use std::sync::Arc;
use std::time::Instant;

use common::*;
use mapf_ir::refine::{iterative_refine, iterative_refine_with, refine_from, Outcome, RefineConfig, Rule};
use mapf_ir::{random_instance, Grid};
use proptest::prelude::*;

#[test]
fn stage_advances_count_idle_passes() {
    let stages = vec![Rule::LocalRepair, Rule::FocusGoals, Rule::Single, Rule::UsingMdd];
    for seed in 0..12u64 {
        let grid = random_grid(10, 10, 0.1, seed);
        let Ok(inst) = random_instance(grid, 20, seed) else { continue };
        let cfg = RefineConfig {
            rules: stages.clone(),
            ..RefineConfig::deterministic(10_000)
        };
        let Ok(r) = iterative_refine(&inst, &cfg) else { continue };
        let n = inst.num_agents();
        let rows = &r.trace.rows()[1..];
        let mut idle = 0;
        let mut stage = 0;
        for pass in rows.chunks(n) {
            assert!(pass.iter().all(|row| row.rule == stages[stage].name()));
            if pass.len() == n && pass.iter().all(|row| row.outcome != Outcome::Improved) {
                idle += 1;
                stage += 1;
            }
        }
        assert_eq!(r.stage_advances, idle, "seed {seed}");
        if r.solution.sum_of_costs() > inst.lower_bound() {
            assert_eq!(idle, stages.len());
        }
    }
}

#[test]
fn interrupt_from_observer_stops_at_that_iteration() {
    let inst = random_instance(Arc::new(Grid::open(12, 12)), 40, 5).unwrap();
    let flag = Arc::new(std::sync::atomic::AtomicBool::new(false));
    let cfg = RefineConfig {
        interrupt: Some(flag.clone()),
        ..RefineConfig::deterministic(500)
    };
    let f = flag.clone();
    let r = iterative_refine_with(&inst, &cfg, |row, _| {
        if row.iteration == 7 {
            f.store(true, std::sync::atomic::Ordering::Relaxed);
        }
    })
    .unwrap();
    assert!(r.iterations == 7 || r.solution.sum_of_costs() == inst.lower_bound());
    assert_valid(&inst, &r.solution);
}

#[test]
fn refine_from_keeps_an_optimal_start() {
    let (inst, _) = local_repair_gadget(false);
    let opt = mapf_ir::search::icbs_full(&inst, &mapf_ir::search::SearchLimits::none()).unwrap();
    let r = refine_from(&inst, opt.clone(), "optimal", &RefineConfig::deterministic(30), Instant::now(), |_, _| {});
    assert_eq!(r.solution.sum_of_costs(), opt.sum_of_costs());
    assert!(r.trace.rows().iter().skip(1).all(|row| row.outcome != Outcome::Improved));
}

fn rule_strategy() -> impl Strategy<Value = Vec<Rule>> {
    prop::sample::subsequence(Rule::ALL.to_vec(), 1..=Rule::ALL.len()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_step_is_valid_and_no_worse(
        seed in 0u64..100_000,
        w in 6usize..14,
        density in 0.0f64..0.2,
        frac in 0.05f64..0.35,
        rules in rule_strategy(),
        k in 1usize..12,
    ) {
        let grid = random_grid(w, w, density, seed);
        let agents = ((grid.node_count() as f64 * frac) as usize).max(1);
        let Ok(inst) = random_instance(grid, agents, seed) else { return Ok(()) };
        let cfg = RefineConfig {
            rules,
            random_k: Some(k),
            node_limit: Some(200),
            seed,
            ..RefineConfig::deterministic(60)
        };
        let mut last = u64::MAX;
        let mut seen = 0u64;
        let res = iterative_refine_with(&inst, &cfg, |row, sol| {
            assert_valid(&inst, sol);
            assert_eq!(sol.sum_of_costs(), row.sum_of_costs);
            assert!(row.sum_of_costs <= last);
            last = row.sum_of_costs;
            seen += 1;
        });
        let Ok(r) = res else { return Ok(()) };
        prop_assert!(r.trace.is_monotone());
        prop_assert_eq!(seen as usize, r.trace.len());
        prop_assert_eq!(r.trace.len() as u64, r.iterations + 1);
        prop_assert!(r.solution.sum_of_costs() >= inst.lower_bound());
        prop_assert!(r.solution.sum_of_costs() <= r.initial_cost);
        let again = iterative_refine(&inst, &cfg).unwrap();
        prop_assert_eq!(again.solution, r.solution);
    }
}
