mod common;

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use common::*;
use mapf_ir::initial::{hca, pibt_complete_seeded};
use mapf_ir::refine::{
    repair_local_goals, select_bottleneck, select_focus_goals, select_random, select_using_mdd,
};
use mapf_ir::search::{Occupancy, SearchLimits};
use mapf_ir::{random_instance, Grid, Instance, Solution};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn solved(w: usize, agents: usize, density: f64, seed: u64) -> Option<(Instance, Solution)> {
    let grid = if density > 0.0 { random_grid(w, w, density, seed) } else { Arc::new(Grid::open(w, w)) };
    let inst = random_instance(grid, agents, seed).ok()?;
    let sol = if seed % 2 == 0 {
        pibt_complete_seeded(&inst, seed).ok()?
    } else {
        hca(&inst, &(0..agents).collect::<Vec<_>>()).ok()?
    };
    assert_valid(&inst, &sol);
    Some((inst, sol))
}

#[test]
fn random_sets_are_uniform() {
    // 120 subsets of size 3 out of 10; chi-square critical value for 119
    // degrees of freedom at the 1% level
    const CRITICAL: f64 = 157.80;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    let draws = 100_000u64;
    for _ in 0..draws {
        *counts.entry(select_random(10, 3, &mut rng).agents).or_default() += 1;
    }
    assert_eq!(counts.len(), 120);
    let expected = draws as f64 / 120.0;
    let stat: f64 = counts.values().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    assert!(stat < CRITICAL, "chi-square {stat}");
}

#[test]
fn local_repair_commits_only_on_strict_gain() {
    let mut commits = 0;
    let mut tried = 0;
    for seed in 0..400u64 {
        if tried == 100 {
            break;
        }
        let Some((inst, sol)) = solved(8, 12, 0.1, seed) else { continue };
        tried += 1;
        let occ = Occupancy::from_solution(inst.grid().node_count(), &sol);
        for i in 0..inst.num_agents() {
            let Some(ch) = repair_local_goals(&inst, &sol, &occ, i, &SearchLimits::none()) else { continue };
            commits += 1;
            let old: usize = ch.iter().map(|(a, _)| sol.cost(*a)).sum();
            let new: usize = ch.iter().map(|(_, p)| p.cost()).sum();
            assert!(new < old);
            assert_eq!(ch[0].0, i);
            let mut out = sol.clone();
            out.replace(ch);
            assert_valid(&inst, &out);
            assert!(out.sum_of_costs() < sol.sum_of_costs());
        }
    }
    assert_eq!(tried, 100);
    assert!(commits > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn focus_goals_matches_definition(seed in 0u64..10_000, agents in 2usize..14) {
        let Some((inst, sol)) = solved(7, agents, 0.1, seed) else { return Ok(()) };
        for i in 0..agents {
            let g = inst.goal(i);
            let lo = inst.dist(i) as usize;
            let hi = sol.cost(i);
            let mut expect: BTreeSet<usize> = BTreeSet::from([i]);
            for j in 0..agents {
                for t in lo..=hi {
                    if sol.path(j).at(t) == g {
                        expect.insert(j);
                    }
                }
            }
            let got: BTreeSet<usize> = select_focus_goals(&inst, &sol, i).agents.into_iter().collect();
            prop_assert_eq!(got, expect);
        }
    }

    #[test]
    fn using_mdd_finds_every_single_blocker(seed in 0u64..10_000, agents in 2usize..7) {
        let Some((inst, sol)) = solved(5, agents, 0.15, seed) else { return Ok(()) };
        for i in 0..agents {
            let m = select_using_mdd(&inst, &sol, i);
            prop_assert!(m.contains(i));
            for c in inst.dist(i) as usize..sol.cost(i) {
                let others: Vec<&mapf_ir::Path> = (0..agents).filter(|&j| j != i).map(|j| sol.path(j)).collect();
                if feasible_at_cost(inst.grid(), inst.start(i), inst.goal(i), c, &others) {
                    continue;
                }
                for j in (0..agents).filter(|&j| j != i) {
                    let rest: Vec<&mapf_ir::Path> =
                        (0..agents).filter(|&x| x != i && x != j).map(|x| sol.path(x)).collect();
                    if feasible_at_cost(inst.grid(), inst.start(i), inst.goal(i), c, &rest) {
                        prop_assert!(m.contains(j), "agent {} blocks {} at cost {}", j, i, c);
                    }
                }
            }
        }
    }

    #[test]
    fn bottleneck_matches_leave_one_out(seed in 0u64..10_000, agents in 2usize..8) {
        let Some((inst, sol)) = solved(6, agents, 0.1, seed) else { return Ok(()) };
        let occ = Occupancy::from_solution(inst.grid().node_count(), &sol);
        for i in 0..agents {
            let mut expect = BTreeSet::from([i]);
            for j in (0..agents).filter(|&j| j != i) {
                let rest: Vec<&mapf_ir::Path> =
                    (0..agents).filter(|&x| x != i && x != j).map(|x| sol.path(x)).collect();
                if best_below(&inst, j, &rest, sol.cost(j)).is_some() {
                    expect.insert(j);
                }
            }
            let got: BTreeSet<usize> =
                select_bottleneck(&inst, &sol, &occ, i, &SearchLimits::none()).agents.into_iter().collect();
            prop_assert_eq!(got, expect);
        }
    }
}
