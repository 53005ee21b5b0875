mod common;

use common::*;
use mapf_ir::mdd::build_mdd;
use mapf_ir::refine::{
    refine_from, repair_local_goals, select_bottleneck, select_focus_goals, select_using_mdd,
    RefineConfig, Rule,
};
use mapf_ir::search::{icbs_full, icbs_subset, Occupancy, SearchLimits, SubsetOutcome};
use std::time::Instant;

fn occ_of(instance: &mapf_ir::Instance, s: &mapf_ir::Solution) -> Occupancy {
    Occupancy::from_solution(instance.grid().node_count(), s)
}

#[test]
fn local_minimum_costs() {
    for k in [6, 10, 20] {
        let (inst, sol) = local_minimum_gadget(k);
        assert_valid(&inst, &sol);
        assert_eq!(sol.sum_of_costs(), k as u64 + 1);
        assert_eq!(joint_optimum(&inst, 1_000_000), Some(6));
        assert_eq!(icbs_full(&inst, &SearchLimits::none()).unwrap().sum_of_costs(), 6);
    }
}

#[test]
fn local_minimum_proper_subsets_are_stuck() {
    for k in [6, 10, 20] {
        let (inst, sol) = local_minimum_gadget(k);
        for m in [vec![0], vec![1]] {
            assert_eq!(icbs_subset(&inst, &m, &sol, &SearchLimits::none()), SubsetOutcome::NoImprovement);
        }
        match icbs_subset(&inst, &[0, 1], &sol, &SearchLimits::none()) {
            SubsetOutcome::Improved(s) => {
                assert_valid(&inst, &s);
                assert_eq!(s.sum_of_costs(), 6);
            }
            other => panic!("k={k}: {other:?}"),
        }
    }
}

#[test]
fn local_minimum_escapes_only_through_the_full_set() {
    let (inst, sol) = local_minimum_gadget(8);
    // focus-goals and local-repair only ever see one agent here
    for rules in [vec![Rule::Single], vec![Rule::FocusGoals], vec![Rule::LocalRepair], vec![Rule::Random]] {
        let cfg = RefineConfig {
            rules: rules.clone(),
            random_k: Some(1),
            ..RefineConfig::deterministic(40)
        };
        let r = refine_from(&inst, sol.clone(), "seeded", &cfg, Instant::now(), |_, _| {});
        assert_eq!(r.solution.sum_of_costs(), 9, "{rules:?}");
    }
    // using-mdd sees that a2 blocks a1's cost-3 route and selects both
    assert_eq!(select_using_mdd(&inst, &sol, 0).agents, vec![0, 1]);
    let cfg = RefineConfig {
        rules: vec![Rule::UsingMdd],
        ..RefineConfig::deterministic(10)
    };
    let r = refine_from(&inst, sol, "seeded", &cfg, Instant::now(), |_, _| {});
    assert_eq!(r.solution.sum_of_costs(), 6);
}

#[test]
fn focus_goals_on_repair_gadget() {
    let (inst, sol) = local_repair_gadget(false);
    assert_valid(&inst, &sol);
    assert_eq!(select_focus_goals(&inst, &sol, 0).agents, vec![0, 1]);
    assert_eq!(select_focus_goals(&inst, &sol, 1).agents, vec![1]);
}

#[test]
fn local_repair_walkthrough() {
    let (inst, sol) = local_repair_gadget(false);
    let occ = occ_of(&inst, &sol);
    let ch = repair_local_goals(&inst, &sol, &occ, 0, &SearchLimits::none()).expect("repair applies");
    let mut out = sol.clone();
    out.replace(ch);
    assert_valid(&inst, &out);
    // a1 parks: (v2, v3, v3, v3, v3)
    let padded: Vec<_> = (0..5).map(|t| out.path(0).at(t)).collect();
    assert_eq!(padded, nodes(&[1, 2, 2, 2, 2]));
    let best = brute_best(&inst, 1, &[out.path(0)], 6).unwrap();
    assert_eq!(out.cost(1), best);
    assert_eq!(best, 5);
    assert_eq!(out.sum_of_costs(), 6);
}

#[test]
fn local_repair_needs_a_strict_gain() {
    let (inst, sol) = local_repair_gadget(true);
    assert_valid(&inst, &sol);
    let parked = path(&[1, 2]);
    assert_eq!(brute_best(&inst, 1, &[&parked], 8), Some(6));
    let occ = occ_of(&inst, &sol);
    assert!(repair_local_goals(&inst, &sol, &occ, 0, &SearchLimits::none()).is_none());
}

#[test]
fn mdd_walkthrough() {
    let (inst, sol) = mdd_gadget();
    assert_valid(&inst, &sol);
    assert_eq!(inst.dist(0), 2);
    let mut mdd = build_mdd(inst.grid(), inst.start(0), inst.goal(0), 2);
    assert!(mdd.contains(n(3), 1));
    assert_eq!(mdd.vertex_count(), 3);
    let rep = mdd.prune_by_path(sol.path(1));
    assert_eq!(rep.conflicting, vec![(n(3), 1)]);
    assert!(rep.cut_edges.is_empty());
    let mut red = rep.redundant.clone();
    red.sort();
    assert_eq!(red, vec![(n(2), 0), (n(4), 2)]);
    assert!(mdd.is_empty());
    assert_eq!(select_using_mdd(&inst, &sol, 0).agents, vec![0, 1]);
    assert_eq!(select_using_mdd(&inst, &sol, 1).agents, vec![1]);
}

#[test]
fn mdd_three_layers() {
    let (inst, _) = mdd_gadget();
    let mdd = build_mdd(inst.grid(), inst.start(0), inst.goal(0), 3);
    let mut expect = std::collections::BTreeSet::new();
    for w in walks(inst.grid(), inst.start(0), inst.goal(0), 3) {
        for (t, v) in w.into_iter().enumerate() {
            expect.insert((v, t));
        }
    }
    let got: std::collections::BTreeSet<_> = mdd.vertices().collect();
    assert_eq!(got, expect);
}

#[test]
fn bottleneck_walkthrough() {
    let (inst, sol) = mdd_gadget();
    let occ = occ_of(&inst, &sol);
    let m = select_bottleneck(&inst, &sol, &occ, 1, &SearchLimits::none());
    assert!(m.contains(0) && m.contains(1));
    assert_eq!(brute_best(&inst, 0, &[], 3), Some(2));
    assert_eq!(brute_best(&inst, 0, &[sol.path(1)], 4), Some(3));
}

#[test]
fn gadgets_converge_under_composition() {
    for (inst, sol) in [local_repair_gadget(false), local_repair_gadget(true), mdd_gadget()] {
        let opt = joint_optimum(&inst, 100_000).unwrap();
        let r = refine_from(&inst, sol, "seeded", &RefineConfig::deterministic(50), Instant::now(), |_, _| {});
        assert_valid(&inst, &r.solution);
        assert_eq!(r.solution.sum_of_costs(), opt);
    }
}
