mod common;

use maintplan::heuristic::{
    grouping_rule, solve_scenario, HeuristicConfig, PhTerms, RuleParams, WorkingEntry, WorkingSet,
};
use maintplan::model::{check_feasibility, ComponentSpec, Scenario, SystemSpec};
use maintplan::oracle::{exact_scenario_optimum, has_anchored_groups, Budget};
use maintplan::scenario::sample_scenarios;
use rand::Rng;

fn entry(component: usize, individual: usize, tentative: u32) -> WorkingEntry {
    WorkingEntry {
        component,
        individual,
        installed: 10,
        failure: tentative as u64 + 1,
        tentative,
    }
}

#[test]
fn four_component_illustration_picks_third_option() {
    let comps = (0..4)
        .map(|_| ComponentSpec::new(3.0, 10.0, 1.0, 5.0))
        .collect();
    let sys = SystemSpec::new(comps, 30, 10.0).unwrap();
    let mut lifetimes = vec![vec![50u32; 30]; 4];
    // Successors that would fail inside the horizon if installed two periods early.
    lifetimes[0][2] = 13;
    lifetimes[2][2] = 11;
    let sc = Scenario::new(lifetimes, 1.0);
    // K' = I23 (16), I12 (18), I32 (20), I44 (22); zero-based component and individual indices.
    let working = WorkingSet::new(
        vec![
            entry(1, 2, 16),
            entry(0, 1, 18),
            entry(2, 1, 20),
            entry(3, 3, 22),
        ],
        4,
        30,
    );
    let mut steps = 0;
    let best = grouping_rule(
        &working,
        RuleParams { iota: 3, delta: 1 },
        &PhTerms::disabled(4),
        &sys,
        &sc,
        &mut steps,
    )
    .unwrap();
    assert_eq!(best.option_index, 3);
    let mut selected: Vec<(usize, u32)> = best
        .selected
        .iter()
        .map(|&(k, t)| (working.entries[k].component, t))
        .collect();
    selected.sort();
    assert_eq!(selected, vec![(1, 16), (2, 20), (3, 20)]);
    assert!(steps > 0);
}

/// Cost of one component's chain when every replacement follows the same
/// rule: `Δ` periods before failure, never before the period after install.
fn rule_chain_cost(sys: &SystemSpec, sc: &Scenario, i: usize, delta: u64) -> f64 {
    let c = &sys.components[i];
    let horizon = sys.horizon as u64;
    let (mut cost, mut r) = (0.0, 0);
    let mut installed = 0u64;
    let mut fails = (sc.lifetimes[i][0] as u64).max(1);
    while fails <= horizon {
        let at = (installed + 1).max(fails.saturating_sub(delta));
        cost += if at == fails { c.cost_cr } else { c.cost_pr };
        installed = at;
        r += 1;
        if r >= sc.individuals(i) {
            break;
        }
        fails = installed + sc.lifetimes[i][r] as u64;
    }
    cost
}

#[test]
fn zero_setup_cost_never_loses_to_independent_rule_chains() {
    let mut rng = common::rng(21);
    let mut exact_hits = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=3);
        let t = rng.gen_range(3..=6);
        let mut sys = common::small_system(&mut rng, n, t);
        sys.setup_cost = 0.0;
        let sc = sample_scenarios(&sys, 1, rng.gen())
            .unwrap()
            .scenarios
            .remove(0);
        let heur = solve_scenario(
            &sys,
            &sc,
            &PhTerms::disabled(n),
            &HeuristicConfig::default(),
            None,
        )
        .unwrap()
        .unwrap();
        let rule = [0, 1]
            .iter()
            .map(|&d| {
                (0..n)
                    .map(|i| rule_chain_cost(&sys, &sc, i, d))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let exact = exact_scenario_optimum(&sys, &sc, None, &Budget::default())
            .unwrap()
            .unwrap();
        assert!(
            heur.cost.total <= rule + 1e-9,
            "heuristic {} rule {rule}",
            heur.cost.total
        );
        assert!(heur.cost.total >= exact.objective - 1e-9);
        exact_hits += usize::from((heur.cost.total - exact.objective).abs() < 1e-9);
    }
    // Chains that need mixed early/at-failure timing are the only misses.
    assert!(exact_hits >= 160, "{exact_hits}/200");
}

#[test]
fn dominant_setup_cost_uses_minimum_setups() {
    let mut rng = common::rng(5);
    for _ in 0..40 {
        let mut sys = common::small_system(&mut rng, 2, 6);
        sys.setup_cost = 1000.0;
        let sc = sample_scenarios(&sys, 1, rng.gen())
            .unwrap()
            .scenarios
            .remove(0);
        let heur = solve_scenario(
            &sys,
            &sc,
            &PhTerms::disabled(2),
            &HeuristicConfig::default(),
            None,
        )
        .unwrap()
        .unwrap();
        let exact = exact_scenario_optimum(&sys, &sc, None, &Budget::default())
            .unwrap()
            .unwrap();
        assert_eq!(
            heur.schedule.setup_times().len(),
            exact.schedule.setup_times().len(),
            "lifetimes {:?}: {:?} vs {:?}",
            sc.lifetimes,
            heur.schedule,
            exact.schedule
        );
    }
}

#[test]
fn outputs_are_feasible_and_anchored() {
    let mut rng = common::rng(13);
    for _ in 0..200 {
        let n = rng.gen_range(1..=4);
        let t = rng.gen_range(2..=12);
        let sys = common::small_system(&mut rng, n, t);
        let sc = sample_scenarios(&sys, 1, rng.gen())
            .unwrap()
            .scenarios
            .remove(0);
        let sol = solve_scenario(
            &sys,
            &sc,
            &PhTerms::disabled(n),
            &HeuristicConfig::default(),
            None,
        )
        .unwrap()
        .unwrap();
        assert!(check_feasibility(&sys, &sc, &sol.schedule).is_empty());
        assert!(
            has_anchored_groups(&sc, &sol.schedule),
            "{:?} {:?}",
            sc.lifetimes,
            sol.schedule
        );
        for (i, c) in sys.components.iter().enumerate() {
            if c.initially_failed {
                assert_eq!(sol.schedule.times[i].first(), Some(&1));
            }
        }
    }
}
