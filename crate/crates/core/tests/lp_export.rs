mod common;

use maintplan::lp::{
    assignment_for, brute_force_optimum, build_def_model, export_def_lp, parse_lp,
};
use maintplan::oracle::{exact_def_optimum, exact_scenario_optimum, Budget};
use maintplan::scenario::sample_scenarios;
use rand::Rng;

#[test]
fn brute_force_matches_exact_extensive_form() {
    let mut rng = common::rng(8);
    for case in 0..20 {
        let (n, t) = if case % 2 == 0 {
            (1, rng.gen_range(2..=4))
        } else {
            (2, rng.gen_range(2..=3))
        };
        let sys = common::small_system(&mut rng, n, t);
        let set = sample_scenarios(&sys, rng.gen_range(1..=2), rng.gen()).unwrap();
        let mut text = Vec::new();
        let manifest = export_def_lp(&sys, &set, &mut text).unwrap();
        let model = parse_lp(std::str::from_utf8(&text).unwrap()).unwrap();
        assert_eq!(manifest.variables, manifest.closed_form_variables);
        assert_eq!(model.variables().len(), manifest.variables);

        let exact = exact_def_optimum(&sys, &set, &Budget::default()).unwrap();
        let brute = brute_force_optimum(&model, &sys, &set, &Budget::default())
            .unwrap()
            .unwrap();
        let e = exact.decision.objective_estimate;
        assert!(
            (brute - e).abs() < 1e-6 * (1.0 + e.abs()),
            "case {case}: lp {brute} exact {e}"
        );

        // The optimal schedules themselves satisfy every row and price identically.
        let x = &exact.decision.x;
        let schedules: Vec<_> = set
            .scenarios
            .iter()
            .map(|sc| {
                exact_scenario_optimum(&sys, sc, Some(x), &Budget::default())
                    .unwrap()
                    .unwrap()
                    .schedule
            })
            .collect();
        let a = assignment_for(&sys, &set, &schedules).unwrap();
        let (obj, violated) = model.evaluate(&a);
        assert!(violated.is_empty(), "case {case}: {violated:?}");
        assert!((obj - e).abs() < 1e-6 * (1.0 + e.abs()));
    }
}

#[test]
fn parsed_model_equals_built_model() {
    let mut rng = common::rng(3);
    let sys = common::small_system(&mut rng, 3, 6);
    let set = sample_scenarios(&sys, 4, 11).unwrap();
    let built = build_def_model(&sys, &set).unwrap();
    let mut text = Vec::new();
    built.write(&mut text).unwrap();
    assert_eq!(
        parse_lp(std::str::from_utf8(&text).unwrap()).unwrap(),
        built
    );
}
