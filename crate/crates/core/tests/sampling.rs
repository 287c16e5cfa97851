use maintplan::model::{ComponentSpec, SystemSpec};
use maintplan::scenario::sample_scenarios;

const DRAWS: usize = 10_000;

fn survival(x: f64, shape: f64, scale: f64) -> f64 {
    (-(x / scale).powf(shape)).exp()
}

fn system(shape: f64, scale: f64, initial_age: u32, horizon: u32) -> SystemSpec {
    let mut sys = SystemSpec::new(
        vec![ComponentSpec::new(shape, scale, 1.0, 5.0).with_initial_age(initial_age)],
        horizon,
        1.0,
    )
    .unwrap();
    sys.individuals = 2;
    sys
}

#[test]
fn fresh_lifetimes_follow_ceil_weibull_cdf() {
    for (shape, scale) in [(2.7, 4.4), (6.5, 9.2), (1.0, 3.0)] {
        let horizon = 40;
        let set = sample_scenarios(&system(shape, scale, 0, horizon), DRAWS, 11).unwrap();
        let mut counts = vec![0usize; horizon as usize + 2];
        for sc in &set.scenarios {
            counts[sc.lifetimes[0][1] as usize] += 1;
        }
        // P(ceil(X) <= a) = F(a); lifetimes past the horizon are capped at T+1.
        let mut cum = 0usize;
        let mut ks: f64 = 0.0;
        for a in 1..=horizon {
            cum += counts[a as usize];
            let emp = cum as f64 / DRAWS as f64;
            ks = ks.max((emp - (1.0 - survival(a as f64, shape, scale))).abs());
        }
        assert_eq!(counts[0], 0);
        assert!(ks < 0.02, "shape {shape} scale {scale}: KS distance {ks}");
    }
}

#[test]
fn residual_draws_match_conditional_mean() {
    for (shape, scale, age) in [(2.7, 4.4, 2), (6.5, 9.2, 5), (2.8, 3.3, 1)] {
        let horizon = 30;
        let sys = system(shape, scale, age, horizon);
        let set = sample_scenarios(&sys, DRAWS, 5).unwrap();
        let draws: Vec<f64> = set
            .scenarios
            .iter()
            .map(|s| s.lifetimes[0][0] as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / DRAWS as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (DRAWS - 1) as f64;
        let se = (var / DRAWS as f64).sqrt();

        // Still working at epoch 1 means the lifetime exceeds age + 1; the
        // residual counts from time 0 and is capped at T + 1.
        let base = survival((age + 1) as f64, shape, scale);
        let cap = horizon + 1 + age;
        let mut analytic = 0.0;
        for l in age + 2..cap {
            let p =
                (survival((l - 1) as f64, shape, scale) - survival(l as f64, shape, scale)) / base;
            analytic += p * (l - age) as f64;
        }
        analytic += survival((cap - 1) as f64, shape, scale) / base * (cap - age) as f64;

        assert!(
            (mean - analytic).abs() <= 3.0 * se,
            "age {age}: sample mean {mean} vs {analytic} (se {se})"
        );
        assert!(draws.iter().all(|&r| r >= 2.0));
    }
}

#[test]
fn different_seeds_give_different_sets() {
    let sys = system(2.7, 4.4, 0, 10);
    let a = sample_scenarios(&sys, 50, 1).unwrap();
    let b = sample_scenarios(&sys, 50, 2).unwrap();
    assert_ne!(a.scenarios, b.scenarios);
    assert_eq!(
        a.scenarios,
        sample_scenarios(&sys, 50, 1).unwrap().scenarios
    );
}
