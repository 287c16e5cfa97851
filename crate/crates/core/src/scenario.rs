//! Lifetime discretization, scenario sampling and sample-size rules.
//!
//! A continuous lifetime `X` is observed in whole periods as `L = ceil(X)`,
//! so `P(L > a) = P(X > a)` for every integer `a`. The first individual of a
//! working component is known to be alive at the first decision epoch (age
//! `initial_age + 1`), so its lifetime is drawn conditional on
//! `L > initial_age + 1` and its residual is `L - initial_age >= 2`.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComponentSpec, Scenario, SystemSpec};

/// Survival `P(X > x)` of a Weibull law.
pub fn weibull_survival(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        (-(x / scale).powf(shape)).exp()
    }
}

pub fn weibull_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-(x / scale).powf(shape)).exp_m1()
    }
}

// Absorbs round-off so an exact integer draw is not pushed to the next period.
const CEIL_SLACK: f64 = 1e-9;

/// Integer lifetime from a uniform draw, conditional on `L > min_age`:
/// `ceil(F⁻¹(F(m) + u (1 - F(m))))`, clamped to at least `min_age + 1`.
pub fn discretize_lifetime(u: f64, component: &ComponentSpec, min_age: u32) -> Result<u32> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::invalid(format!("uniform draw {u} outside (0, 1)")));
    }
    let k = component.shape;
    let lam = component.scale;
    // S(x) = S(m) (1 - u)  <=>  (x/λ)^k = (m/λ)^k - ln(1 - u)
    let base = (min_age as f64 / lam).powf(k);
    let x = lam * (base - (-u).ln_1p()).powf(1.0 / k);
    let ceiled = (x - CEIL_SLACK * x.max(1.0)).ceil();
    let floor = min_age as f64 + 1.0;
    Ok(ceiled.max(floor).min(u32::MAX as f64) as u32)
}

/// Discrete hazard `h_i(a) = P(L = a | L >= a)` used by both the exact
/// multi-stage model and the simulated true process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HazardModel {
    /// Ceil-discretized Weibull from each component's shape and scale.
    Weibull,
    /// Nothing ever fails.
    Zero,
    /// Explicit `h_i(1), h_i(2), ...` per component; the last entry repeats.
    Table(Vec<Vec<f64>>),
}

impl HazardModel {
    pub fn hazard(&self, system: &SystemSpec, i: usize, age: u32) -> f64 {
        if age == 0 {
            return 0.0;
        }
        match self {
            HazardModel::Weibull => {
                let c = &system.components[i];
                let hi = (age as f64 / c.scale).powf(c.shape);
                let lo = ((age - 1) as f64 / c.scale).powf(c.shape);
                // 1 - S(a)/S(a-1), capped at 1
                (-(-(hi - lo)).exp_m1()).clamp(0.0, 1.0)
            }
            HazardModel::Zero => 0.0,
            HazardModel::Table(rows) => {
                let row = &rows[i];
                let idx = (age as usize - 1).min(row.len().saturating_sub(1));
                row.get(idx).copied().unwrap_or(0.0).clamp(0.0, 1.0)
            }
        }
    }

    /// `P(L > age)` under this model.
    pub fn survival(&self, system: &SystemSpec, i: usize, age: u32) -> f64 {
        match self {
            HazardModel::Weibull => {
                let c = &system.components[i];
                weibull_survival(age as f64, c.shape, c.scale)
            }
            _ => (1..=age).map(|a| 1.0 - self.hazard(system, i, a)).product(),
        }
    }

    /// Lifetime conditional on `L > min_age`, by inversion. Lifetimes that
    /// would exceed `cap` are reported as `cap`.
    pub fn sample_lifetime(
        &self,
        system: &SystemSpec,
        i: usize,
        u: f64,
        min_age: u32,
        cap: u32,
    ) -> Result<u32> {
        if let HazardModel::Weibull = self {
            return discretize_lifetime(u, &system.components[i], min_age)
                .map(|l| l.min(cap.max(min_age + 1)));
        }
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::invalid(format!("uniform draw {u} outside (0, 1)")));
        }
        // L = min{a : S(a)/S(m) <= 1 - u}
        let target = 1.0 - u;
        let mut ratio = 1.0;
        let mut age = min_age;
        while age < cap.max(min_age + 1) {
            age += 1;
            ratio *= 1.0 - self.hazard(system, i, age);
            if ratio <= target {
                return Ok(age);
            }
        }
        Ok(cap.max(min_age + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    pub seed: u64,
    /// `T'` across the set.
    pub extended_horizon: u64,
}

impl ScenarioSet {
    /// Wraps scenarios with uniform probability `1/|Ω|`.
    pub fn uniform(mut scenarios: Vec<Scenario>, horizon: u32, seed: u64) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::invalid("scenario set must not be empty"));
        }
        let p = 1.0 / scenarios.len() as f64;
        for s in &mut scenarios {
            s.probability = p;
        }
        let extended_horizon = scenarios
            .iter()
            .map(|s| s.extended_horizon(horizon))
            .max()
            .unwrap_or(horizon as u64);
        Ok(Self {
            scenarios,
            seed,
            extended_horizon,
        })
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn validate(&self, system: &SystemSpec) -> Result<()> {
        let total: f64 = self.scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "scenario probabilities sum to {total}"
            )));
        }
        self.scenarios.iter().try_for_each(|s| s.validate(system))
    }
}

pub fn sample_scenarios(system: &SystemSpec, count: usize, seed: u64) -> Result<ScenarioSet> {
    sample_scenarios_with(system, count, seed, &HazardModel::Weibull)
}

/// Draws `count` scenarios. Scenario `k` uses ChaCha stream `k` of `seed`
/// and consumes one draw per (component, individual) in row-major order, so
/// a set is a prefix of any larger set with the same seed.
pub fn sample_scenarios_with(
    system: &SystemSpec,
    count: usize,
    seed: u64,
    law: &HazardModel,
) -> Result<ScenarioSet> {
    if count == 0 {
        return Err(Error::invalid("need at least one scenario"));
    }
    system.validate()?;
    let q = system.individuals as usize;
    // Anything beyond the horizon is equivalent to "never fails" here.
    let cap = system.horizon.saturating_add(1).max(2);
    let scenarios = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let lifetimes = system
                .components
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    (0..q)
                        .map(|r| {
                            let u: f64 = rng.sample(Open01);
                            if r == 0 {
                                if c.initially_failed {
                                    Ok(0)
                                } else {
                                    let survived = c.initial_age + 1;
                                    let life = law.sample_lifetime(
                                        system,
                                        i,
                                        u,
                                        survived,
                                        cap.saturating_add(c.initial_age),
                                    )?;
                                    Ok(life - c.initial_age)
                                }
                            } else {
                                law.sample_lifetime(system, i, u, 0, cap)
                            }
                        })
                        .collect::<Result<Vec<u32>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Scenario::new(lifetimes, 1.0 / count as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    ScenarioSet::uniform(scenarios, system.horizon, seed)
}

/// Upper bound `b = 2T(Σ c_cr + d)` on the cost spread, used as `σ`.
pub fn cost_bound(system: &SystemSpec) -> f64 {
    let cr: f64 = system.components.iter().map(|c| c.cost_cr).sum();
    2.0 * system.horizon as f64 * (cr + system.setup_cost)
}

/// Count of first-stage decisions `|X| = 2^(n - failed)`: failed components
/// are forced and the setup indicator follows from the replacements.
pub fn first_stage_count(system: &SystemSpec) -> f64 {
    let free = system
        .components
        .iter()
        .filter(|c| !c.initially_failed)
        .count();
    2f64.powi(free as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaaParams {
    pub epsilon: f64,
    pub tau: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub first_stage_count: f64,
}

impl SaaParams {
    /// `ε = 0.1σ`, `τ = 0.1ε`, `α = 0.1`.
    pub fn standard(sigma: f64, first_stage_count: f64) -> Self {
        let epsilon = 0.1 * sigma;
        Self {
            epsilon,
            tau: 0.1 * epsilon,
            alpha: 0.1,
            sigma,
            first_stage_count,
        }
    }

    pub fn for_system(system: &SystemSpec) -> Self {
        Self::standard(cost_bound(system), first_stage_count(system))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau < self.epsilon) {
            return Err(Error::invalid(format!(
                "need 0 <= tau < epsilon, got tau={} epsilon={}",
                self.tau, self.epsilon
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1)"));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::invalid("sigma must be > 0"));
        }
        if !(self.first_stage_count > 0.0) {
            return Err(Error::invalid("first-stage decision count must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// `2σ²/(ε-τ)² · ln(|X|/α)`, floored at zero.
    pub raw: f64,
    /// `raw` rounded to the nearest multiple of ten.
    pub rounded: u64,
}

pub fn required_sample_size(params: &SaaParams) -> Result<SampleSize> {
    params.validate()?;
    let gap = params.epsilon - params.tau;
    let log_term = (params.first_stage_count / params.alpha).ln();
    let raw = (2.0 * params.sigma * params.sigma / (gap * gap) * log_term).max(0.0);
    let rounded = ((raw / 10.0).round() * 10.0) as u64;
    Ok(SampleSize { raw, rounded })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(shape: f64, scale: f64) -> ComponentSpec {
        ComponentSpec::new(shape, scale, 1.0, 10.0)
    }

    #[test]
    fn closed_form_draws() {
        assert_eq!(discretize_lifetime(0.5, &comp(2.0, 5.0), 0).unwrap(), 5);
        let u = 1.0 - (-3.0f64).exp();
        assert_eq!(discretize_lifetime(u, &comp(1.0, 1.0), 0).unwrap(), 3);
        assert_eq!(discretize_lifetime(1e-300, &comp(2.0, 5.0), 0).unwrap(), 1);
    }

    #[test]
    fn draw_outside_unit_interval_rejected() {
        assert!(discretize_lifetime(0.0, &comp(2.0, 5.0), 0).is_err());
        assert!(discretize_lifetime(1.0, &comp(2.0, 5.0), 0).is_err());
    }

    #[test]
    fn conditional_draw_exceeds_min_age() {
        for k in 1..100 {
            let u = k as f64 / 100.0;
            assert!(discretize_lifetime(u, &comp(5.0, 3.0), 7).unwrap() >= 8);
        }
    }

    #[test]
    fn weibull_hazard_matches_survival_ratio() {
        let sys = SystemSpec::new(vec![comp(2.5, 4.0)], 10, 1.0).unwrap();
        for a in 1..12u32 {
            let s0 = weibull_survival((a - 1) as f64, 2.5, 4.0);
            let s1 = weibull_survival(a as f64, 2.5, 4.0);
            let h = HazardModel::Weibull.hazard(&sys, 0, a);
            assert!((h - (1.0 - s1 / s0)).abs() < 1e-12);
        }
    }

    #[test]
    fn table_sampling_inverts_hazards() {
        let sys = SystemSpec::new(vec![comp(2.0, 2.0)], 10, 1.0).unwrap();
        let law = HazardModel::Table(vec![vec![0.0, 0.5, 1.0]]);
        assert_eq!(law.sample_lifetime(&sys, 0, 0.4, 0, 50).unwrap(), 2);
        assert_eq!(law.sample_lifetime(&sys, 0, 0.6, 0, 50).unwrap(), 3);
        assert_eq!(
            HazardModel::Zero
                .sample_lifetime(&sys, 0, 0.6, 0, 11)
                .unwrap(),
            11
        );
    }

    #[test]
    fn bound_is_linear_in_horizon() {
        let comps = vec![
            ComponentSpec::new(6.5, 6.9, 1.0, 14.4),
            ComponentSpec::new(6.7, 5.0, 1.0, 11.4),
        ];
        let sys = SystemSpec::new(comps, 10, 5.0).unwrap();
        assert!((cost_bound(&sys) - 616.0).abs() < 1e-9);
        assert!((cost_bound(&sys.with_horizon(20)) - 1232.0).abs() < 1e-9);
        let tiny = SystemSpec::new(vec![ComponentSpec::new(1.0, 1.0, 0.5, 1.0)], 1, 0.0).unwrap();
        assert_eq!(cost_bound(&tiny), 2.0);
    }

    #[test]
    fn sample_size_table_entries() {
        let at = |x: f64| {
            required_sample_size(&SaaParams::standard(616.0, x))
                .unwrap()
                .rounded
        };
        assert_eq!(at(2.0), 740);
        assert_eq!(at(64.0), 1600);
        let unit = SaaParams {
            first_stage_count: 0.1,
            ..SaaParams::standard(1.0, 1.0)
        };
        assert_eq!(required_sample_size(&unit).unwrap().raw, 0.0);
    }

    #[test]
    fn tau_not_below_epsilon_rejected() {
        let p = SaaParams {
            tau: 1.0,
            ..SaaParams::standard(10.0, 4.0)
        };
        assert!(required_sample_size(&p).is_err());
    }

    #[test]
    fn failed_component_has_zero_residual_everywhere() {
        let comps = vec![comp(3.0, 4.0).failed(), comp(3.0, 4.0).with_initial_age(2)];
        let sys = SystemSpec::new(comps, 8, 2.0).unwrap();
        let set = sample_scenarios(&sys, 200, 11).unwrap();
        for s in &set.scenarios {
            assert_eq!(s.lifetimes[0][0], 0);
            assert!(s.lifetimes[1][0] >= 2);
            assert_eq!(s.lifetimes[0].len(), 8);
        }
        set.validate(&sys).unwrap();
    }

    #[test]
    fn sets_are_reproducible_and_prefix_stable() {
        let sys = SystemSpec::new(vec![comp(3.0, 4.0), comp(1.5, 2.0)], 6, 2.0).unwrap();
        let a = sample_scenarios(&sys, 50, 7).unwrap();
        let b = sample_scenarios(&sys, 50, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_scenarios(&sys, 80, 7).unwrap();
        for (x, y) in a.scenarios.iter().zip(&c.scenarios) {
            assert_eq!(x.lifetimes, y.lifetimes);
        }
        let d = sample_scenarios(&sys, 50, 8).unwrap();
        assert_ne!(a, d);
    }
}
