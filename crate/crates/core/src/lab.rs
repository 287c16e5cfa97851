//! Direct-grouping benchmark and the rolling-horizon experiment harness.

use std::io::Write;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::HeuristicConfig;
use crate::model::{ComponentSpec, Scenario, SystemSpec};
use crate::oracle::{exact_def_optimum, exact_multistage_value, Budget, ValueTable};
use crate::pha::{run_pha, HeuristicSubSolver, PhaConfig};
use crate::scenario::{
    required_sample_size, sample_scenarios_with, HazardModel, SaaParams, ScenarioSet,
};

/// Periodic age-replacement plan of one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TentativePlan {
    pub component: usize,
    /// Replacement age `a*`.
    pub age: u32,
    /// Planned preventive epochs within the horizon.
    pub times: Vec<u32>,
}

/// Age minimizing `[c_pr S(a) + c_cr (1 - S(a)) + d?] / Σ_{k<a} S(k)` over
/// `1..=cap`; ties go to the smaller age.
pub fn optimal_age(
    system: &SystemSpec,
    i: usize,
    include_setup: bool,
    hazard: &HazardModel,
    cap: u32,
) -> u32 {
    let c = &system.components[i];
    let d = if include_setup {
        system.setup_cost
    } else {
        0.0
    };
    let mut cycle = 0.0;
    let mut best = (f64::INFINITY, 1);
    for a in 1..=cap.max(1) {
        cycle += hazard.survival(system, i, a - 1);
        let s = hazard.survival(system, i, a);
        if cycle <= 0.0 {
            break;
        }
        let rate = (c.cost_pr * s + c.cost_cr * (1.0 - s) + d) / cycle;
        if rate < best.0 - 1e-12 {
            best = (rate, a);
        }
    }
    best.1
}

/// Ages beyond this, or beyond the point where survival is negligible, are
/// never worth planning for.
const AGE_LIMIT: u32 = 1000;

fn age_cap(system: &SystemSpec, i: usize, hazard: &HazardModel) -> u32 {
    (1..AGE_LIMIT)
        .find(|&a| hazard.survival(system, i, a) < 1e-9)
        .unwrap_or(AGE_LIMIT)
}

/// The age rule is an infinite-horizon policy, so `a*` does not depend on
/// the remaining horizon; only the planned epochs are clipped to it.
pub fn individual_tentative_schedule(
    system: &SystemSpec,
    i: usize,
    include_setup: bool,
    hazard: &HazardModel,
) -> TentativePlan {
    let horizon = system.horizon;
    let age = optimal_age(system, i, include_setup, hazard, age_cap(system, i, hazard));
    let c = &system.components[i];
    let first = if c.initially_failed {
        1
    } else {
        age.saturating_sub(c.initial_age).max(1)
    };
    let times = (0..)
        .map(|k| first + k * age)
        .take_while(|&t| t <= horizon)
        .collect();
    TentativePlan {
        component: i,
        age,
        times,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedGroup {
    pub members: Vec<usize>,
    pub time: u32,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingPlan {
    pub groups: Vec<PlannedGroup>,
    /// Components with no planned replacement inside the horizon.
    pub unplanned: Vec<usize>,
    pub expected_cost: f64,
    pub first_stage: Vec<bool>,
}

/// Cost of component `i` in one scenario after its replacement at `s` by
/// individual `r`, following the age rule alone.
fn age_chain_cost(
    system: &SystemSpec,
    scenario: &Scenario,
    i: usize,
    age: u32,
    mut r: usize,
    mut s: u32,
) -> f64 {
    let c = &system.components[i];
    let horizon = system.horizon;
    let mut cost = 0.0;
    while r < scenario.individuals(i) {
        let f = scenario.failure_epoch(i, r, s);
        let planned = s.saturating_add(age);
        if (planned as u64) < f && planned <= horizon {
            cost += c.cost_pr + system.setup_cost;
            s = planned;
        } else if f <= horizon as u64 {
            cost += c.cost_cr + system.setup_cost;
            s = f as u32;
        } else {
            break;
        }
        r += 1;
    }
    cost
}

/// Sample-average cost of replacing `members`' first individuals together at
/// the best common epoch between their earliest and latest planned epochs.
/// A member failing earlier is replaced correctively on its own; later
/// individuals follow each member's age rule.
pub fn group_cost(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    plans: &[TentativePlan],
    members: &[usize],
) -> (f64, u32) {
    let firsts = members
        .iter()
        .filter_map(|&k| plans[k].times.first().copied());
    let lo = firsts.clone().min().unwrap_or(1);
    let hi = firsts.max().unwrap_or(system.horizon);
    let mut best = (f64::INFINITY, lo);
    for tau in lo..=hi {
        let mut total = 0.0;
        for sc in &scenarios.scenarios {
            let mut cost = 0.0;
            let mut shared = false;
            for &k in members {
                let plan = &plans[k];
                let i = plan.component;
                let c = &system.components[i];
                let f = sc.failure_epoch(i, 0, 0);
                let s = if f < tau as u64 {
                    cost += c.cost_cr + system.setup_cost;
                    f as u32
                } else {
                    shared = true;
                    cost += c.replacement_cost(f == tau as u64);
                    tau
                };
                cost += age_chain_cost(system, sc, i, plan.age, 1, s);
            }
            if shared {
                cost += system.setup_cost;
            }
            total += sc.probability * cost;
        }
        if total < best.0 - 1e-12 {
            best = (total, tau);
        }
    }
    best
}

/// Dynamic program over consecutive groups of the components sorted by
/// their first planned epoch, with backtracking.
pub fn direct_grouping_plan(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    plans: &[TentativePlan],
) -> Result<GroupingPlan> {
    if plans.len() != system.n() {
        return Err(Error::invalid("need one tentative plan per component"));
    }
    let mut order: Vec<usize> = (0..plans.len())
        .filter(|&k| !plans[k].times.is_empty())
        .collect();
    order.sort_by_key(|&k| (plans[k].times[0], plans[k].component));
    let unplanned: Vec<usize> = (0..plans.len())
        .filter(|&k| plans[k].times.is_empty())
        .map(|k| plans[k].component)
        .collect();

    let m = order.len();
    let mut f = vec![0.0; m + 1];
    let mut cut = vec![0usize; m + 1];
    let mut chosen: Vec<(f64, u32)> = vec![(0.0, 0); m + 1];
    let mut cache = std::collections::HashMap::new();
    for j in 1..=m {
        f[j] = f64::INFINITY;
        for i in 1..=j {
            let (c, tau) = *cache
                .entry((i, j))
                .or_insert_with(|| group_cost(system, scenarios, plans, &order[i - 1..j]));
            if f[i - 1] + c < f[j] - 1e-12 {
                f[j] = f[i - 1] + c;
                cut[j] = i;
                chosen[j] = (c, tau);
            }
        }
    }
    let mut groups = Vec::new();
    let mut j = m;
    while j > 0 {
        let i = cut[j];
        groups.push(PlannedGroup {
            members: order[i - 1..j]
                .iter()
                .map(|&k| plans[k].component)
                .collect(),
            time: chosen[j].1,
            cost: chosen[j].0,
        });
        j = i - 1;
    }
    groups.reverse();

    let mut expected_cost = f[m];
    for &i in &unplanned {
        let age = plans
            .iter()
            .find(|p| p.component == i)
            .map(|p| p.age)
            .unwrap_or(u32::MAX);
        expected_cost += scenarios
            .scenarios
            .iter()
            .map(|sc| {
                let c = &system.components[i];
                let f1 = sc.failure_epoch(i, 0, 0);
                let own = if f1 <= system.horizon as u64 {
                    c.cost_cr + system.setup_cost + age_chain_cost(system, sc, i, age, 1, f1 as u32)
                } else {
                    0.0
                };
                sc.probability * own
            })
            .sum::<f64>();
    }
    let mut first_stage = system.failed_mask();
    for g in &groups {
        if g.time == 1 {
            for &i in &g.members {
                first_stage[i] = true;
            }
        }
    }
    Ok(GroupingPlan {
        groups,
        unplanned,
        expected_cost,
        first_stage,
    })
}

/// Planner used at each rolling period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Planner {
    PhaHeuristic,
    DirectGrouping,
    OracleExact,
    Mdp,
    /// Replace failed components only.
    None,
}

impl std::str::FromStr for Planner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pha-heuristic" => Ok(Planner::PhaHeuristic),
            "direct-grouping" => Ok(Planner::DirectGrouping),
            "oracle-exact" => Ok(Planner::OracleExact),
            "mdp" => Ok(Planner::Mdp),
            "none" => Ok(Planner::None),
            other => Err(Error::invalid(format!("unknown planner {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingConfig {
    pub planner: Planner,
    pub replications: usize,
    pub seed: u64,
    /// Scenarios per period; `None` applies the sample-size rule.
    pub scenarios: Option<usize>,
    pub hazard: HazardModel,
    pub pha: PhaConfig,
    pub heuristic: HeuristicConfig,
    pub budget: Budget,
}

impl RollingConfig {
    pub fn new(planner: Planner) -> Self {
        Self {
            planner,
            replications: 5,
            seed: 0,
            scenarios: None,
            hazard: HazardModel::Weibull,
            pha: PhaConfig::default(),
            heuristic: HeuristicConfig::default(),
            budget: Budget::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: u32,
    /// Ages at observation.
    pub ages: Vec<u32>,
    pub failed: Vec<bool>,
    pub replaced: Vec<bool>,
    pub pr_cost: f64,
    pub cr_cost: f64,
    pub setup_cost: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub periods: Vec<PeriodRecord>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingRun {
    pub planner: Planner,
    pub seed: u64,
    pub replications: Vec<Replication>,
    pub mean: f64,
    pub std_error: f64,
}

/// Prices one period's action.
pub fn period_cost(system: &SystemSpec, failed: &[bool], replaced: &[bool]) -> (f64, f64, f64) {
    let (mut pr, mut cr) = (0.0, 0.0);
    for (i, c) in system.components.iter().enumerate() {
        if replaced[i] {
            if failed[i] {
                cr += c.cost_cr;
            } else {
                pr += c.cost_pr;
            }
        }
    }
    let setup = if replaced.iter().any(|&r| r) {
        system.setup_cost
    } else {
        0.0
    };
    (pr, cr, setup)
}

impl RollingRun {
    /// Re-prices every logged action and sums per replication.
    pub fn replay_totals(&self, system: &SystemSpec) -> Vec<f64> {
        self.replications
            .iter()
            .map(|rep| {
                rep.periods
                    .iter()
                    .map(|p| {
                        let (a, b, c) = period_cost(system, &p.failed, &p.replaced);
                        a + b + c
                    })
                    .sum()
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "replication",
            "period",
            "ages",
            "failed",
            "replaced",
            "pr_cost",
            "cr_cost",
            "setup_cost",
            "cost",
        ])?;
        let bits = |v: &[bool]| {
            v.iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect::<String>()
        };
        for rep in &self.replications {
            for p in &rep.periods {
                let ages: Vec<String> = p.ages.iter().map(|a| a.to_string()).collect();
                w.write_record([
                    rep.index.to_string(),
                    p.period.to_string(),
                    ages.join(";"),
                    bits(&p.failed),
                    bits(&p.replaced),
                    p.pr_cost.to_string(),
                    p.cr_cost.to_string(),
                    p.setup_cost.to_string(),
                    p.cost.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> RollingSummary {
        RollingSummary {
            planner: self.planner,
            seed: self.seed,
            replications: self.replications.len(),
            totals: self.replications.iter().map(|r| r.total).collect(),
            mean: self.mean,
            std_error: self.std_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingSummary {
    pub planner: Planner,
    pub seed: u64,
    pub replications: usize,
    pub totals: Vec<f64>,
    pub mean: f64,
    pub std_error: f64,
}

/// Sub-instance for the remaining periods from `period` on, given the
/// observed state.
pub fn remaining_instance(
    system: &SystemSpec,
    period: u32,
    ages: &[u32],
    failed: &[bool],
) -> Result<SystemSpec> {
    let comps: Vec<ComponentSpec> = system
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut c = c.clone().with_initial_age(ages[i].saturating_sub(1));
            c.initially_failed = failed[i];
            c
        })
        .collect();
    let mut sub = SystemSpec::new(comps, system.horizon - period + 1, system.setup_cost)?;
    sub.period_len = system.period_len;
    Ok(sub)
}

fn scenario_seed(seed: u64, replication: usize, period: u32) -> u64 {
    seed ^ ((replication as u64 + 1) << 40) ^ ((period as u64) << 20)
}

struct Decider<'a> {
    config: &'a RollingConfig,
    table: Option<ValueTable>,
}

impl Decider<'_> {
    fn decide(
        &self,
        system: &SystemSpec,
        replication: usize,
        period: u32,
        ages: &[u32],
        failed: &[bool],
    ) -> Result<Vec<bool>> {
        let cfg = self.config;
        let mut x = match cfg.planner {
            Planner::None => failed.to_vec(),
            Planner::Mdp => self
                .table
                .as_ref()
                .expect("value table built for the mdp planner")
                .action(period, ages, failed),
            Planner::PhaHeuristic | Planner::DirectGrouping | Planner::OracleExact => {
                let sub = remaining_instance(system, period, ages, failed)?;
                let count = match cfg.scenarios {
                    Some(c) => c,
                    None => (required_sample_size(&SaaParams::for_system(&sub))?.rounded as usize)
                        .max(1),
                };
                let set = sample_scenarios_with(
                    &sub,
                    count,
                    scenario_seed(cfg.seed, replication, period),
                    &cfg.hazard,
                )?;
                match cfg.planner {
                    Planner::PhaHeuristic => {
                        let sub_solver = HeuristicSubSolver {
                            config: cfg.heuristic.clone(),
                        };
                        run_pha(&sub, &set, &cfg.pha, &sub_solver)?.decision.x
                    }
                    Planner::DirectGrouping => {
                        let plans: Vec<TentativePlan> = (0..sub.n())
                            .map(|i| individual_tentative_schedule(&sub, i, true, &cfg.hazard))
                            .collect();
                        direct_grouping_plan(&sub, &set, &plans)?.first_stage
                    }
                    _ => exact_def_optimum(&sub, &set, &cfg.budget)?.decision.x,
                }
            }
        };
        for (xi, &f) in x.iter_mut().zip(failed) {
            *xi |= f;
        }
        Ok(x)
    }
}

/// Simulates the true failure process period by period, re-planning each
/// period and executing only the first-stage action. Failure draws depend on
/// (seed, replication, period, component) only, so planners compared on the
/// same seed face the same uniforms.
pub fn rolling_horizon_simulate(system: &SystemSpec, config: &RollingConfig) -> Result<RollingRun> {
    system.validate()?;
    if config.replications == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    let table = match config.planner {
        Planner::Mdp => Some(exact_multistage_value(
            system,
            &config.hazard,
            &config.budget,
        )?),
        _ => None,
    };
    let decider = Decider { config, table };
    let n = system.n();
    let horizon = system.horizon;

    let replications = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(rep as u64);
            let draws: Vec<Vec<f64>> = (0..=horizon)
                .map(|_| (0..n).map(|_| rng.sample(Open01)).collect())
                .collect();
            let mut ages: Vec<u32> = system
                .components
                .iter()
                .map(|c| c.initial_age + 1)
                .collect();
            let mut failed = system.failed_mask();
            let mut periods = Vec::with_capacity(horizon as usize);
            for t in 1..=horizon {
                let replaced = decider.decide(system, rep, t, &ages, &failed)?;
                let (pr, cr, setup) = period_cost(system, &failed, &replaced);
                periods.push(PeriodRecord {
                    period: t,
                    ages: ages.clone(),
                    failed: failed.clone(),
                    replaced: replaced.clone(),
                    pr_cost: pr,
                    cr_cost: cr,
                    setup_cost: setup,
                    cost: pr + cr + setup,
                });
                for i in 0..n {
                    ages[i] = if replaced[i] { 1 } else { ages[i] + 1 };
                    failed[i] = draws[t as usize][i] < config.hazard.hazard(system, i, ages[i]);
                }
            }
            let total = periods.iter().map(|p| p.cost).sum();
            Ok(Replication {
                index: rep,
                periods,
                total,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let k = replications.len() as f64;
    let mean = replications.iter().map(|r| r.total).sum::<f64>() / k;
    let std_error = if replications.len() > 1 {
        let var = replications
            .iter()
            .map(|r| (r.total - mean).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(RollingRun {
        planner: config.planner,
        seed: config.seed,
        replications,
        mean,
        std_error,
    })
}
