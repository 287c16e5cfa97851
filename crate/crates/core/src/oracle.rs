//! Exhaustive ground-truth solvers for desk-scale instances.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::PhTerms;
use crate::model::{price_unchecked, Scenario, Schedule, SystemSpec};
use crate::pha::FirstStageDecision;
use crate::scenario::{HazardModel, ScenarioSet};

const TIE: f64 = 1e-9;

/// Upper bound on the work units an oracle may spend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_work: u128,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_work: 2_000_000_000,
        }
    }
}

impl Budget {
    pub(crate) fn check(&self, what: &'static str, estimate: u128) -> Result<()> {
        if estimate > self.max_work {
            Err(Error::BudgetExceeded {
                what,
                estimate,
                budget: self.max_work,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub schedule: Schedule,
    pub objective: f64,
}

/// Best replacement chain of one component restricted to an allowed set of
/// epochs. Ties prefer stopping, then the earliest epoch, which yields the
/// lexicographically smallest optimal time list.
struct ChainDp<'a> {
    system: &'a SystemSpec,
    scenario: &'a Scenario,
    component: usize,
    fix_first: Option<bool>,
    memo: Vec<Option<(f64, Option<u32>)>>,
    width: usize,
}

impl<'a> ChainDp<'a> {
    fn new(
        system: &'a SystemSpec,
        scenario: &'a Scenario,
        component: usize,
        fix_first: Option<bool>,
    ) -> Self {
        let width = system.horizon as usize + 1;
        Self {
            system,
            scenario,
            component,
            fix_first,
            memo: vec![None; (scenario.individuals(component) + 1) * width],
            width,
        }
    }

    fn reset(&mut self) {
        self.memo.iter_mut().for_each(|m| *m = None);
    }

    fn best(&mut self, allowed: &[bool], r: usize, s: u32) -> (f64, Option<u32>) {
        let key = r * self.width + s as usize;
        if let Some(hit) = self.memo[key] {
            return hit;
        }
        let i = self.component;
        let horizon = self.system.horizon;
        let result = if r >= self.scenario.individuals(i) {
            (0.0, None)
        } else {
            let f = self.scenario.failure_epoch(i, r, s);
            let (lo, hi, can_stop) = match (r, self.fix_first) {
                (0, Some(true)) => (1, 1, false),
                (0, Some(false)) => (2, f.min(horizon as u64) as u32, f > horizon as u64),
                _ => (s + 1, f.min(horizon as u64) as u32, f > horizon as u64),
            };
            let mut best = if can_stop {
                (0.0, None)
            } else {
                (f64::INFINITY, None)
            };
            for t in lo..=hi {
                if !allowed[t as usize] {
                    continue;
                }
                let (rest, _) = self.best(allowed, r + 1, t);
                if rest.is_infinite() {
                    continue;
                }
                let c = self.system.components[i].replacement_cost(t as u64 == f) + rest;
                if c < best.0 - TIE {
                    best = (c, Some(t));
                }
            }
            best
        };
        self.memo[key] = Some(result);
        result
    }

    fn times(&mut self, allowed: &[bool]) -> Vec<u32> {
        let mut out = Vec::new();
        let (mut r, mut s) = (0usize, 0u32);
        while let (_, Some(t)) = self.best(allowed, r, s) {
            out.push(t);
            r += 1;
            s = t;
        }
        out
    }
}

fn scenario_work(system: &SystemSpec, scenario: &Scenario) -> u128 {
    let t = system.horizon as u128;
    let q: u128 = (0..system.n())
        .map(|i| scenario.individuals(i) as u128 + 1)
        .sum();
    (1u128 << system.horizon.min(120)) * q * (t + 1) * (t + 1)
}

/// Minimum-cost schedule for one scenario, optionally with the first-stage
/// replace-now vector pinned. Returns `None` when the pin is infeasible.
/// Minimizes over every set of setup epochs with an independent chain
/// program per component.
pub fn exact_scenario_optimum(
    system: &SystemSpec,
    scenario: &Scenario,
    fix: Option<&[bool]>,
    budget: &Budget,
) -> Result<Option<ExactSolution>> {
    if scenario.n() != system.n() {
        return Err(Error::invalid(
            "scenario and system disagree on component count",
        ));
    }
    budget.check("exact scenario optimum", scenario_work(system, scenario))?;
    let n = system.n();
    let horizon = system.horizon as usize;
    let mut dps: Vec<ChainDp> = (0..n)
        .map(|i| ChainDp::new(system, scenario, i, fix.map(|f| f[i])))
        .collect();
    let mut allowed = vec![false; horizon + 1];
    let mut best: Option<ExactSolution> = None;
    for mask in 0u64..(1u64 << horizon) {
        for t in 1..=horizon {
            allowed[t] = mask >> (t - 1) & 1 == 1;
        }
        let mut total = system.setup_cost * mask.count_ones() as f64;
        let mut feasible = true;
        for dp in dps.iter_mut() {
            dp.reset();
            let (c, _) = dp.best(&allowed, 0, 0);
            if c.is_infinite() {
                feasible = false;
                break;
            }
            total += c;
        }
        if !feasible {
            continue;
        }
        let better = match &best {
            None => true,
            Some(b) => total < b.objective - TIE,
        };
        let tied = best
            .as_ref()
            .is_some_and(|b| (total - b.objective).abs() <= TIE);
        if better || tied {
            let schedule = Schedule::new(dps.iter_mut().map(|dp| dp.times(&allowed)).collect());
            // Setup epochs not used by any chain cost d without benefit.
            if schedule.setup_times().len() != mask.count_ones() as usize {
                continue;
            }
            if better || best.as_ref().is_some_and(|b| schedule < b.schedule) {
                best = Some(ExactSolution {
                    objective: price_unchecked(system, scenario, &schedule).total,
                    schedule,
                });
            }
        }
    }
    Ok(best)
}

/// Every feasible first-stage vector: failed components forced on.
pub fn first_stage_vectors(system: &SystemSpec) -> Vec<Vec<bool>> {
    let n = system.n();
    let mut out = Vec::new();
    // Lexicographic order over Vec<bool> (false < true), component 0 first.
    for code in 0u64..(1u64 << n) {
        let x: Vec<bool> = (0..n).map(|i| code >> (n - 1 - i) & 1 == 1).collect();
        if system
            .components
            .iter()
            .zip(&x)
            .all(|(c, &xi)| !c.initially_failed || xi)
        {
            out.push(x);
        }
    }
    out
}

/// Exact subproblem with first-stage price terms: minimizes
/// `cost + terms(x)` over all feasible `x` (or the pinned one).
pub fn exact_scenario_with_terms(
    system: &SystemSpec,
    scenario: &Scenario,
    terms: &PhTerms,
    fix: Option<&[bool]>,
    budget: &Budget,
) -> Result<Option<ExactSolution>> {
    if fix.is_some() || !terms.enabled {
        return Ok(
            exact_scenario_optimum(system, scenario, fix, budget)?.map(|mut s| {
                s.objective += terms.value(&s.schedule.first_stage());
                s
            }),
        );
    }
    let mut best: Option<ExactSolution> = None;
    for x in first_stage_vectors(system) {
        if let Some(mut s) = exact_scenario_optimum(system, scenario, Some(&x), budget)? {
            s.objective += terms.value(&x);
            if best
                .as_ref()
                .is_none_or(|b| s.objective < b.objective - TIE)
            {
                best = Some(s);
            }
        }
    }
    Ok(best)
}

/// Probability-weighted optimum over the scenario set with `x` pinned, or
/// `None` if some scenario cannot honor `x`.
pub fn def_value_for(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    x: &[bool],
    budget: &Budget,
) -> Result<Option<f64>> {
    let parts: Vec<Option<f64>> = scenarios
        .scenarios
        .par_iter()
        .map(|sc| {
            exact_scenario_optimum(system, sc, Some(x), budget)
                .map(|o| o.map(|s| sc.probability * s.objective))
        })
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefOptimum {
    pub decision: FirstStageDecision,
    /// Value of every feasible first-stage vector, `None` when infeasible.
    pub evaluated: Vec<(Vec<bool>, Option<f64>)>,
}

/// Solves the extensive form by enumerating first-stage vectors.
pub fn exact_def_optimum(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    budget: &Budget,
) -> Result<DefOptimum> {
    let xs = first_stage_vectors(system);
    let per = scenarios
        .scenarios
        .iter()
        .map(|s| scenario_work(system, s))
        .max()
        .unwrap_or(0);
    budget.check(
        "exact extensive form",
        per.saturating_mul(xs.len() as u128)
            .saturating_mul(scenarios.len() as u128),
    )?;
    let mut evaluated = Vec::with_capacity(xs.len());
    let mut best: Option<(Vec<bool>, f64)> = None;
    for x in xs {
        let v = def_value_for(
            system,
            scenarios,
            &x,
            &Budget {
                max_work: u128::MAX,
            },
        )?;
        if let Some(v) = v {
            if best.as_ref().is_none_or(|b| v < b.1 - TIE) {
                best = Some((x.clone(), v));
            }
        }
        evaluated.push((x, v));
    }
    let (x, objective) =
        best.ok_or_else(|| Error::invalid("no first-stage vector is feasible in every scenario"))?;
    Ok(DefOptimum {
        decision: FirstStageDecision::new(x, objective),
        evaluated,
    })
}

fn component_chains(system: &SystemSpec, scenario: &Scenario, i: usize) -> Vec<Vec<u32>> {
    fn walk(
        system: &SystemSpec,
        scenario: &Scenario,
        i: usize,
        prefix: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        let r = prefix.len();
        if r >= scenario.individuals(i) {
            out.push(prefix.clone());
            return;
        }
        let s = prefix.last().copied().unwrap_or(0);
        let f = scenario.failure_epoch(i, r, s);
        let horizon = system.horizon as u64;
        if f > horizon {
            out.push(prefix.clone());
        }
        for t in s + 1..=f.min(horizon) as u32 {
            prefix.push(t);
            walk(system, scenario, i, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(system, scenario, i, &mut Vec::new(), &mut out);
    if system.components[i].initially_failed {
        out.retain(|c| c.first() == Some(&1));
    }
    out
}

/// All feasible schedules of a scenario, in lexicographic order.
pub fn enumerate_schedules(
    system: &SystemSpec,
    scenario: &Scenario,
    budget: &Budget,
) -> Result<Vec<Schedule>> {
    let chains: Vec<Vec<Vec<u32>>> = (0..system.n())
        .map(|i| component_chains(system, scenario, i))
        .collect();
    let count = chains
        .iter()
        .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128));
    budget.check("schedule enumeration", count)?;
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; chains.len()];
    if chains.iter().any(|c| c.is_empty()) {
        return Ok(out);
    }
    loop {
        out.push(Schedule::new(
            idx.iter()
                .zip(&chains)
                .map(|(&k, c)| c[k].clone())
                .collect(),
        ));
        let mut pos = chains.len();
        loop {
            if pos == 0 {
                out.sort();
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < chains[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub optimum: f64,
    pub optimal_schedules: usize,
    /// Some optimum has a failure-anchored member in every group.
    pub anchored_groups: bool,
    /// Some optimum replaces concurrent individuals in failure order.
    pub failure_order: bool,
}

/// Every group at an epoch, other than groups made only of each
/// component's last replacement, has a member replaced at its failure or one
/// period before.
pub fn has_anchored_groups(scenario: &Scenario, schedule: &Schedule) -> bool {
    let mut members: std::collections::BTreeMap<u32, Vec<(bool, u64)>> = Default::default();
    for (i, times) in schedule.times.iter().enumerate() {
        let mut installed = 0;
        for (r, &t) in times.iter().enumerate() {
            let slack = scenario.failure_epoch(i, r, installed) - t as u64;
            members
                .entry(t)
                .or_default()
                .push((r + 1 == times.len(), slack));
            installed = t;
        }
    }
    members
        .values()
        .all(|g| g.iter().all(|&(last, _)| last) || g.iter().any(|&(_, slack)| slack <= 1))
}

/// Replaced individuals that are in service together are replaced in order
/// of their failure epochs.
pub fn follows_failure_order(scenario: &Scenario, schedule: &Schedule) -> bool {
    let mut spans = Vec::new();
    for (i, times) in schedule.times.iter().enumerate() {
        let mut installed = 0;
        for (r, &t) in times.iter().enumerate() {
            spans.push((installed, t, scenario.failure_epoch(i, r, installed)));
            installed = t;
        }
    }
    spans.iter().all(|&(sa, ta, fa)| {
        spans.iter().all(|&(sb, tb, fb)| {
            let concurrent = sa < tb && sb < ta;
            !(concurrent && fa < fb && ta > tb)
        })
    })
}

pub fn theorem_structure_check(
    system: &SystemSpec,
    scenario: &Scenario,
    budget: &Budget,
) -> Result<TheoremReport> {
    let all = enumerate_schedules(system, scenario, budget)?;
    let priced: Vec<(f64, &Schedule)> = all
        .iter()
        .map(|s| (price_unchecked(system, scenario, s).total, s))
        .collect();
    let optimum = priced.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let optimal: Vec<&Schedule> = priced
        .iter()
        .filter(|p| p.0 <= optimum + TIE)
        .map(|p| p.1)
        .collect();
    Ok(TheoremReport {
        optimum,
        optimal_schedules: optimal.len(),
        anchored_groups: optimal.iter().any(|s| has_anchored_groups(scenario, s)),
        failure_order: optimal.iter().any(|s| follows_failure_order(scenario, s)),
    })
}

/// Backward-induction values of the multi-stage model over
/// (age, failed) states per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub horizon: u32,
    /// Largest age tracked per component.
    pub max_age: Vec<u32>,
    values: Vec<Vec<f64>>,
    actions: Vec<Vec<u32>>,
    initial: (Vec<u32>, Vec<bool>),
}

impl ValueTable {
    fn index(&self, ages: &[u32], failed: &[bool]) -> usize {
        encode(&self.max_age, ages, failed)
    }

    pub fn value(&self, stage: u32, ages: &[u32], failed: &[bool]) -> f64 {
        self.values[stage as usize - 1][self.index(ages, failed)]
    }

    /// Optimal replace set at `stage` for the given state.
    pub fn action(&self, stage: u32, ages: &[u32], failed: &[bool]) -> Vec<bool> {
        let mask = self.actions[stage as usize - 1][self.index(ages, failed)];
        (0..ages.len()).map(|i| mask >> i & 1 == 1).collect()
    }

    /// `V_1` at the system's stage-1 state.
    pub fn initial_value(&self) -> f64 {
        self.value(1, &self.initial.0, &self.initial.1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.max_age.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["stage".to_string()];
        header.extend((0..n).map(|i| format!("age_{i}")));
        header.extend((0..n).map(|i| format!("failed_{i}")));
        header.extend(["value".to_string(), "action".to_string()]);
        w.write_record(&header)?;
        for stage in 1..=self.horizon {
            for idx in 0..self.values[0].len() {
                let (ages, failed) = decode(&self.max_age, idx);
                let mut row = vec![stage.to_string()];
                row.extend(ages.iter().map(|a| a.to_string()));
                row.extend(failed.iter().map(|&f| u8::from(f).to_string()));
                row.push(format!("{}", self.values[stage as usize - 1][idx]));
                let mask = self.actions[stage as usize - 1][idx];
                row.push(
                    (0..n)
                        .map(|i| if mask >> i & 1 == 1 { '1' } else { '0' })
                        .collect(),
                );
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn encode(max_age: &[u32], ages: &[u32], failed: &[bool]) -> usize {
    let mut idx = 0usize;
    for i in (0..max_age.len()).rev() {
        let radix = 2 * max_age[i] as usize;
        let a = ages[i].clamp(1, max_age[i]) as usize;
        idx = idx * radix + (a - 1) * 2 + failed[i] as usize;
    }
    idx
}

fn decode(max_age: &[u32], mut idx: usize) -> (Vec<u32>, Vec<bool>) {
    let n = max_age.len();
    let mut ages = vec![0; n];
    let mut failed = vec![false; n];
    for i in 0..n {
        let radix = 2 * max_age[i] as usize;
        let local = idx % radix;
        idx /= radix;
        ages[i] = (local / 2) as u32 + 1;
        failed[i] = local % 2 == 1;
    }
    (ages, failed)
}

/// Finite-horizon backward induction. Each stage replaces a superset of the
/// failed components; a replaced slot restarts at age 0 and every slot ages
/// one period before the next failure draw.
pub fn exact_multistage_value(
    system: &SystemSpec,
    hazard: &HazardModel,
    budget: &Budget,
) -> Result<ValueTable> {
    system.validate()?;
    let n = system.n();
    let horizon = system.horizon;
    let max_age: Vec<u32> = system
        .components
        .iter()
        .map(|c| c.initial_age + horizon)
        .collect();
    let states: u128 = max_age
        .iter()
        .fold(1u128, |acc, &a| acc.saturating_mul(2 * a as u128));
    let work = states
        .saturating_mul(horizon as u128)
        .saturating_mul(1u128 << (2 * n).min(120));
    budget.check("multi-stage value", work)?;
    let states = states as usize;

    let haz: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..=max_age[i] + 1)
                .map(|a| hazard.hazard(system, i, a))
                .collect()
        })
        .collect();
    let cost = |i: usize, failed: bool| system.components[i].replacement_cost(failed);

    let mut values = vec![vec![0.0; states]; horizon as usize];
    let mut actions = vec![vec![0u32; states]; horizon as usize];
    for stage in (1..=horizon).rev() {
        let t = stage as usize - 1;
        let (done, rest) = values.split_at_mut(t + 1);
        let next = rest.first();
        let current = &mut done[t];
        current
            .par_iter_mut()
            .zip(actions[t].par_iter_mut())
            .enumerate()
            .for_each(|(idx, (value, action))| {
                let (ages, failed) = decode(&max_age, idx);
                let forced: u32 = (0..n).filter(|&i| failed[i]).map(|i| 1 << i).sum();
                let mut best = (f64::INFINITY, 0u32);
                for mask in 0u32..(1 << n) {
                    if mask & forced != forced {
                        continue;
                    }
                    let mut v: f64 = (0..n)
                        .filter(|&i| mask >> i & 1 == 1)
                        .map(|i| cost(i, failed[i]))
                        .sum();
                    if mask != 0 {
                        v += system.setup_cost;
                    }
                    if let Some(next) = next {
                        let new_age: Vec<u32> = (0..n)
                            .map(|i| {
                                if mask >> i & 1 == 1 {
                                    1
                                } else {
                                    (ages[i] + 1).min(max_age[i])
                                }
                            })
                            .collect();
                        let p: Vec<f64> = (0..n).map(|i| haz[i][new_age[i] as usize]).collect();
                        let mut expect = 0.0;
                        for outcome in 0u32..(1 << n) {
                            let mut prob = 1.0;
                            let mut fl = vec![false; n];
                            for i in 0..n {
                                fl[i] = outcome >> i & 1 == 1;
                                prob *= if fl[i] { p[i] } else { 1.0 - p[i] };
                            }
                            if prob > 0.0 {
                                expect += prob * next[encode(&max_age, &new_age, &fl)];
                            }
                        }
                        v += expect;
                    }
                    if v < best.0 - TIE {
                        best = (v, mask);
                    }
                }
                *value = best.0;
                *action = best.1;
            });
    }
    let initial = (
        system
            .components
            .iter()
            .map(|c| c.initial_age + 1)
            .collect(),
        system.failed_mask(),
    );
    Ok(ValueTable {
        horizon,
        max_age,
        values,
        actions,
        initial,
    })
}
