//! Shifting-window grouping heuristic for one scenario subproblem.
//!
//! Each component contributes at most one working individual to the set `K`.
//! Its tentative time is `max(installed + 1, failure - Δ)`. Every iteration
//! sorts `K` by tentative time, builds candidate group options, commits the
//! cheapest option's groups (plus the earliest individual) and advances the
//! committed components to their successors. An individual whose failure lies
//! beyond the horizon never needs replacing and leaves `K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{price_unchecked, CostBreakdown, Scenario, Schedule, SystemSpec};

/// First-stage price and proximal terms of the augmented subproblem objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhTerms {
    pub linear_price: Vec<f64>,
    pub consensus: Vec<f64>,
    pub rho: f64,
    pub enabled: bool,
}

impl PhTerms {
    pub fn disabled(n: usize) -> Self {
        Self {
            linear_price: vec![0.0; n],
            consensus: vec![0.0; n],
            rho: 0.0,
            enabled: false,
        }
    }

    pub fn new(linear_price: Vec<f64>, consensus: Vec<f64>, rho: f64) -> Result<Self> {
        if linear_price.len() != consensus.len() {
            return Err(Error::invalid("price and consensus lengths differ"));
        }
        if !(rho >= 0.0) {
            return Err(Error::invalid("rho must be >= 0"));
        }
        if consensus.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::invalid("consensus entries must lie in [0, 1]"));
        }
        Ok(Self {
            linear_price,
            consensus,
            rho,
            enabled: true,
        })
    }

    /// `w·x + ρ/2 ‖x - x̄‖²`, or zero when disabled.
    pub fn value(&self, x: &[bool]) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let v = if xi { 1.0 } else { 0.0 };
                let gap = v - self.consensus[i];
                self.linear_price[i] * v + 0.5 * self.rho * gap * gap
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub delta_grid: Vec<u32>,
    /// Window widths; `None` means `0..=max(2, ceil(T/2))`. Width 0 groups
    /// only equal tentative times, so no individual is moved.
    pub iota_grid: Option<Vec<u32>>,
    /// Adds the cost of each moved component's ungrouped successor chain to
    /// option costs, so replacing early pays for the life it throws away.
    pub lookahead: bool,
    pub trace: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            delta_grid: vec![0, 1],
            iota_grid: None,
            lookahead: true,
            trace: false,
        }
    }
}

pub fn default_iota_grid(horizon: u32) -> Vec<u32> {
    (0..=horizon.div_ceil(2).max(2)).collect()
}

/// One working individual in `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingEntry {
    pub component: usize,
    pub individual: usize,
    pub installed: u32,
    pub failure: u64,
    pub tentative: u32,
}

/// The working set together with everything committed so far.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingSet {
    pub entries: Vec<WorkingEntry>,
    pub committed: Vec<Vec<u32>>,
    setup_used: Vec<bool>,
    committed_cost: f64,
}

impl WorkingSet {
    pub fn new(entries: Vec<WorkingEntry>, n: usize, horizon: u32) -> Self {
        Self {
            entries,
            committed: vec![Vec::new(); n],
            setup_used: vec![false; horizon as usize + 2],
            committed_cost: 0.0,
        }
    }

    /// `K'`: entry indices by tentative time, then component.
    pub fn sorted_view(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by_key(|&k| (self.entries[k].tentative, self.entries[k].component));
        order
    }

    pub fn committed_cost(&self) -> f64 {
        self.committed_cost
    }

    fn commit(&mut self, system: &SystemSpec, entry: &WorkingEntry, time: u32) {
        let comp = &system.components[entry.component];
        self.committed_cost += comp.replacement_cost(time as u64 == entry.failure);
        if !self.setup_used[time as usize] {
            self.setup_used[time as usize] = true;
            self.committed_cost += system.setup_cost;
        }
        self.committed[entry.component].push(time);
    }
}

/// One evaluated candidate of the grouping rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOption {
    /// 1-based option index `m`.
    pub option_index: usize,
    /// Windows as positions in `K'`, with the time each window executes at.
    pub groups: Vec<(u32, Vec<usize>)>,
    /// Entry indices committed if this option wins, with their times.
    pub selected: Vec<(usize, u32)>,
    pub cumulated_cost: f64,
}

/// Cost of an individual's successor chain under the Δ rule, no grouping.
struct ChainTail {
    delta: u32,
    memo: Vec<Vec<Vec<f64>>>,
}

impl ChainTail {
    fn new(system: &SystemSpec, scenario: &Scenario, delta: u32) -> Self {
        let h = system.horizon as usize;
        let memo = (0..system.n())
            .map(|i| vec![vec![f64::NAN; h + 1]; scenario.individuals(i) + 1])
            .collect();
        Self { delta, memo }
    }

    /// Cost of replacing individuals `r, r+1, ...` when `r` is installed at `s`.
    fn cost(
        &mut self,
        system: &SystemSpec,
        scenario: &Scenario,
        i: usize,
        r: usize,
        s: u32,
    ) -> f64 {
        let cached = self.memo[i][r][s as usize];
        if !cached.is_nan() {
            return cached;
        }
        let f = failure(system, scenario, i, r, s);
        let value = if f > system.horizon as u64 {
            0.0
        } else {
            let beta = tentative(s + 1, f, self.delta);
            system.components[i].replacement_cost(beta as u64 == f)
                + system.setup_cost
                + self.cost(system, scenario, i, r + 1, beta)
        };
        self.memo[i][r][s as usize] = value;
        value
    }
}

fn failure(system: &SystemSpec, scenario: &Scenario, i: usize, r: usize, installed: u32) -> u64 {
    // The last available individual is only ever installed at the horizon.
    if r >= scenario.individuals(i) {
        return system.horizon as u64 + 1;
    }
    scenario.failure_epoch(i, r, installed)
}

fn tentative(earliest: u32, failure: u64, delta: u32) -> u32 {
    let target = failure.saturating_sub(delta as u64).min(u32::MAX as u64) as u32;
    target.max(earliest)
}

/// Parameters of a single grouping pass.
#[derive(Debug, Clone, Copy)]
pub struct RuleParams {
    pub iota: u32,
    pub delta: u32,
}

struct OptionScratch {
    used: Vec<bool>,
    touched: Vec<u32>,
    x: Vec<bool>,
}

/// Evaluates every group option for `working` and returns the cheapest.
/// Ties go to the smaller option index.
pub fn grouping_rule(
    working: &WorkingSet,
    params: RuleParams,
    terms: &PhTerms,
    system: &SystemSpec,
    scenario: &Scenario,
    steps: &mut u64,
) -> Result<GroupOption> {
    let mut tail = ChainTail::new(system, scenario, params.delta);
    let mut scratch = OptionScratch {
        used: vec![false; system.horizon as usize + 2],
        touched: Vec::new(),
        x: vec![false; system.n()],
    };
    let order = working.sorted_view();
    let all = evaluate_options(
        working,
        &order,
        params,
        terms,
        system,
        scenario,
        Some(&mut tail),
        &mut scratch,
        steps,
    )?;
    Ok(pick(all))
}

fn pick(options: Vec<GroupOption>) -> GroupOption {
    let mut best: Option<GroupOption> = None;
    for opt in options {
        if best
            .as_ref()
            .is_none_or(|b| opt.cumulated_cost < b.cumulated_cost - 1e-12)
        {
            best = Some(opt);
        }
    }
    best.expect("at least one option")
}

#[allow(clippy::too_many_arguments)]
fn evaluate_options(
    working: &WorkingSet,
    order: &[usize],
    params: RuleParams,
    terms: &PhTerms,
    system: &SystemSpec,
    scenario: &Scenario,
    mut tail: Option<&mut ChainTail>,
    scratch: &mut OptionScratch,
    steps: &mut u64,
) -> Result<Vec<GroupOption>> {
    if order.is_empty() {
        return Err(Error::invalid(
            "grouping rule needs a non-empty working set",
        ));
    }
    let len = order.len();
    let option_count = (len - 1).max(1);
    let mut out = Vec::with_capacity(option_count);
    let mut times = vec![0u32; len];
    let mut grouped = vec![false; len];
    for m in 0..option_count {
        for p in 0..len {
            times[p] = working.entries[order[p]].tentative;
            grouped[p] = false;
        }
        let mut groups = Vec::new();
        let mut v = m;
        while v < len {
            let t = working.entries[order[v]].tentative;
            let mut last = v;
            while last + 1 < len {
                *steps += 1;
                let next = &working.entries[order[last + 1]];
                if next.tentative > t.saturating_add(params.iota) || next.installed >= t {
                    break;
                }
                last += 1;
            }
            if last > v {
                for p in v..=last {
                    times[p] = t;
                    grouped[p] = true;
                }
            }
            groups.push((t, (v..=last).collect::<Vec<_>>()));
            v = last + 1;
        }

        // Committed if this option wins: grouped members, K'[1], and anything
        // sharing K'[1]'s epoch.
        let first_time = working.entries[order[0]].tentative;
        let selected: Vec<(usize, u32)> = (0..len)
            .filter(|&p| p == 0 || grouped[p] || times[p] == first_time)
            .map(|p| (order[p], times[p]))
            .collect();

        let mut cost = working.committed_cost;
        for p in 0..len {
            *steps += 1;
            let e = &working.entries[order[p]];
            let t = times[p];
            cost += system.components[e.component].replacement_cost(t as u64 == e.failure);
            let slot = t as usize;
            if !working.setup_used[slot] && !scratch.used[slot] {
                scratch.used[slot] = true;
                scratch.touched.push(t);
                cost += system.setup_cost;
            }
            if let Some(tail) = tail.as_deref_mut() {
                cost += tail.cost(system, scenario, e.component, e.individual + 1, t);
            }
        }
        for t in scratch.touched.drain(..) {
            scratch.used[t as usize] = false;
        }
        if terms.enabled {
            for (i, xi) in scratch.x.iter_mut().enumerate() {
                *xi = working.committed[i].first() == Some(&1);
            }
            for p in 0..len {
                if times[p] == 1 {
                    scratch.x[working.entries[order[p]].component] = true;
                }
            }
            cost += terms.value(&scratch.x);
        }
        out.push(GroupOption {
            option_index: m + 1,
            groups,
            selected,
            cumulated_cost: cost,
        });
    }
    Ok(out)
}

/// Option costs of one grouping iteration, for debugging output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub delta: u32,
    pub iota: u32,
    pub iteration: usize,
    pub tentative: Vec<(usize, usize, u32)>,
    pub option_costs: Vec<f64>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSolution {
    pub schedule: Schedule,
    /// Schedule cost plus first-stage price terms.
    pub objective: f64,
    pub cost: CostBreakdown,
    pub delta: u32,
    pub iota: u32,
    /// Candidate-member visits inside the grouping rule, over all runs.
    pub steps: u64,
    pub trace: Option<Vec<TraceStep>>,
}

/// Runs the heuristic over every (Δ, ι) pair and keeps the best schedule.
/// `fix` pins the first-stage replace-now vector; `None` when it is
/// infeasible for this scenario (a working component would fail at the first
/// epoch while pinned to stay).
pub fn solve_scenario(
    system: &SystemSpec,
    scenario: &Scenario,
    terms: &PhTerms,
    config: &HeuristicConfig,
    fix: Option<&[bool]>,
) -> Result<Option<HeuristicSolution>> {
    if scenario.n() != system.n() {
        return Err(Error::invalid(
            "scenario and system disagree on component count",
        ));
    }
    if let Some(f) = fix {
        if f.len() != system.n() {
            return Err(Error::invalid("first-stage fix has the wrong length"));
        }
    }
    let iotas = config
        .iota_grid
        .clone()
        .unwrap_or_else(|| default_iota_grid(system.horizon));
    if iotas.is_empty() || config.delta_grid.is_empty() {
        return Err(Error::invalid("empty Δ or ι grid"));
    }
    let mut steps = 0u64;
    let mut trace = config.trace.then(Vec::new);
    let mut best: Option<HeuristicSolution> = None;
    for &delta in &config.delta_grid {
        let mut tail = config
            .lookahead
            .then(|| ChainTail::new(system, scenario, delta));
        for &iota in &iotas {
            let params = RuleParams { iota, delta };
            let Some(schedule) = run_once(
                system,
                scenario,
                terms,
                params,
                fix,
                tail.as_mut(),
                &mut steps,
                trace.as_mut(),
            )?
            else {
                return Ok(None);
            };
            let cost = price_unchecked(system, scenario, &schedule);
            let objective = cost.total + terms.value(&schedule.first_stage());
            if best.as_ref().is_none_or(|b| objective < b.objective - 1e-9) {
                best = Some(HeuristicSolution {
                    schedule,
                    objective,
                    cost,
                    delta,
                    iota,
                    steps: 0,
                    trace: None,
                });
            }
        }
    }
    Ok(best.map(|mut b| {
        b.steps = steps;
        b.trace = trace;
        b
    }))
}

#[allow(clippy::too_many_arguments)]
fn run_once(
    system: &SystemSpec,
    scenario: &Scenario,
    terms: &PhTerms,
    params: RuleParams,
    fix: Option<&[bool]>,
    mut tail: Option<&mut ChainTail>,
    steps: &mut u64,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<Option<Schedule>> {
    let n = system.n();
    let horizon = system.horizon;
    let mut working = WorkingSet::new(Vec::new(), n, horizon);

    let advance = |working: &mut WorkingSet, i: usize, r: usize, installed: u32| {
        let f = failure(system, scenario, i, r, installed);
        if f <= horizon as u64 {
            working.entries.push(WorkingEntry {
                component: i,
                individual: r,
                installed,
                failure: f,
                tentative: tentative(installed + 1, f, params.delta),
            });
        }
    };

    for i in 0..n {
        match fix.map(|f| f[i]) {
            Some(true) => {
                let f = failure(system, scenario, i, 0, 0);
                let first = WorkingEntry {
                    component: i,
                    individual: 0,
                    installed: 0,
                    failure: f,
                    tentative: 1,
                };
                working.commit(system, &first, 1);
                advance(&mut working, i, 1, 1);
            }
            Some(false) => {
                let f = failure(system, scenario, i, 0, 0);
                if f <= 1 {
                    return Ok(None);
                }
                if f <= horizon as u64 {
                    working.entries.push(WorkingEntry {
                        component: i,
                        individual: 0,
                        installed: 0,
                        failure: f,
                        tentative: tentative(2, f, params.delta),
                    });
                }
            }
            None => advance(&mut working, i, 0, 0),
        }
    }

    let mut scratch = OptionScratch {
        used: vec![false; horizon as usize + 2],
        touched: Vec::new(),
        x: vec![false; n],
    };
    let mut iteration = 0;
    while !working.entries.is_empty() {
        let order = working.sorted_view();
        let options = evaluate_options(
            &working,
            &order,
            params,
            terms,
            system,
            scenario,
            tail.as_deref_mut(),
            &mut scratch,
            steps,
        )?;
        let costs: Vec<f64> = options.iter().map(|o| o.cumulated_cost).collect();
        let chosen = pick(options);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(TraceStep {
                delta: params.delta,
                iota: params.iota,
                iteration,
                tentative: order
                    .iter()
                    .map(|&k| {
                        let e = &working.entries[k];
                        (e.component, e.individual, e.tentative)
                    })
                    .collect(),
                option_costs: costs,
                chosen: chosen.option_index,
            });
        }
        let mut selected = chosen.selected;
        selected.sort_by_key(|&(k, _)| std::cmp::Reverse(k));
        for (k, t) in selected {
            let e = working.entries.swap_remove(k);
            working.commit(system, &e, t);
            advance(&mut working, e.component, e.individual + 1, t);
        }
        iteration += 1;
    }
    Ok(Some(Schedule::new(working.committed)))
}
