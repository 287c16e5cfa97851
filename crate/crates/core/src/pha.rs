//! Progressive hedging over the scenario set.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heuristic::{solve_scenario, HeuristicConfig, PhTerms};
use crate::model::{Scenario, Schedule, SystemSpec};
use crate::oracle::{exact_scenario_with_terms, Budget};
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstStageDecision {
    pub x: Vec<bool>,
    /// Setup now, implied by `x`.
    pub z: bool,
    pub objective_estimate: f64,
}

impl FirstStageDecision {
    pub fn new(x: Vec<bool>, objective_estimate: f64) -> Self {
        let z = x.iter().any(|&v| v);
        Self {
            x,
            z,
            objective_estimate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubSolution {
    pub schedule: Schedule,
    /// Schedule cost plus price terms.
    pub objective: f64,
}

/// Solver for one scenario subproblem.
pub trait SubSolver: Sync {
    /// `None` when `fix` cannot be honored in this scenario.
    fn solve(
        &self,
        system: &SystemSpec,
        scenario: &Scenario,
        terms: &PhTerms,
        fix: Option<&[bool]>,
    ) -> Result<Option<SubSolution>>;
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicSubSolver {
    pub config: HeuristicConfig,
}

impl SubSolver for HeuristicSubSolver {
    fn solve(
        &self,
        system: &SystemSpec,
        scenario: &Scenario,
        terms: &PhTerms,
        fix: Option<&[bool]>,
    ) -> Result<Option<SubSolution>> {
        Ok(
            solve_scenario(system, scenario, terms, &self.config, fix)?.map(|s| SubSolution {
                schedule: s.schedule,
                objective: s.objective,
            }),
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExactSubSolver {
    pub budget: Budget,
}

impl SubSolver for ExactSubSolver {
    fn solve(
        &self,
        system: &SystemSpec,
        scenario: &Scenario,
        terms: &PhTerms,
        fix: Option<&[bool]>,
    ) -> Result<Option<SubSolution>> {
        Ok(
            exact_scenario_with_terms(system, scenario, terms, fix, &self.budget)?.map(|s| {
                SubSolution {
                    schedule: s.schedule,
                    objective: s.objective,
                }
            }),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaConfig {
    /// Penalty; `None` uses the setup cost (or 1 when it is zero).
    pub rho: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// How many of the most frequent scenario first stages are scored as
    /// final candidates next to the rounded consensus.
    pub candidates: usize,
}

impl Default for PhaConfig {
    fn default() -> Self {
        Self {
            rho: None,
            tolerance: 1e-2,
            max_iterations: 50,
            candidates: 8,
        }
    }
}

impl PhaConfig {
    pub fn rho_for(&self, system: &SystemSpec) -> f64 {
        self.rho.unwrap_or(if system.setup_cost > 0.0 {
            system.setup_cost
        } else {
            1.0
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaState {
    pub iteration: usize,
    pub consensus: Vec<f64>,
    pub multipliers: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub rho: f64,
    pub convergence: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl PhaState {
    pub fn new(
        n: usize,
        probabilities: Vec<f64>,
        rho: f64,
        tolerance: f64,
        max_iterations: usize,
    ) -> Self {
        Self {
            iteration: 0,
            consensus: vec![0.0; n],
            multipliers: vec![vec![0.0; n]; probabilities.len()],
            probabilities,
            rho,
            convergence: f64::INFINITY,
            tolerance,
            max_iterations,
        }
    }

    /// Largest `|Σ p(ω) w_ω,i|` over components.
    pub fn price_imbalance(&self) -> f64 {
        (0..self.consensus.len())
            .map(|i| {
                self.multipliers
                    .iter()
                    .zip(&self.probabilities)
                    .map(|(w, p)| p * w[i])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn terms_for(&self, scenario: usize) -> PhTerms {
        PhTerms {
            linear_price: self.multipliers[scenario].clone(),
            consensus: self.consensus.clone(),
            rho: self.rho,
            enabled: true,
        }
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Aggregation, price update and convergence distance in one step.
pub fn aggregate_and_update(solutions: &[Vec<bool>], state: &PhaState) -> Result<PhaState> {
    if solutions.len() != state.probabilities.len() {
        return Err(Error::invalid(format!(
            "{} solutions for {} scenarios",
            solutions.len(),
            state.probabilities.len()
        )));
    }
    let n = state.consensus.len();
    if solutions.iter().any(|x| x.len() != n) {
        return Err(Error::invalid(
            "solution length differs from component count",
        ));
    }
    let mut consensus = vec![0.0; n];
    for (x, p) in solutions.iter().zip(&state.probabilities) {
        for i in 0..n {
            consensus[i] += p * indicator(x[i]);
        }
    }
    let mut multipliers = state.multipliers.clone();
    let mut convergence = 0.0;
    for ((x, w), p) in solutions
        .iter()
        .zip(multipliers.iter_mut())
        .zip(&state.probabilities)
    {
        let mut sq = 0.0;
        for i in 0..n {
            let gap = indicator(x[i]) - consensus[i];
            w[i] += state.rho * gap;
            sq += gap * gap;
        }
        convergence += p * sq.sqrt();
    }
    Ok(PhaState {
        iteration: state.iteration + 1,
        consensus,
        multipliers,
        convergence,
        ..state.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaTraceRow {
    pub iteration: usize,
    pub convergence: f64,
    pub consensus: Vec<f64>,
    pub price_imbalance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaRun {
    pub decision: FirstStageDecision,
    pub state: PhaState,
    pub trace: Vec<PhaTraceRow>,
    pub converged: bool,
}

impl PhaRun {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "convergence", "price_imbalance", "consensus"])?;
        for row in &self.trace {
            let consensus: Vec<String> = row.consensus.iter().map(|c| c.to_string()).collect();
            w.write_record([
                row.iteration.to_string(),
                row.convergence.to_string(),
                row.price_imbalance.to_string(),
                consensus.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn solve_all(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    subsolver: &dyn SubSolver,
    state: Option<&PhaState>,
) -> Result<Vec<Vec<bool>>> {
    scenarios
        .scenarios
        .par_iter()
        .enumerate()
        .map(|(k, sc)| {
            let terms = match state {
                Some(s) => s.terms_for(k),
                None => PhTerms::disabled(system.n()),
            };
            subsolver
                .solve(system, sc, &terms, None)?
                .map(|s| s.schedule.first_stage())
                .ok_or_else(|| Error::invalid(format!("scenario {k} has no feasible schedule")))
        })
        .collect()
}

/// Sample-average cost with the first stage pinned to `x`; infinite when some
/// scenario cannot honor it.
pub fn first_stage_value(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    subsolver: &dyn SubSolver,
    x: &[bool],
) -> Result<f64> {
    let terms = PhTerms::disabled(system.n());
    let parts: Vec<Option<f64>> = scenarios
        .scenarios
        .par_iter()
        .map(|sc| {
            subsolver
                .solve(system, sc, &terms, Some(x))
                .map(|o| o.map(|s| sc.probability * s.objective))
        })
        .collect::<Result<_>>()?;
    Ok(parts
        .into_iter()
        .sum::<Option<f64>>()
        .unwrap_or(f64::INFINITY))
}

/// Rounds the consensus and forces components that must be replaced now.
pub fn round_consensus(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    consensus: &[f64],
) -> Vec<bool> {
    (0..system.n())
        .map(|i| {
            consensus[i] >= 0.5
                || system.components[i].initially_failed
                || scenarios
                    .scenarios
                    .iter()
                    .any(|s| s.failure_epoch(i, 0, 0) <= 1)
        })
        .collect()
}

pub fn run_pha(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    config: &PhaConfig,
    subsolver: &dyn SubSolver,
) -> Result<PhaRun> {
    if scenarios.is_empty() {
        return Err(Error::invalid("PHA needs at least one scenario"));
    }
    let rho = config.rho_for(system);
    if !(rho > 0.0) {
        return Err(Error::invalid("rho must be > 0"));
    }
    let probabilities: Vec<f64> = scenarios.scenarios.iter().map(|s| s.probability).collect();
    let blank = PhaState::new(
        system.n(),
        probabilities,
        rho,
        config.tolerance,
        config.max_iterations,
    );

    // Initialization: plain solves, then w = ρ(x_ω - x̄).
    let initial = solve_all(system, scenarios, subsolver, None)?;
    let mut state = aggregate_and_update(&initial, &blank)?;
    state.iteration = 0;
    let mut trace = vec![PhaTraceRow {
        iteration: 0,
        convergence: state.convergence,
        consensus: state.consensus.clone(),
        price_imbalance: state.price_imbalance(),
    }];

    let mut converged = false;
    let mut incumbents: Vec<Vec<bool>> = vec![round_consensus(system, scenarios, &state.consensus)];
    let mut seen: Vec<(Vec<bool>, usize)> = Vec::new();
    let mut tally = |xs: &[Vec<bool>]| {
        for x in xs {
            match seen.iter_mut().find(|(y, _)| y == x) {
                Some(entry) => entry.1 += 1,
                None => seen.push((x.clone(), 1)),
            }
        }
    };
    tally(&initial);
    while state.iteration < config.max_iterations {
        let xs = solve_all(system, scenarios, subsolver, Some(&state))?;
        tally(&xs);
        state = aggregate_and_update(&xs, &state)?;
        trace.push(PhaTraceRow {
            iteration: state.iteration,
            convergence: state.convergence,
            consensus: state.consensus.clone(),
            price_imbalance: state.price_imbalance(),
        });
        let rounded = round_consensus(system, scenarios, &state.consensus);
        if !incumbents.contains(&rounded) {
            incumbents.push(rounded);
        }
        if state.convergence < config.tolerance {
            converged = true;
            break;
        }
    }

    // The rounded consensus comes first so it wins ties.
    let mut finals = vec![round_consensus(system, scenarios, &state.consensus)];
    let mut push = |x: Vec<bool>| {
        if !finals.contains(&x) {
            finals.push(x);
        }
    };
    incumbents.into_iter().for_each(&mut push);
    seen.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    seen.into_iter()
        .take(config.candidates)
        .for_each(|(x, _)| push(x));
    let mut best: Option<FirstStageDecision> = None;
    for x in finals {
        let v = first_stage_value(system, scenarios, subsolver, &x)?;
        if best
            .as_ref()
            .is_none_or(|b| v < b.objective_estimate - 1e-9)
        {
            best = Some(FirstStageDecision::new(x, v));
        }
    }
    Ok(PhaRun {
        decision: best.expect("at least one incumbent"),
        state,
        trace,
        converged,
    })
}
