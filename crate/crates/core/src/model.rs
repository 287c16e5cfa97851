//! Instance, scenario and schedule types, plus schedule pricing.
//!
//! Time is discrete. Decision epochs are numbered `1..=T`. The first
//! individual of every component counts as installed at epoch 0 and carries a
//! *residual* lifetime: it fails (and is observed failed) at epoch
//! `max(residual, 1)`. Every later individual is installed at its
//! predecessor's replacement epoch `s` and fails at `s + lifetime`.
//! Replacing an individual exactly at its failure epoch is a corrective
//! replacement (CR); any earlier replacement is preventive (PR).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    /// Weibull shape.
    pub shape: f64,
    /// Weibull scale, in periods.
    pub scale: f64,
    pub cost_pr: f64,
    pub cost_cr: f64,
    /// Age of the first individual at epoch 0.
    #[serde(default)]
    pub initial_age: u32,
    /// The first individual is already failed at the first decision epoch.
    #[serde(default)]
    pub initially_failed: bool,
}

impl ComponentSpec {
    pub fn new(shape: f64, scale: f64, cost_pr: f64, cost_cr: f64) -> Self {
        Self {
            shape,
            scale,
            cost_pr,
            cost_cr,
            initial_age: 0,
            initially_failed: false,
        }
    }

    pub fn with_initial_age(mut self, age: u32) -> Self {
        self.initial_age = age;
        self
    }

    pub fn failed(mut self) -> Self {
        self.initially_failed = true;
        self
    }

    pub fn replacement_cost(&self, corrective: bool) -> f64 {
        if corrective {
            self.cost_cr
        } else {
            self.cost_pr
        }
    }

    fn validate(&self, id: usize) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::invalid(format!("component {id}: shape must be > 0")));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("component {id}: scale must be > 0")));
        }
        if !(self.cost_pr > 0.0) {
            return Err(Error::invalid(format!(
                "component {id}: PR cost must be > 0"
            )));
        }
        if !(self.cost_pr < self.cost_cr) {
            return Err(Error::invalid(format!(
                "component {id}: PR cost {} must be below CR cost {}",
                self.cost_pr, self.cost_cr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub components: Vec<ComponentSpec>,
    /// Number of decision periods `T`.
    pub horizon: u32,
    /// Period length `δ`.
    pub period_len: f64,
    pub setup_cost: f64,
    /// Upper bound `q` on individuals per component.
    pub individuals: u32,
}

impl SystemSpec {
    /// Builds a validated system with `δ = 1` and `q = T`.
    pub fn new(components: Vec<ComponentSpec>, horizon: u32, setup_cost: f64) -> Result<Self> {
        let system = Self {
            components,
            horizon,
            period_len: 1.0,
            setup_cost,
            individuals: horizon,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn n(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("system needs at least one component"));
        }
        if self.horizon == 0 {
            return Err(Error::invalid("horizon must be at least one period"));
        }
        if !(self.period_len > 0.0) {
            return Err(Error::invalid("period length must be > 0"));
        }
        if !(self.setup_cost >= 0.0 && self.setup_cost.is_finite()) {
            return Err(Error::invalid("setup cost must be finite and >= 0"));
        }
        if self.individuals == 0 {
            return Err(Error::invalid("q must be at least 1"));
        }
        for (i, c) in self.components.iter().enumerate() {
            c.validate(i)?;
        }
        Ok(())
    }

    /// Same system over a different horizon, keeping `q = T`.
    pub fn with_horizon(&self, horizon: u32) -> Self {
        Self {
            horizon,
            individuals: horizon,
            ..self.clone()
        }
    }

    pub fn failed_mask(&self) -> Vec<bool> {
        self.components.iter().map(|c| c.initially_failed).collect()
    }
}

/// One joint realization of every individual's lifetime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// `lifetimes[i][r]`; entry 0 is the first individual's residual lifetime.
    pub lifetimes: Vec<Vec<u32>>,
    pub probability: f64,
}

impl Scenario {
    pub fn new(lifetimes: Vec<Vec<u32>>, probability: f64) -> Self {
        Self {
            lifetimes,
            probability,
        }
    }

    pub fn n(&self) -> usize {
        self.lifetimes.len()
    }

    /// Individuals available for component `i`.
    pub fn individuals(&self, i: usize) -> usize {
        self.lifetimes[i].len()
    }

    pub fn max_lifetime(&self) -> u32 {
        self.lifetimes
            .iter()
            .flat_map(|row| row.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// `T' = T + max lifetime`.
    pub fn extended_horizon(&self, horizon: u32) -> u64 {
        horizon as u64 + self.max_lifetime() as u64
    }

    /// Epoch at which individual `r` of component `i` fails when it was
    /// installed at `installed` (ignored for the first individual).
    pub fn failure_epoch(&self, i: usize, r: usize, installed: u32) -> u64 {
        let life = self.lifetimes[i][r] as u64;
        if r == 0 {
            life.max(1)
        } else {
            installed as u64 + life
        }
    }

    pub fn validate(&self, system: &SystemSpec) -> Result<()> {
        if self.lifetimes.len() != system.n() {
            return Err(Error::invalid(format!(
                "scenario has {} components, system has {}",
                self.lifetimes.len(),
                system.n()
            )));
        }
        if !(self.probability > 0.0 && self.probability <= 1.0) {
            return Err(Error::invalid("scenario probability must lie in (0, 1]"));
        }
        for (i, row) in self.lifetimes.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::invalid(format!("component {i} has no individuals")));
            }
            let failed = system.components[i].initially_failed;
            if failed && row[0] != 0 {
                return Err(Error::invalid(format!(
                    "component {i} is initially failed and needs residual 0"
                )));
            }
            if !failed && row[0] == 0 {
                return Err(Error::invalid(format!(
                    "component {i} has residual 0 but is not flagged failed"
                )));
            }
            if let Some(r) = row.iter().skip(1).position(|&l| l == 0) {
                return Err(Error::invalid(format!(
                    "component {i} individual {} has zero lifetime",
                    r + 1
                )));
            }
        }
        Ok(())
    }
}

/// Per-component replacement epochs; entry `r` is when individual `r` is
/// replaced. Setup epochs are the distinct epochs across all components.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule {
    pub times: Vec<Vec<u32>>,
}

impl Schedule {
    pub fn new(times: Vec<Vec<u32>>) -> Self {
        Self { times }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            times: vec![Vec::new(); n],
        }
    }

    pub fn setup_times(&self) -> BTreeSet<u32> {
        self.times.iter().flatten().copied().collect()
    }

    /// `x_i = 1` iff component `i` is replaced at epoch 1.
    pub fn first_stage(&self) -> Vec<bool> {
        self.times.iter().map(|t| t.first() == Some(&1)).collect()
    }

    pub fn replacement_count(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReplacementKind {
    Preventive,
    Corrective,
    Unused,
}

/// Per-individual terms of the linearised type indicator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaTerms {
    /// `Y`: 1 for a preventive replacement.
    pub pr_indicator: u8,
    /// `x̃_{iT}`: the individual was replaced within the horizon.
    pub replaced_by_horizon: u8,
    /// First epoch of the `y` window (`T_ir`); the window has `T + 1` entries.
    pub window_start: u32,
    pub y: Vec<i8>,
    pub u: Vec<u8>,
    pub v: Vec<u8>,
    /// `Σ_{t < T_ir} w_t`.
    pub early_term: u8,
    /// `x̃^{r-1}_{iT} - x̃^r_{iT}`: 1 for the individual still in service at `T`.
    pub in_service_term: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementLabels {
    /// `kinds[i][r]` for every individual `r < q`.
    pub kinds: Vec<Vec<ReplacementKind>>,
    /// Present when produced by [`formula_classify`].
    pub formula: Option<Vec<Vec<FormulaTerms>>>,
}

impl ReplacementLabels {
    pub fn count(&self, i: usize, kind: ReplacementKind) -> usize {
        self.kinds[i].iter().filter(|&&k| k == kind).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub pr_total: f64,
    pub cr_total: f64,
    pub setup_total: f64,
    pub total: f64,
}

/// A violated constraint family of the extensive form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// Epoch outside `1..=T`, or more replacements than individuals.
    Domain {
        component: usize,
        individual: usize,
        time: u32,
    },
    /// (2b)-(2c): successor not replaced strictly after its predecessor.
    Ordering { component: usize, individual: usize },
    /// (2f)-(2g): individual not replaced by its failure epoch.
    LifetimeBound {
        component: usize,
        individual: usize,
        deadline: u64,
    },
    /// (2h): only a first individual may be replaced at epoch 1.
    FirstIndividualOnly { component: usize, individual: usize },
    /// (2j): an initially failed component is not replaced at epoch 1.
    FailureCoverage { component: usize },
}

impl Violation {
    pub fn family(&self) -> &'static str {
        match self {
            Violation::Domain { .. } => "domain (2q)",
            Violation::Ordering { .. } => "ordering (2b-2c)",
            Violation::LifetimeBound { .. } => "lifetime bound (2f-2g)",
            Violation::FirstIndividualOnly { .. } => "first individual only at t=1 (2h)",
            Violation::FailureCoverage { .. } => "first-stage failure coverage (2j)",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Domain {
                component,
                individual,
                time,
            } => write!(
                f,
                "{}: component {component} individual {individual} at t={time}",
                self.family()
            ),
            Violation::Ordering {
                component,
                individual,
            }
            | Violation::FirstIndividualOnly {
                component,
                individual,
            } => write!(
                f,
                "{}: component {component} individual {individual}",
                self.family()
            ),
            Violation::LifetimeBound {
                component,
                individual,
                deadline,
            } => write!(
                f,
                "{}: component {component} individual {individual} due by t={deadline}",
                self.family()
            ),
            Violation::FailureCoverage { component } => {
                write!(f, "{}: component {component}", self.family())
            }
        }
    }
}

/// Lists every violated constraint family. Setup linkage (2d)-(2e) holds by
/// construction because setup epochs are derived from the schedule.
pub fn check_feasibility(
    system: &SystemSpec,
    scenario: &Scenario,
    schedule: &Schedule,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let horizon = system.horizon;
    if schedule.times.len() != system.n() || scenario.n() != system.n() {
        out.push(Violation::Domain {
            component: schedule.times.len().min(scenario.n()),
            individual: 0,
            time: 0,
        });
        return out;
    }
    for (i, times) in schedule.times.iter().enumerate() {
        let q = scenario.individuals(i);
        let mut installed = 0u32;
        let mut broken = false;
        for (r, &t) in times.iter().enumerate() {
            if r >= q || t == 0 || t > horizon {
                out.push(Violation::Domain {
                    component: i,
                    individual: r,
                    time: t,
                });
                broken = true;
                break;
            }
            if r > 0 && t == 1 {
                out.push(Violation::FirstIndividualOnly {
                    component: i,
                    individual: r,
                });
                broken = true;
                break;
            }
            if r > 0 && t <= installed {
                out.push(Violation::Ordering {
                    component: i,
                    individual: r,
                });
                broken = true;
                break;
            }
            let deadline = scenario.failure_epoch(i, r, installed);
            if t as u64 > deadline {
                out.push(Violation::LifetimeBound {
                    component: i,
                    individual: r,
                    deadline,
                });
            }
            installed = t;
        }
        if !broken && times.len() < q {
            let r = times.len();
            let deadline = scenario.failure_epoch(i, r, installed);
            if deadline <= horizon as u64 {
                out.push(Violation::LifetimeBound {
                    component: i,
                    individual: r,
                    deadline,
                });
            }
        }
        if system.components[i].initially_failed && times.first() != Some(&1) {
            out.push(Violation::FailureCoverage { component: i });
        }
    }
    out
}

fn ensure_feasible(system: &SystemSpec, scenario: &Scenario, schedule: &Schedule) -> Result<()> {
    let violations = check_feasibility(system, scenario, schedule);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Infeasible(violations))
    }
}

/// Direct rule: replaced at installation + lifetime is CR, earlier is PR.
pub fn classify_replacements(
    system: &SystemSpec,
    scenario: &Scenario,
    schedule: &Schedule,
) -> Result<ReplacementLabels> {
    ensure_feasible(system, scenario, schedule)?;
    let kinds = schedule
        .times
        .iter()
        .enumerate()
        .map(|(i, times)| {
            let mut row = vec![ReplacementKind::Unused; scenario.individuals(i)];
            let mut installed = 0;
            for (r, &t) in times.iter().enumerate() {
                row[r] = if t as u64 == scenario.failure_epoch(i, r, installed) {
                    ReplacementKind::Corrective
                } else {
                    ReplacementKind::Preventive
                };
                installed = t;
            }
            row
        })
        .collect();
    Ok(ReplacementLabels {
        kinds,
        formula: None,
    })
}

/// Classification through the linearised indicator of the extensive form:
/// `w` is the first difference of the cumulative replacement indicator `x̃`,
/// `y_t = w^r_t - w^{r-1}_{t - T_ir}` over the window `T_ir..=T + T_ir`, and
/// `|y| = u + v` with `y = u - v`, `u + v <= 1`.
///
/// First individual: `Y = x̃_T - w_{T_i1}`.
/// Later individuals: `2Y = Σ(u + v) + Σ_{t<T_ir} w_t - (x̃^{r-1}_T - x̃^r_T)`.
pub fn formula_classify(
    system: &SystemSpec,
    scenario: &Scenario,
    schedule: &Schedule,
) -> Result<ReplacementLabels> {
    ensure_feasible(system, scenario, schedule)?;
    let horizon = system.horizon as u64;
    let mut kinds = Vec::with_capacity(system.n());
    let mut terms = Vec::with_capacity(system.n());
    for (i, times) in schedule.times.iter().enumerate() {
        let q = scenario.individuals(i);
        // w^r_t = 1 iff individual r is replaced at t (t in 1..=T); zero elsewhere.
        let w = |r: usize, t: i64| -> i8 {
            match times.get(r) {
                Some(&tr) if t >= 1 && t as u64 <= horizon && tr as i64 == t => 1,
                _ => 0,
            }
        };
        let replaced = |r: usize| -> u8 { u8::from(r < times.len()) };
        let mut row_kinds = Vec::with_capacity(q);
        let mut row_terms = Vec::with_capacity(q);
        for r in 0..q {
            let ft = if r == 0 {
                let life = (scenario.lifetimes[i][0] as u64).max(1);
                let at_failure = if life <= horizon {
                    w(0, life as i64)
                } else {
                    0
                };
                let y_ind = replaced(0) as i8 - at_failure;
                FormulaTerms {
                    pr_indicator: check_binary(y_ind as i64)?,
                    replaced_by_horizon: replaced(0),
                    window_start: life.min(u32::MAX as u64) as u32,
                    y: Vec::new(),
                    u: Vec::new(),
                    v: Vec::new(),
                    early_term: 0,
                    in_service_term: 0,
                }
            } else {
                let life = scenario.lifetimes[i][r] as i64;
                let span = horizon as usize + 1;
                let mut y = Vec::with_capacity(span);
                let mut u = Vec::with_capacity(span);
                let mut v = Vec::with_capacity(span);
                let mut abs_sum = 0i64;
                for k in 0..span as i64 {
                    let t = life + k;
                    let yt = w(r, t) - w(r - 1, t - life);
                    let (ut, vt) = if yt > 0 {
                        (1u8, 0u8)
                    } else if yt < 0 {
                        (0, 1)
                    } else {
                        (0, 0)
                    };
                    debug_assert!(ut + vt <= 1 && ut as i8 - vt as i8 == yt);
                    abs_sum += (ut + vt) as i64;
                    y.push(yt);
                    u.push(ut);
                    v.push(vt);
                }
                let early: i64 = (1..life).map(|t| w(r, t) as i64).sum();
                let in_service = replaced(r - 1) as i64 - replaced(r) as i64;
                let numerator = abs_sum + early - in_service;
                if numerator % 2 != 0 {
                    return Err(Error::invalid(format!(
                        "type indicator of component {i} individual {r} is not integral"
                    )));
                }
                FormulaTerms {
                    pr_indicator: check_binary(numerator / 2)?,
                    replaced_by_horizon: replaced(r),
                    window_start: life as u32,
                    y,
                    u,
                    v,
                    early_term: early as u8,
                    in_service_term: in_service as u8,
                }
            };
            row_kinds.push(match (ft.pr_indicator, ft.replaced_by_horizon) {
                (1, _) => ReplacementKind::Preventive,
                (0, 1) => ReplacementKind::Corrective,
                _ => ReplacementKind::Unused,
            });
            row_terms.push(ft);
        }
        kinds.push(row_kinds);
        terms.push(row_terms);
    }
    Ok(ReplacementLabels {
        kinds,
        formula: Some(terms),
    })
}

fn check_binary(value: i64) -> Result<u8> {
    match value {
        0 | 1 => Ok(value as u8),
        _ => Err(Error::invalid(format!(
            "type indicator evaluated to {value}"
        ))),
    }
}

/// Objective (2a) for one scenario, reconstructed from the formula path:
/// `Σ c_pr Y + c_cr (1 - Y) - c_cr (1 - x̃_T)` plus `d` per setup epoch.
pub fn formula_objective(
    system: &SystemSpec,
    scenario: &Scenario,
    schedule: &Schedule,
) -> Result<f64> {
    let labels = formula_classify(system, scenario, schedule)?;
    let terms = labels.formula.expect("formula path fills terms");
    let mut total = 0.0;
    for (c, row) in system.components.iter().zip(&terms) {
        for ft in row {
            let y = ft.pr_indicator as f64;
            let x_t = ft.replaced_by_horizon as f64;
            total += c.cost_pr * y + c.cost_cr * (1.0 - y) - c.cost_cr * (1.0 - x_t);
        }
    }
    let setups = (1..=system.horizon)
        .filter(|&t| schedule.times.iter().any(|row| row.contains(&t)))
        .count();
    total += system.setup_cost * setups as f64;
    Ok(total)
}

pub fn evaluate_schedule(
    system: &SystemSpec,
    scenario: &Scenario,
    schedule: &Schedule,
) -> Result<CostBreakdown> {
    ensure_feasible(system, scenario, schedule)?;
    Ok(price_unchecked(system, scenario, schedule))
}

/// Prices a schedule already known to be feasible.
pub(crate) fn price_unchecked(
    system: &SystemSpec,
    scenario: &Scenario,
    schedule: &Schedule,
) -> CostBreakdown {
    let mut pr_total = 0.0;
    let mut cr_total = 0.0;
    let mut used = vec![false; system.horizon as usize + 1];
    let mut setups = 0usize;
    for (i, times) in schedule.times.iter().enumerate() {
        let comp = &system.components[i];
        let (mut pr, mut cr) = (0usize, 0usize);
        let mut installed = 0;
        for (r, &t) in times.iter().enumerate() {
            if t as u64 == scenario.failure_epoch(i, r, installed) {
                cr += 1;
            } else {
                pr += 1;
            }
            installed = t;
            let slot = &mut used[t as usize];
            if !*slot {
                *slot = true;
                setups += 1;
            }
        }
        pr_total += comp.cost_pr * pr as f64;
        cr_total += comp.cost_cr * cr as f64;
    }
    let setup_total = system.setup_cost * setups as f64;
    CostBreakdown {
        pr_total,
        cr_total,
        setup_total,
        total: pr_total + cr_total + setup_total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_component(cost_pr: f64, cost_cr: f64, d: f64, horizon: u32) -> SystemSpec {
        SystemSpec::new(
            vec![ComponentSpec::new(2.0, 5.0, cost_pr, cost_cr)],
            horizon,
            d,
        )
        .unwrap()
    }

    #[test]
    fn corrective_at_failure_preventive_before() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 20]], 1.0);
        let cr = classify_replacements(&sys, &sc, &Schedule::new(vec![vec![4]])).unwrap();
        assert_eq!(cr.kinds[0][0], ReplacementKind::Corrective);
        assert_eq!(cr.kinds[0][1], ReplacementKind::Unused);
        let pr = classify_replacements(&sys, &sc, &Schedule::new(vec![vec![3]])).unwrap();
        assert_eq!(pr.kinds[0][0], ReplacementKind::Preventive);
    }

    #[test]
    fn chained_successor_at_install_plus_lifetime_is_corrective() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 5, 20]], 1.0);
        let labels = classify_replacements(&sys, &sc, &Schedule::new(vec![vec![3, 8]])).unwrap();
        assert_eq!(
            labels.kinds[0],
            vec![
                ReplacementKind::Preventive,
                ReplacementKind::Corrective,
                ReplacementKind::Unused
            ]
        );
    }

    #[test]
    fn empty_schedule_costs_nothing() {
        let sys = one_component(1.0, 10.0, 5.0, 5);
        let sc = Scenario::new(vec![vec![9, 9]], 1.0);
        let cost = evaluate_schedule(&sys, &sc, &Schedule::empty(1)).unwrap();
        assert_eq!(cost.total, 0.0);
    }

    #[test]
    fn single_corrective_with_setup() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 20]], 1.0);
        let cost = evaluate_schedule(&sys, &sc, &Schedule::new(vec![vec![4]])).unwrap();
        assert_eq!(cost.total, 15.0);
        assert_eq!(cost.cr_total, 10.0);
        assert_eq!(cost.setup_total, 5.0);
    }

    #[test]
    fn shared_setup_charged_once() {
        let comps = vec![
            ComponentSpec::new(2.0, 5.0, 1.0, 10.0),
            ComponentSpec::new(2.0, 5.0, 1.0, 10.0),
        ];
        let sys = SystemSpec::new(comps, 10, 5.0).unwrap();
        let sc = Scenario::new(vec![vec![4, 20], vec![5, 20]], 1.0);
        let cost = evaluate_schedule(&sys, &sc, &Schedule::new(vec![vec![3], vec![3]])).unwrap();
        assert_eq!(cost.total, 7.0);
        assert_eq!(cost.setup_total, 5.0);
    }

    #[test]
    fn successor_before_predecessor_is_ordering_violation() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 5, 5]], 1.0);
        let v = check_feasibility(&sys, &sc, &Schedule::new(vec![vec![4, 3]]));
        assert!(matches!(
            v[0],
            Violation::Ordering {
                component: 0,
                individual: 1
            }
        ));
        assert_eq!(v[0].family(), "ordering (2b-2c)");
    }

    #[test]
    fn overdue_individual_is_lifetime_violation() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 20]], 1.0);
        let late = check_feasibility(&sys, &sc, &Schedule::new(vec![vec![6]]));
        assert_eq!(
            late,
            vec![Violation::LifetimeBound {
                component: 0,
                individual: 0,
                deadline: 4
            }]
        );
        let never = check_feasibility(&sys, &sc, &Schedule::empty(1));
        assert!(matches!(
            never[0],
            Violation::LifetimeBound { deadline: 4, .. }
        ));
    }

    #[test]
    fn failed_component_must_be_replaced_first() {
        let comps = vec![ComponentSpec::new(2.0, 5.0, 1.0, 10.0).failed()];
        let sys = SystemSpec::new(comps, 6, 5.0).unwrap();
        let sc = Scenario::new(vec![vec![0, 9]], 1.0);
        let v = check_feasibility(&sys, &sc, &Schedule::new(vec![vec![2]]));
        assert!(v.contains(&Violation::FailureCoverage { component: 0 }));
        let ok = classify_replacements(&sys, &sc, &Schedule::new(vec![vec![1]])).unwrap();
        assert_eq!(ok.kinds[0][0], ReplacementKind::Corrective);
    }

    #[test]
    fn second_individual_at_epoch_one_is_rejected() {
        let sys = one_component(1.0, 10.0, 5.0, 4);
        let sc = Scenario::new(vec![vec![3, 3, 3, 3]], 1.0);
        let v = check_feasibility(&sys, &sc, &Schedule::new(vec![vec![1, 1]]));
        assert!(matches!(v[0], Violation::FirstIndividualOnly { .. }));
        let v = check_feasibility(&sys, &sc, &Schedule::new(vec![vec![0]]));
        assert!(matches!(v[0], Violation::Domain { .. }));
    }

    #[test]
    fn infeasible_schedule_is_an_error_for_pricing() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 20]], 1.0);
        let err = evaluate_schedule(&sys, &sc, &Schedule::new(vec![vec![6]])).unwrap_err();
        assert!(err.to_string().contains("lifetime bound"));
    }

    #[test]
    fn formula_path_cases() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 5, 3, 30]], 1.0);
        // CR individual: every window term vanishes.
        let labels = formula_classify(&sys, &sc, &Schedule::new(vec![vec![3, 8]])).unwrap();
        let terms = labels.formula.as_ref().unwrap();
        assert_eq!(terms[0][1].pr_indicator, 0);
        assert!(terms[0][1].u.iter().chain(&terms[0][1].v).all(|&x| x == 0));
        // Unused individual: Y = 0 and x̃_T = 0, so no net charge.
        assert_eq!(terms[0][3].pr_indicator, 0);
        assert_eq!(terms[0][3].replaced_by_horizon, 0);
        // The individual in service at T carries the correction term.
        assert_eq!(terms[0][2].in_service_term, 1);
        assert_eq!(labels.kinds[0][2], ReplacementKind::Unused);
        let direct = classify_replacements(&sys, &sc, &Schedule::new(vec![vec![3, 8]])).unwrap();
        assert_eq!(labels.kinds, direct.kinds);
    }

    #[test]
    fn formula_objective_matches_pricing() {
        let sys = one_component(1.0, 10.0, 5.0, 10);
        let sc = Scenario::new(vec![vec![4, 5, 3, 30]], 1.0);
        let s = Schedule::new(vec![vec![2, 5, 8]]);
        let direct = evaluate_schedule(&sys, &sc, &s).unwrap().total;
        assert_eq!(formula_objective(&sys, &sc, &s).unwrap(), direct);
    }

    #[test]
    fn invalid_costs_rejected() {
        let comps = vec![ComponentSpec::new(2.0, 5.0, 3.0, 2.0)];
        assert!(SystemSpec::new(comps, 5, 1.0).is_err());
    }
}
