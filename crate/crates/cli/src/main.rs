use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use maintplan::heuristic::{solve_scenario, HeuristicConfig, PhTerms};
use maintplan::io::{
    parse_instance, read_instance, read_scenarios, schedule_to_json, write_scenarios, RunManifest,
};
use maintplan::lab::{
    direct_grouping_plan, individual_tentative_schedule, rolling_horizon_simulate, Planner,
    RollingConfig,
};
use maintplan::lp::export_def_lp;
use maintplan::model::{evaluate_schedule, Scenario, SystemSpec};
use maintplan::oracle::{exact_def_optimum, exact_multistage_value, Budget};
use maintplan::pha::{run_pha, HeuristicSubSolver, PhaConfig};
use maintplan::scenario::{
    cost_bound, first_stage_count, required_sample_size, sample_scenarios, HazardModel, SaaParams,
    ScenarioSet,
};

const DEFAULT_INSTANCE: &str = include_str!("../fixtures/n2_t6.json");
const TABLE_A4: &str = include_str!("../fixtures/table_a4.json");

#[derive(Parser, Debug)]
#[command(
    name = "maintplan",
    version,
    about = "Replacement planning with shared setup costs"
)]
struct Cli {
    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "maintplan-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Scenario count needed for the SAA guarantee.
    SampleSize(SampleSizeArgs),
    /// Draw a scenario set and write it as CSV.
    Sample(SampleArgs),
    /// Solve the two-stage problem with PHA and the grouping heuristic.
    SolveDef(SolveDefArgs),
    /// Run the grouping heuristic on one scenario.
    SolveScenario(SolveScenarioArgs),
    /// Rolling-horizon simulation of a planner.
    Simulate(SimulateArgs),
    /// Direct-grouping benchmark plan.
    Benchmark(BenchmarkArgs),
    /// Export the extensive form as an LP file.
    ExportLp(ExportLpArgs),
    /// Packaged reproduction recipes.
    Repro(ReproArgs),
}

#[derive(Args, Debug, Serialize)]
struct InstanceArgs {
    /// Instance JSON; the packaged two-component fixture when omitted.
    #[arg(long)]
    instance: Option<PathBuf>,
}

impl InstanceArgs {
    fn load(&self) -> Result<SystemSpec> {
        match &self.instance {
            Some(p) => {
                read_instance(p).with_context(|| format!("reading instance {}", p.display()))
            }
            None => Ok(parse_instance(DEFAULT_INSTANCE)?),
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct ScenarioArgs {
    /// Scenario CSV to load instead of sampling.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    /// Scenarios to sample; the sample-size rule applies when omitted.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioArgs {
    fn load(&self, system: &SystemSpec) -> Result<ScenarioSet> {
        if let Some(p) = &self.scenarios {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            return Ok(read_scenarios(system, f)?);
        }
        let count = match self.count {
            Some(c) => c,
            None => required_sample_size(&SaaParams::for_system(system))?.rounded as usize,
        };
        Ok(sample_scenarios(system, count.max(1), self.seed)?)
    }
}

#[derive(Args, Debug, Serialize)]
struct SampleSizeArgs {
    /// Number of components (with `--failed-first`, one is failed).
    #[arg(long, conflicts_with = "instance")]
    n: Option<u32>,
    #[arg(long)]
    failed_first: bool,
    /// Derive |X| and sigma from an instance instead.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Relative precision: epsilon = frac * sigma, tau = frac * epsilon.
    #[arg(long, default_value_t = 0.1)]
    frac: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    scenarios: ScenarioArgs,
}

#[derive(Args, Debug, Serialize)]
struct SolveDefArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    scenarios: ScenarioArgs,
    /// Also solve the extensive form exactly (under the work budget).
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value_t = 1e-2)]
    tolerance: f64,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
    #[arg(long, default_value_t = 2_000_000_000)]
    budget: u128,
}

#[derive(Args, Debug, Serialize)]
struct SolveScenarioArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Lifetimes as JSON `[[l_i0, l_i1, ...], ...]`; sampled when omitted.
    #[arg(long)]
    lifetimes: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record option costs of every grouping call.
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum HazardArg {
    Weibull,
    Zero,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Instance JSON; factorial cell 1 (all high levels) when omitted.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, default_value = "pha-heuristic")]
    planner: String,
    #[arg(long, value_enum, default_value = "weibull")]
    hazard: HazardArg,
    #[arg(long, default_value_t = 5)]
    replications: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scenarios per planning call; the sample-size rule applies when omitted.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct BenchmarkArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    scenarios: ScenarioArgs,
}

#[derive(Args, Debug, Serialize)]
struct ExportLpArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    scenarios: ScenarioArgs,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Recipe {
    /// Scenario counts for n = 2..7.
    Table2,
    /// PHA against the exact extensive form on small slices of Table A.4.
    Table3Small,
    /// Rolling-horizon comparison over the 16 factorial cells.
    Table5,
}

#[derive(Args, Debug, Serialize)]
struct ReproArgs {
    #[arg(value_enum)]
    recipe: Recipe,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    replications: usize,
    /// Scenarios per planning call in the rolling recipe.
    #[arg(long, default_value_t = 910)]
    count: usize,
    /// Restrict the rolling recipe to these cells (1-16).
    #[arg(long, value_delimiter = ',')]
    cells: Vec<usize>,
}

struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn artifact(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.manifest.artifacts.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    fn finish(self) -> Result<()> {
        self.manifest.write(&self.out.join("manifest.json"))?;
        Ok(())
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let (name, params) = match serde_json::to_value(&cli.command)? {
        serde_json::Value::Object(m) if m.len() == 1 => m.into_iter().next().expect("one entry"),
        other => ("unknown".to_string(), other),
    };
    let mut run = Run {
        out: cli.out.clone(),
        manifest: RunManifest::new(&name, params),
    };
    match &cli.command {
        Command::SampleSize(a) => sample_size(a, &mut run)?,
        Command::Sample(a) => sample(a, &mut run)?,
        Command::SolveDef(a) => solve_def(a, &mut run)?,
        Command::SolveScenario(a) => solve_one(a, &mut run)?,
        Command::Simulate(a) => simulate(a, &mut run)?,
        Command::Benchmark(a) => benchmark(a, &mut run)?,
        Command::ExportLp(a) => export_lp(a, &mut run)?,
        Command::Repro(a) => repro(a, &mut run)?,
    }
    run.finish()
}

fn sample_size(a: &SampleSizeArgs, run: &mut Run) -> Result<()> {
    let (sigma, count) = match (&a.instance, a.n) {
        (Some(p), _) => {
            let sys = read_instance(p)?;
            (cost_bound(&sys), first_stage_count(&sys))
        }
        (None, Some(n)) => {
            if n == 0 {
                bail!("--n must be at least 1");
            }
            // sigma cancels under the relative precision setting.
            (1.0, 2f64.powi((n - u32::from(a.failed_first)) as i32))
        }
        (None, None) => bail!("give --n or --instance"),
    };
    let epsilon = a.frac * sigma;
    let params = SaaParams {
        epsilon,
        tau: a.frac * epsilon,
        alpha: a.alpha,
        sigma,
        first_stage_count: count,
    };
    let size = required_sample_size(&params)?;
    println!("{}", size.rounded);
    run.manifest.results = json!({ "raw": size.raw, "rounded": size.rounded, "first_stage_count": count, "sigma": sigma });
    Ok(())
}

fn sample(a: &SampleArgs, run: &mut Run) -> Result<()> {
    let sys = a.instance.load()?;
    let set = a.scenarios.load(&sys)?;
    write_scenarios(&set, run.artifact("scenarios.csv")?)?;
    run.manifest.seeds.push(set.seed);
    run.manifest.results =
        json!({ "scenarios": set.len(), "extended_horizon": set.extended_horizon });
    println!("sampled {} scenarios", set.len());
    Ok(())
}

fn solve_def(a: &SolveDefArgs, run: &mut Run) -> Result<()> {
    let sys = a.instance.load()?;
    let set = a.scenarios.load(&sys)?;
    run.manifest.seeds.push(set.seed);
    let config = PhaConfig {
        rho: a.rho,
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        ..PhaConfig::default()
    };
    let sub = HeuristicSubSolver {
        config: HeuristicConfig::default(),
    };
    let pha = run_pha(&sys, &set, &config, &sub)?;
    pha.write_trace_csv(run.artifact("pha_trace.csv")?)?;
    println!(
        "pha x={:?} objective={:.4} iterations={} converged={}",
        pha.decision.x, pha.decision.objective_estimate, pha.state.iteration, pha.converged
    );
    let mut results = json!({ "pha": pha.decision, "iterations": pha.state.iteration, "converged": pha.converged });
    if a.exact {
        let exact = exact_def_optimum(&sys, &set, &Budget { max_work: a.budget })?;
        println!(
            "exact x={:?} objective={:.4}",
            exact.decision.x, exact.decision.objective_estimate
        );
        results["exact"] = serde_json::to_value(&exact.decision)?;
    }
    serde_json::to_writer_pretty(run.artifact("decision.json")?, &results)?;
    run.manifest.results = results;
    Ok(())
}

fn solve_one(a: &SolveScenarioArgs, run: &mut Run) -> Result<()> {
    let sys = a.instance.load()?;
    let scenario = match &a.lifetimes {
        Some(text) => {
            let lives: Vec<Vec<u32>> = serde_json::from_str(text).context("parsing --lifetimes")?;
            let sc = Scenario::new(lives, 1.0);
            sc.validate(&sys)?;
            sc
        }
        None => {
            run.manifest.seeds.push(a.seed);
            sample_scenarios(&sys, 1, a.seed)?.scenarios.remove(0)
        }
    };
    let config = HeuristicConfig {
        trace: a.trace,
        ..HeuristicConfig::default()
    };
    let Some(sol) = solve_scenario(&sys, &scenario, &PhTerms::disabled(sys.n()), &config, None)?
    else {
        bail!("no feasible schedule for this scenario");
    };
    let cost = evaluate_schedule(&sys, &scenario, &sol.schedule)?;
    std::io::Write::write_all(
        &mut run.artifact("schedule.json")?,
        schedule_to_json(&sol.schedule)?.as_bytes(),
    )?;
    if let Some(trace) = &sol.trace {
        serde_json::to_writer_pretty(run.artifact("trace.json")?, trace)?;
    }
    println!(
        "schedule={} total={:.4}",
        schedule_to_json(&sol.schedule)?,
        cost.total
    );
    run.manifest.results = json!({
        "lifetimes": scenario.lifetimes,
        "cost": cost,
        "delta": sol.delta,
        "iota": sol.iota,
        "steps": sol.steps,
    });
    Ok(())
}

fn simulate(a: &SimulateArgs, run: &mut Run) -> Result<()> {
    // Rolling runs default to the all-high factorial cell, whose components start new.
    let sys = match &a.instance {
        Some(p) => read_instance(p).with_context(|| format!("reading instance {}", p.display()))?,
        None => factorial_cell(1)?,
    };
    let planner: Planner = a.planner.parse()?;
    let mut config = RollingConfig::new(planner);
    config.replications = a.replications;
    config.seed = a.seed;
    config.scenarios = a.count;
    config.hazard = match a.hazard {
        HazardArg::Weibull => HazardModel::Weibull,
        HazardArg::Zero => HazardModel::Zero,
    };
    let result = rolling_horizon_simulate(&sys, &config)?;
    result.write_csv(run.artifact("rolling.csv")?)?;
    let summary = result.summary();
    serde_json::to_writer_pretty(run.artifact("rolling_summary.json")?, &summary)?;
    run.manifest.seeds.push(a.seed);
    println!(
        "mean={:.4} std_error={:.4}",
        summary.mean, summary.std_error
    );
    run.manifest.results = serde_json::to_value(&summary)?;
    Ok(())
}

fn benchmark(a: &BenchmarkArgs, run: &mut Run) -> Result<()> {
    let sys = a.instance.load()?;
    let set = a.scenarios.load(&sys)?;
    let plans: Vec<_> = (0..sys.n())
        .map(|i| individual_tentative_schedule(&sys, i, true, &HazardModel::Weibull))
        .collect();
    let plan = direct_grouping_plan(&sys, &set, &plans)?;
    let results = json!({ "tentative": plans, "plan": plan });
    serde_json::to_writer_pretty(run.artifact("benchmark.json")?, &results)?;
    run.manifest.seeds.push(set.seed);
    println!(
        "groups={} expected_cost={:.4}",
        plan.groups.len(),
        plan.expected_cost
    );
    run.manifest.results = results;
    Ok(())
}

fn export_lp(a: &ExportLpArgs, run: &mut Run) -> Result<()> {
    let sys = a.instance.load()?;
    let set = a.scenarios.load(&sys)?;
    let manifest = export_def_lp(&sys, &set, run.artifact("model.lp")?)?;
    serde_json::to_writer_pretty(run.artifact("model.lp.json")?, &manifest)?;
    run.manifest.seeds.push(set.seed);
    println!(
        "variables={} constraints={}",
        manifest.variables, manifest.constraints
    );
    run.manifest.results = serde_json::to_value(&manifest)?;
    Ok(())
}

fn repro(a: &ReproArgs, run: &mut Run) -> Result<()> {
    match a.recipe {
        Recipe::Table2 => {
            let mut rows = Vec::new();
            for n in 2..=7u32 {
                let size =
                    required_sample_size(&SaaParams::standard(1.0, 2f64.powi(n as i32 - 1)))?;
                println!("n={n} scenarios={}", size.rounded);
                rows.push(json!({ "n": n, "raw": size.raw, "rounded": size.rounded }));
            }
            run.manifest.results = json!(rows);
        }
        Recipe::Table3Small => {
            let full = parse_instance(TABLE_A4)?;
            let mut w = csv_writer(run.artifact("table3_small.csv")?);
            w.write_record(["n", "T", "scenarios", "exact", "pha", "gap_pct"])?;
            let mut rows = Vec::new();
            for n in 2..=3usize {
                let mut sys = full.with_horizon(6);
                sys.components.truncate(n);
                let set = sample_scenarios(&sys, 8, a.seed)?;
                let exact = exact_def_optimum(&sys, &set, &Budget::default())?;
                let pha = run_pha(
                    &sys,
                    &set,
                    &PhaConfig::default(),
                    &HeuristicSubSolver {
                        config: HeuristicConfig::default(),
                    },
                )?;
                let (e, p) = (
                    exact.decision.objective_estimate,
                    pha.decision.objective_estimate,
                );
                let gap = if e > 0.0 { 100.0 * (p / e - 1.0) } else { 0.0 };
                println!("n={n} exact={e:.4} pha={p:.4} gap={gap:.2}%");
                w.write_record([
                    n.to_string(),
                    "6".into(),
                    "8".into(),
                    e.to_string(),
                    p.to_string(),
                    gap.to_string(),
                ])?;
                rows.push(json!({ "n": n, "exact": e, "pha": p, "gap_pct": gap }));
            }
            w.flush()?;
            run.manifest.seeds.push(a.seed);
            run.manifest.results = json!(rows);
        }
        Recipe::Table5 => {
            let cells: Vec<usize> = if a.cells.is_empty() {
                (1..=16).collect()
            } else {
                a.cells.clone()
            };
            if let Some(bad) = cells.iter().find(|&&c| !(1..=16).contains(&c)) {
                bail!("cell {bad} outside 1..=16");
            }
            let mut w = csv_writer(run.artifact("table5.csv")?);
            w.write_record([
                "cell",
                "v1",
                "pha_mean",
                "pha_se",
                "benchmark_mean",
                "benchmark_se",
            ])?;
            let mut rows = Vec::new();
            for &cell in &cells {
                let sys = factorial_cell(cell)?;
                let v1 = exact_multistage_value(&sys, &HazardModel::Weibull, &Budget::default())?
                    .initial_value();
                let mut stats = Vec::new();
                for planner in [Planner::PhaHeuristic, Planner::DirectGrouping] {
                    let mut config = RollingConfig::new(planner);
                    config.seed = a.seed;
                    config.replications = a.replications;
                    config.scenarios = Some(a.count);
                    let r = rolling_horizon_simulate(&sys, &config)?;
                    stats.push((r.mean, r.std_error));
                }
                println!(
                    "cell={cell:2} v1={v1:.2} pha={:.2}±{:.2} benchmark={:.2}±{:.2}",
                    stats[0].0, stats[0].1, stats[1].0, stats[1].1
                );
                w.write_record([
                    cell.to_string(),
                    v1.to_string(),
                    stats[0].0.to_string(),
                    stats[0].1.to_string(),
                    stats[1].0.to_string(),
                    stats[1].1.to_string(),
                ])?;
                rows.push(
                    json!({ "cell": cell, "v1": v1, "pha": stats[0], "benchmark": stats[1] }),
                );
            }
            w.flush()?;
            run.manifest.seeds.push(a.seed);
            run.manifest.results = json!(rows);
        }
    }
    Ok(())
}

fn csv_writer(out: BufWriter<File>) -> csv::Writer<BufWriter<File>> {
    csv::Writer::from_writer(out)
}

/// Two-component system for factorial cell `case` (1-16). Bits, slowest
/// first, pick shape, scale, setup cost and corrective cost; 0 is the high level.
fn factorial_cell(case: usize) -> Result<SystemSpec> {
    use maintplan::model::ComponentSpec;
    let bit = |k: usize| ((case - 1) >> (3 - k)) & 1 == 1;
    let shapes = if bit(0) { [2.7, 2.8] } else { [6.5, 6.7] };
    let scales = if bit(1) { [4.4, 3.3] } else { [9.2, 7.9] };
    let d = if bit(2) { 5.0 } else { 100.0 };
    let cr = if bit(3) { [14.4, 11.4] } else { [25.4, 22.4] };
    let comps = (0..2)
        .map(|i| ComponentSpec::new(shapes[i], scales[i], 1.0, cr[i]))
        .collect();
    Ok(SystemSpec::new(comps, 10, d)?)
}
