//! File formats: instance JSON, scenario CSV, schedule JSON and run manifests.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ComponentSpec, Scenario, Schedule, SystemSpec};
use crate::scenario::ScenarioSet;

pub const INSTANCE_SCHEMA: &str = "maintplan.instance/v1";
pub const SCENARIO_SCHEMA: &str = "maintplan.scenarios/v1";
pub const MANIFEST_SCHEMA: &str = "maintplan.manifest/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemHeader {
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: u32,
    #[serde(default = "one")]
    pub delta: f64,
    pub setup_cost: f64,
    /// Individuals per component, defaults to `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(default = "instance_schema")]
    pub schema: String,
    pub system: SystemHeader,
    pub components: Vec<ComponentSpec>,
}

fn instance_schema() -> String {
    INSTANCE_SCHEMA.into()
}

impl InstanceFile {
    pub fn from_system(system: &SystemSpec) -> Self {
        Self {
            schema: INSTANCE_SCHEMA.into(),
            system: SystemHeader {
                n: system.n(),
                horizon: system.horizon,
                delta: system.period_len,
                setup_cost: system.setup_cost,
                q: (system.individuals != system.horizon).then_some(system.individuals),
            },
            components: system.components.clone(),
        }
    }

    pub fn into_system(self) -> Result<SystemSpec> {
        if self.schema != INSTANCE_SCHEMA {
            return Err(Error::invalid(format!(
                "unsupported instance schema {:?}",
                self.schema
            )));
        }
        if self.system.n != self.components.len() {
            return Err(Error::invalid(format!(
                "system.n = {} but {} components listed",
                self.system.n,
                self.components.len()
            )));
        }
        let system = SystemSpec {
            components: self.components,
            horizon: self.system.horizon,
            period_len: self.system.delta,
            setup_cost: self.system.setup_cost,
            individuals: self.system.q.unwrap_or(self.system.horizon),
        };
        system.validate()?;
        Ok(system)
    }
}

pub fn parse_instance(text: &str) -> Result<SystemSpec> {
    serde_json::from_str::<InstanceFile>(text)?.into_system()
}

pub fn read_instance(path: &Path) -> Result<SystemSpec> {
    parse_instance(&std::fs::read_to_string(path)?)
}

pub fn write_instance<W: Write>(system: &SystemSpec, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &InstanceFile::from_system(system))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct LifetimeRow {
    scenario_id: usize,
    component_id: usize,
    individual_index: usize,
    lifetime: u32,
}

/// Writes one row per sampled lifetime after a `#` schema line.
pub fn write_scenarios<W: Write>(set: &ScenarioSet, mut out: W) -> Result<()> {
    writeln!(
        out,
        "# schema={SCENARIO_SCHEMA} seed={} count={}",
        set.seed,
        set.len()
    )?;
    let mut w = csv::Writer::from_writer(out);
    for (k, sc) in set.scenarios.iter().enumerate() {
        for (i, lives) in sc.lifetimes.iter().enumerate() {
            for (r, &lifetime) in lives.iter().enumerate() {
                w.serialize(LifetimeRow {
                    scenario_id: k,
                    component_id: i,
                    individual_index: r,
                    lifetime,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a scenario CSV back into an equiprobable set. Rows may come in any
/// order but every (scenario, component) must list individuals `0..q`
/// without gaps.
pub fn read_scenarios<R: Read>(system: &SystemSpec, mut input: R) -> Result<ScenarioSet> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let seed = text
        .lines()
        .next()
        .filter(|l| l.starts_with('#'))
        .and_then(|l| l.split_whitespace().find_map(|kv| kv.strip_prefix("seed=")))
        .map(|s| {
            s.parse::<u64>()
                .map_err(|_| Error::invalid("bad seed in scenario header"))
        })
        .transpose()?
        .unwrap_or(0);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<LifetimeRow> = Vec::new();
    for row in reader.deserialize() {
        rows.push(row?);
    }
    let count = rows.iter().map(|r| r.scenario_id + 1).max().unwrap_or(0);
    let n = system.n();
    let mut lifetimes: Vec<Vec<Vec<Option<u32>>>> = vec![vec![Vec::new(); n]; count];
    for row in rows {
        if row.component_id >= n {
            return Err(Error::invalid(format!(
                "component {} out of range",
                row.component_id
            )));
        }
        let slot = &mut lifetimes[row.scenario_id][row.component_id];
        if slot.len() <= row.individual_index {
            slot.resize(row.individual_index + 1, None);
        }
        if slot[row.individual_index].replace(row.lifetime).is_some() {
            return Err(Error::invalid(format!(
                "duplicate row for scenario {} component {} individual {}",
                row.scenario_id, row.component_id, row.individual_index
            )));
        }
    }
    let scenarios = lifetimes
        .into_iter()
        .enumerate()
        .map(|(k, comps)| {
            let lives = comps
                .into_iter()
                .enumerate()
                .map(|(i, l)| {
                    l.into_iter()
                        .collect::<Option<Vec<u32>>>()
                        .filter(|v| !v.is_empty())
                        .ok_or_else(|| {
                            Error::invalid(format!(
                                "scenario {k} component {i}: missing individuals"
                            ))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Scenario::new(lives, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let set = ScenarioSet::uniform(scenarios, system.horizon, seed)?;
    set.validate(system)?;
    Ok(set)
}

pub fn schedule_to_json(schedule: &Schedule) -> Result<String> {
    Ok(serde_json::to_string(&schedule.times)?)
}

pub fn schedule_from_json(text: &str) -> Result<Schedule> {
    Ok(Schedule::new(serde_json::from_str(text)?))
}

/// Record of one CLI run: enough to regenerate every artifact it lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub version: String,
    pub seeds: Vec<u64>,
    pub parameters: serde_json::Value,
    pub artifacts: Vec<String>,
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, parameters: serde_json::Value) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seeds: Vec::new(),
            parameters,
            artifacts: Vec::new(),
            results: serde_json::Value::Null,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
