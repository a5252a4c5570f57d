//! Config-driven runs, replications, sweeps and their output files.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{ConfigError, SimError};
use crate::metrics::{aggregate, drift_bound_B, AggregateSummary, BoundParams, RunSummary};
use crate::model::SystemModel;
use crate::scenario::{arrival_rate, build_scenario, build_workload, utilization, Scenario};
use crate::sim::{slots_csv, PoscarsPolicy, RunOutput, SimOptions, Simulation};

pub const SCHEMA_VERSION: u32 = 1;

/// A validated config with its built model.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: Config,
    pub scenario: Scenario,
}

impl Experiment {
    pub fn new(config: Config) -> Result<Self, ConfigError> {
        config.validate()?;
        let scenario = build_scenario(&config)?;
        Ok(Self { config, scenario })
    }

    pub fn model(&self) -> &SystemModel {
        &self.scenario.model
    }

    pub fn options(&self) -> SimOptions {
        let c = &self.config;
        SimOptions {
            alpha: c.scheduler.alpha,
            gamma: c.scheduler.gamma,
            cost_mode: c.simulation.cost_mode,
            warmup: c.simulation.warmup,
            slot_length_ms: c.simulation.slot_length_ms,
            check: c.simulation.check_invariants,
            jitter: c
                .topology
                .jitter
                .then_some((c.topology.base_cost, c.topology.variation)),
        }
    }

    /// Seed of replication `r`: `seed + r`.
    pub fn seed_of(&self, r: usize) -> u64 {
        self.config.simulation.seed.wrapping_add(r as u64)
    }

    pub fn simulation(&self, r: usize) -> Result<Simulation<PoscarsPolicy>, ConfigError> {
        let seed = self.seed_of(r);
        let trace = build_workload(&self.config, self.model(), seed)?;
        let policy = PoscarsPolicy::new(
            self.config.scheduler.params(),
            self.config.scheduler.strategy(),
            seed,
        );
        Ok(Simulation::new(
            self.model().clone(),
            trace,
            &self.config.prediction.spec(),
            policy,
            self.options(),
            seed,
        ))
    }

    pub fn run_replication(&self, r: usize) -> Result<RunOutput, SimError> {
        self.simulation(r)?.run(self.config.simulation.horizon)
    }

    /// All replications, in replication order regardless of scheduling.
    pub fn replicate(&self) -> Result<Vec<RunOutput>, SimError> {
        let n = self.config.simulation.replications;
        let go = || {
            (0..n)
                .into_par_iter()
                .map(|r| self.run_replication(r))
                .collect()
        };
        with_threads(self.config.simulation.threads, go)
    }

    pub fn bound_params(&self) -> BoundParams {
        let m = self.model();
        BoundParams {
            services: m.service_count() as f64,
            a_max: f64::from(self.config.workload.a_max),
            d: f64::from(m.catalog.max_window()),
            b_max: m.placement.max_instances() as f64,
            phi_max: f64::from(m.catalog.max_phi()),
            alpha: self.config.scheduler.alpha,
        }
    }

    pub fn report(&self, runs: &[RunOutput]) -> RunReport {
        let m = self.model();
        let rate = arrival_rate(&self.config, m);
        let b = drift_bound_B(&self.bound_params());
        let v = self.config.scheduler.v;
        RunReport {
            schema_version: SCHEMA_VERSION,
            config: self.config.clone(),
            scenario: ScenarioInfo {
                servers: m.servers.len(),
                services: m.service_count(),
                vnfs: m.catalog.vnfs.len(),
                instances: m.instances().len(),
                window_sizes: m.catalog.services.iter().map(|s| s.window_size).collect(),
                arrival_rate: rate,
                utilization: utilization(m, rate),
            },
            summary: aggregate(&runs.iter().map(|r| r.summary.clone()).collect::<Vec<_>>()),
            replications: runs.iter().map(|r| r.summary.clone()).collect(),
            diagnostics: Diagnostics {
                bound_b: b,
                bound_b_over_v: if v > 0.0 { Some(b / v) } else { None },
            },
        }
    }
}

fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub servers: usize,
    pub services: usize,
    pub vnfs: usize,
    pub instances: usize,
    pub window_sizes: Vec<u32>,
    pub arrival_rate: f64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub bound_b: f64,
    pub bound_b_over_v: Option<f64>,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: Config,
    pub scenario: ScenarioInfo,
    pub summary: AggregateSummary,
    pub replications: Vec<RunSummary>,
    pub diagnostics: Diagnostics,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), SimError> {
    fs::write(path, contents).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<(), SimError> {
    fs::create_dir_all(path).map_err(|source| SimError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a config, applies overrides and an optional seed.
pub fn resolve_config(
    path: &Path,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<Config, ConfigError> {
    let mut cfg = Config::load(path)?.apply_overrides(overrides)?;
    if let Some(s) = seed {
        cfg.simulation.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs every replication and writes `slots.csv` (first replication),
/// `slots_rep<r>.csv` (others) and `summary.json` into `out`.
pub fn execute(cfg: Config, out: &Path) -> Result<RunReport, SimError> {
    let exp = Experiment::new(cfg)?;
    create_dir(out)?;
    let runs = if exp.config.simulation.dump_queues {
        let mut runs = vec![run_with_dump(&exp, &out.join("queues.csv"))?];
        let rest: Result<Vec<_>, _> = with_threads(exp.config.simulation.threads, || {
            (1..exp.config.simulation.replications)
                .into_par_iter()
                .map(|r| exp.run_replication(r))
                .collect()
        });
        runs.extend(rest?);
        runs
    } else {
        exp.replicate()?
    };
    for (r, run) in runs.iter().enumerate() {
        let name = if r == 0 {
            "slots.csv".to_string()
        } else {
            format!("slots_rep{r}.csv")
        };
        write(&out.join(name), slots_csv(&run.slots))?;
    }
    if exp.config.simulation.export_topology {
        export_topology(&exp, out)?;
    }
    let report = exp.report(&runs);
    write(&out.join("summary.json"), to_json(&report))?;
    Ok(report)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn run_with_dump(exp: &Experiment, path: &Path) -> Result<RunOutput, SimError> {
    let mut sim = exp.simulation(0)?;
    let mut dump = b"slot,queue,length,carry\n".to_vec();
    let mut slots = Vec::new();
    for _ in 0..exp.config.simulation.horizon {
        slots.push(sim.step()?.metrics);
        sim.state().write_dump(&mut dump).expect("in-memory write");
    }
    write(path, dump)?;
    Ok(RunOutput {
        summary: sim.summary(),
        slots,
    })
}

fn export_topology(exp: &Experiment, out: &Path) -> Result<(), SimError> {
    let mut buf = Vec::new();
    exp.model()
        .comm
        .write_csv(&mut buf)
        .expect("in-memory write");
    write(&out.join("comm_cost.csv"), buf)?;
    if let Some(g) = &exp.scenario.graph {
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).expect("in-memory write");
        write(&out.join("topology.edges"), buf)?;
    }
    if let Some(h) = &exp.model().comm.hops {
        let mut buf = Vec::new();
        h.write_csv(&mut buf).expect("in-memory write");
        write(&out.join("hops.csv"), buf)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    V,
    D,
    #[serde(rename = "probe_ratio")]
    ProbeRatio,
    #[serde(rename = "false_positive_rate")]
    FalsePositiveRate,
    #[serde(rename = "scheduler")]
    Scheduler,
}

impl SweepAxis {
    pub fn key(&self) -> &'static str {
        match self {
            Self::V => "scheduler.V",
            Self::D => "prediction.d_avg",
            Self::ProbeRatio => "scheduler.probe_ratio",
            Self::FalsePositiveRate => "prediction.false_positive_rate",
            Self::Scheduler => "scheduler.kind",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::V => "V",
            Self::D => "D",
            Self::ProbeRatio => "probe_ratio",
            Self::FalsePositiveRate => "false_positive_rate",
            Self::Scheduler => "scheduler",
        }
    }
}

/// Contents of a sweep spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<toml::Value>,
    /// Base config path, relative to the sweep file; defaults apply if absent.
    #[serde(default)]
    pub base: Option<PathBuf>,
    /// Overrides applied to the base before the axis value.
    #[serde(default)]
    pub set: Vec<String>,
    /// Output directory, relative to the sweep file.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Concurrent sweep points; 0 = all cores.
    #[serde(default)]
    pub threads: usize,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = match fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ConfigError::NotFound(path.to_path_buf()))
            }
            Err(source) => {
                return Err(ConfigError::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
        };
        let mut spec: Self =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        spec.base = spec
            .base
            .map(|b| if b.is_relative() { dir.join(b) } else { b });
        spec.out = spec
            .out
            .map(|o| if o.is_relative() { dir.join(o) } else { o });
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.values.is_empty() {
            return Err(ConfigError::Invalid(
                "sweep values must be non-empty".into(),
            ));
        }
        Ok(())
    }

    fn base_config(&self) -> Result<Config, ConfigError> {
        let base = match &self.base {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        base.apply_overrides(&self.set)
    }

    /// Config of sweep point `i`.
    pub fn point_config(&self, i: usize) -> Result<Config, ConfigError> {
        let value = value_literal(&self.values[i]);
        let cfg = self
            .base_config()?
            .apply_overrides(&[format!("{}={value}", self.axis.key())])?;
        if self.axis == SweepAxis::ProbeRatio
            && cfg.scheduler.kind == crate::config::SchedulerKind::Poscars
        {
            return Err(ConfigError::Invalid(
                "probe_ratio sweep needs a sampling scheduler".into(),
            ));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn value_literal(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: String,
    pub result: Result<AggregateSummary, String>,
}

pub const SWEEP_HEADER: &str = "axis,value,replications,time_avg_cost,time_avg_cost_std,time_avg_h,time_avg_h_std,time_avg_m,time_avg_g,response_mean_ms,response_mean_ms_std,response_p50_ms,response_p95_ms,response_p99_ms,error";

pub fn sweep_csv(axis: SweepAxis, points: &[SweepPoint]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for p in points {
        match &p.result {
            Ok(s) => out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},\n",
                axis.name(),
                p.value,
                s.replications,
                s.time_avg_cost.mean,
                s.time_avg_cost.std,
                s.time_avg_h.mean,
                s.time_avg_h.std,
                s.time_avg_m.mean,
                s.time_avg_g.mean,
                s.response_mean_ms.mean,
                s.response_mean_ms.std,
                s.response_p50_ms.mean,
                s.response_p95_ms.mean,
                s.response_p99_ms.mean,
            )),
            Err(e) => out.push_str(&format!(
                "{},{},,,,,,,,,,,,,\"{}\"\n",
                axis.name(),
                p.value,
                e.replace('"', "'")
            )),
        }
    }
    out
}

/// Runs every sweep point (concurrently), writing `<out>/<axis>_<i>/` per
/// point and a combined `sweep.csv`. Failed points are recorded, not fatal.
pub fn execute_sweep(spec: &SweepSpec, out: &Path) -> Result<Vec<SweepPoint>, SimError> {
    create_dir(out)?;
    let run_point = |i: usize| -> SweepPoint {
        let value = value_literal(&spec.values[i]);
        let dir = out.join(format!("{}_{i}", spec.axis.name()));
        let result = spec
            .point_config(i)
            .map_err(SimError::from)
            .and_then(|cfg| execute(cfg, &dir))
            .map(|r| r.summary)
            .map_err(|e| e.to_string());
        SweepPoint { value, result }
    };
    let points: Vec<SweepPoint> = with_threads(spec.threads, || {
        (0..spec.values.len())
            .into_par_iter()
            .map(run_point)
            .collect()
    });
    write(&out.join("sweep.csv"), sweep_csv(spec.axis, &points))?;
    Ok(points)
}
