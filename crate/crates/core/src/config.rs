//! TOML experiment configuration with defaults and `--set` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::forecast::ForecasterSpec;
use crate::poscars::ControlParams;
use crate::queues::CostMode;
use crate::variants::ChainingStrategy;
use crate::workload::{TraceFormat, DEFAULT_A_MAX, DEFAULT_SLOT_MS};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub simulation: SimulationSection,
    pub scheduler: SchedulerSection,
    pub prediction: PredictionSection,
    pub topology: TopologySection,
    pub scenario: ScenarioSection,
    pub workload: WorkloadSection,
    /// Explicit model; replaces the generated topology and scenario.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ExplicitModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: u64,
    pub seed: u64,
    pub replications: usize,
    /// Leading slots excluded from averages.
    pub warmup: u64,
    pub slot_length_ms: f64,
    pub cost_mode: CostMode,
    /// Verify queueing identities every slot (slow).
    pub check_invariants: bool,
    /// Write per-slot queue rows to `queues.csv`.
    pub dump_queues: bool,
    /// Write `topology.edges` and `comm_cost.csv`.
    pub export_topology: bool,
    /// Worker threads for replications; 0 = all cores.
    pub threads: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: 2_000,
            seed: 1,
            replications: 1,
            warmup: 0,
            slot_length_ms: DEFAULT_SLOT_MS,
            cost_mode: CostMode::Actual,
            check_invariants: false,
            dump_queues: false,
            export_topology: false,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    #[default]
    Poscars,
    PPod,
    PBs,
    PBf,
    Random,
    Jsq,
    Onehop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulerSection {
    pub kind: SchedulerKind,
    #[serde(rename = "V")]
    pub v: f64,
    pub alpha: f64,
    pub gamma: f64,
    /// `d` of P-Pod, `d_bs`/`d_bf` of the batch variants.
    pub probe_ratio: usize,
    pub batch: u64,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        Self {
            kind: SchedulerKind::Poscars,
            v: 10.0,
            alpha: 10.0,
            gamma: 1.0,
            probe_ratio: 2,
            batch: 5,
        }
    }
}

impl SchedulerSection {
    pub fn params(&self) -> ControlParams {
        ControlParams {
            v: self.v,
            alpha: self.alpha,
            gamma: self.gamma,
        }
    }

    pub fn strategy(&self) -> ChainingStrategy {
        let (d, batch) = (self.probe_ratio, self.batch);
        match self.kind {
            SchedulerKind::Poscars => ChainingStrategy::Poscars,
            SchedulerKind::PPod => ChainingStrategy::PPod { d },
            SchedulerKind::PBs => ChainingStrategy::PBs { d, batch },
            SchedulerKind::PBf => ChainingStrategy::PBf { d, batch },
            SchedulerKind::Random => ChainingStrategy::Random,
            SchedulerKind::Jsq => ChainingStrategy::Jsq,
            SchedulerKind::Onehop => ChainingStrategy::OneHop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecasterKind {
    #[default]
    Perfect,
    AllFalseNegative,
    FalsePositive,
    MovingAverage,
    Ewma,
    Kalman,
    DistributionEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionSection {
    pub forecaster: ForecasterKind,
    /// Mean window size; each service draws its own from `0..=2·d_avg`.
    pub d_avg: u32,
    pub false_positive_rate: f64,
    pub ma_window: usize,
    pub ewma_weight: f64,
    pub kalman_process_var: f64,
    pub kalman_obs_var: f64,
    pub history_len: usize,
}

impl Default for PredictionSection {
    fn default() -> Self {
        Self {
            forecaster: ForecasterKind::Perfect,
            d_avg: 0,
            false_positive_rate: 5.0,
            ma_window: 5,
            ewma_weight: 0.5,
            kalman_process_var: 1.0,
            kalman_obs_var: 10.0,
            history_len: 50,
        }
    }
}

impl PredictionSection {
    pub fn spec(&self) -> ForecasterSpec {
        match self.forecaster {
            ForecasterKind::Perfect => ForecasterSpec::Perfect,
            ForecasterKind::AllFalseNegative => ForecasterSpec::AllFalseNegative,
            ForecasterKind::FalsePositive => ForecasterSpec::FalsePositive {
                rate: self.false_positive_rate,
            },
            ForecasterKind::MovingAverage => ForecasterSpec::MovingAverage {
                window: self.ma_window,
            },
            ForecasterKind::Ewma => ForecasterSpec::Ewma {
                weight: self.ewma_weight,
            },
            ForecasterKind::Kalman => ForecasterSpec::Kalman {
                process_var: self.kalman_process_var,
                obs_var: self.kalman_obs_var,
            },
            ForecasterKind::DistributionEstimator => ForecasterSpec::DistributionEstimator {
                history_len: self.history_len,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    #[default]
    FatTree,
    Jellyfish,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySection {
    pub kind: TopologyKind,
    pub k: usize,
    pub nfv_per_pod: usize,
    pub jellyfish_switches: usize,
    pub jellyfish_degree: usize,
    pub jellyfish_servers_per_switch: usize,
    pub jellyfish_nfv: usize,
    /// Cost per hop.
    pub base_cost: f64,
    /// Relative spread of per-pair costs.
    pub variation: f64,
    /// Redraw costs every slot instead of once per run.
    pub jitter: bool,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self {
            kind: TopologyKind::FatTree,
            k: 4,
            nfv_per_pod: 2,
            jellyfish_switches: 20,
            jellyfish_degree: 4,
            jellyfish_servers_per_switch: 2,
            jellyfish_nfv: 8,
            base_cost: 1.0,
            variation: 0.1,
            jitter: false,
        }
    }
}

/// Random scenario generation ranges (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// Seed of topology, servers, chains, placement and window sizes; fixed
    /// across replications.
    pub seed: u64,
    pub services: usize,
    pub chain_len: [usize; 2],
    pub instances: [usize; 2],
    pub cores: [u32; 2],
    pub unit_cost: [u32; 2],
    /// Requests per core per slot.
    pub theta: u32,
    /// Largest single-instance allocation in cores.
    pub y_max: u32,
    /// Defaults to `theta · y_max`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_max: Option<u32>,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            seed: 7,
            services: 5,
            chain_len: [3, 5],
            instances: [2, 4],
            cores: [16, 32],
            unit_cost: [1, 3],
            theta: 1,
            y_max: 16,
            phi_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkloadKind {
    #[default]
    Poisson,
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    pub kind: WorkloadKind,
    /// Mean arrivals per slot and service.
    pub rate: f64,
    /// If set, overrides `rate` so that mean core demand is this fraction of
    /// total cores.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_utilization: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    pub trace_format: TraceFormat,
    pub a_max: u32,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            kind: WorkloadKind::Poisson,
            rate: 7.0,
            target_utilization: None,
            trace: None,
            trace_format: TraceFormat::Counts,
            a_max: DEFAULT_A_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitServer {
    pub capacity: Vec<u32>,
    pub unit_cost: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitVnf {
    pub theta: Vec<u32>,
    pub phi_max: u32,
    pub options: Vec<Vec<u32>>,
    /// Server indices hosting an instance.
    pub hosts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitService {
    #[serde(default)]
    pub window: u32,
    pub vnfs: Vec<ExplicitVnf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitModel {
    pub servers: Vec<ExplicitServer>,
    pub services: Vec<ExplicitService>,
    /// Per-request cost matrix; `inf` marks unreachable pairs.
    pub comm_cost: Vec<Vec<f64>>,
}

impl Config {
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
        let mut cfg = Self::parse(&text)?;
        // Trace paths are relative to the config file.
        if let (Some(t), Some(dir)) = (&cfg.workload.trace, path.parent()) {
            if t.is_relative() {
                cfg.workload.trace = Some(dir.join(t));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `key=value` overrides. Keys are `section.field` or a bare
    /// field name unique across sections; values are TOML literals, falling
    /// back to plain strings.
    pub fn apply_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut doc = toml::Value::try_from(self).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| ConfigError::Invalid(format!("override {o:?} is not key=value")))?;
            let (key, raw) = (key.trim(), raw.trim());
            let value = parse_value(raw);
            let path = resolve_key(&doc, key)?;
            set_path(&mut doc, &path, value)?;
        }
        doc.try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.simulation;
        if s.horizon == 0 {
            return bad("simulation.horizon must be >= 1".into());
        }
        if s.replications == 0 {
            return bad("simulation.replications must be >= 1".into());
        }
        if s.slot_length_ms <= 0.0 {
            return bad("simulation.slot_length_ms must be positive".into());
        }
        let p = &self.scheduler;
        if !(p.v >= 0.0 && p.alpha >= 0.0 && p.gamma >= 0.0) {
            return bad("scheduler V, alpha and gamma must be non-negative".into());
        }
        if p.probe_ratio == 0 || p.batch == 0 {
            return bad("scheduler probe_ratio and batch must be >= 1".into());
        }
        let pr = &self.prediction;
        if pr.false_positive_rate < 0.0 || !pr.false_positive_rate.is_finite() {
            return bad("prediction.false_positive_rate must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&pr.ewma_weight) {
            return bad("prediction.ewma_weight must be in [0, 1]".into());
        }
        if pr.kalman_process_var < 0.0 || pr.kalman_obs_var < 0.0 {
            return bad("prediction kalman variances must be >= 0".into());
        }
        let t = &self.topology;
        if !(0.0..1.0).contains(&t.variation) {
            return bad("topology.variation must be in [0, 1)".into());
        }
        if t.base_cost < 0.0 {
            return bad("topology.base_cost must be >= 0".into());
        }
        let sc = &self.scenario;
        let range_ok = |r: [usize; 2]| r[0] <= r[1];
        if sc.services == 0 || !range_ok(sc.chain_len) || sc.chain_len[0] < 2 {
            return bad(
                "scenario: services >= 1 and 2 <= chain_len[0] <= chain_len[1] required".into(),
            );
        }
        if !range_ok(sc.instances) || sc.instances[0] == 0 {
            return bad("scenario.instances must be a non-empty range starting at >= 1".into());
        }
        if sc.cores[0] > sc.cores[1] || sc.cores[1] == 0 || sc.unit_cost[0] > sc.unit_cost[1] {
            return bad(
                "scenario: cores and unit_cost ranges must be ordered and non-empty".into(),
            );
        }
        if sc.theta == 0 || sc.y_max == 0 || sc.phi_max == Some(0) {
            return bad("scenario: theta, y_max and phi_max must be >= 1".into());
        }
        let w = &self.workload;
        if w.rate < 0.0 || !w.rate.is_finite() || w.target_utilization.is_some_and(|u| u < 0.0) {
            return bad("workload rate/target_utilization must be >= 0".into());
        }
        if w.kind == WorkloadKind::Trace && w.trace.is_none() {
            return bad("workload.trace is required for kind = \"trace\"".into());
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

const SECTIONS: [&str; 6] = [
    "simulation",
    "scheduler",
    "prediction",
    "topology",
    "scenario",
    "workload",
];

fn resolve_key(doc: &toml::Value, key: &str) -> Result<Vec<String>, ConfigError> {
    if key.contains('.') {
        return Ok(key.split('.').map(str::to_string).collect());
    }
    let hits: Vec<&str> = SECTIONS
        .iter()
        .copied()
        .filter(|s| doc.get(s).and_then(|t| t.get(key)).is_some() || known_optional(s, key))
        .collect();
    match hits.as_slice() {
        [one] => Ok(vec![one.to_string(), key.to_string()]),
        [] => Err(ConfigError::Invalid(format!("unknown config key {key:?}"))),
        many => Err(ConfigError::Invalid(format!(
            "ambiguous key {key:?}: qualify it with one of {}",
            many.join(", ")
        ))),
    }
}

/// Optional fields that are absent from the serialized defaults.
fn known_optional(section: &str, key: &str) -> bool {
    matches!(
        (section, key),
        ("scenario", "phi_max") | ("workload", "target_utilization") | ("workload", "trace")
    )
}

fn set_path(doc: &mut toml::Value, path: &[String], value: toml::Value) -> Result<(), ConfigError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = doc;
    for p in parents {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| ConfigError::Invalid(format!("{p} is not a section")))?;
        cur = table
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| ConfigError::Invalid(format!("{} is not a section", path.join("."))))?;
    // Integers given for float fields stay valid: serde widens them.
    table.insert(last.clone(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        c.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn overrides_bare_and_dotted() {
        let c = Config::default()
            .apply_overrides(&[
                "V=100",
                "simulation.horizon=50",
                "scheduler.kind=p-bf",
                "forecaster=kalman",
            ])
            .unwrap();
        assert_eq!(c.scheduler.v, 100.0);
        assert_eq!(c.simulation.horizon, 50);
        assert_eq!(c.scheduler.kind, SchedulerKind::PBf);
        assert_eq!(c.prediction.forecaster, ForecasterKind::Kalman);
        let c = c.apply_overrides(&["target_utilization=0.5"]).unwrap();
        assert_eq!(c.workload.target_utilization, Some(0.5));
    }

    #[test]
    fn ambiguous_and_unknown_keys_fail() {
        assert!(Config::default().apply_overrides(&["kind=jsq"]).is_err());
        assert!(Config::default().apply_overrides(&["nope=1"]).is_err());
        assert!(Config::default().apply_overrides(&["horizon=abc"]).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(matches!(
            Config::parse("[simulation]\nhorizn = 3\n"),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn missing_file_is_not_found() {
        let e = Config::load(Path::new("/definitely/not/here.toml")).unwrap_err();
        assert!(e.to_string().starts_with("config not found"));
    }

    #[test]
    fn validation_catches_bad_values() {
        for o in [
            "horizon=0",
            "V=-1",
            "variation=1.0",
            "probe_ratio=0",
            "chain_len=[1,3]",
        ] {
            let c = Config::default().apply_overrides(&[o]).unwrap();
            assert!(c.validate().is_err(), "{o}");
        }
    }
}
