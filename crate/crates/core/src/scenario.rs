//! Builds the system model and arrival workload a config describes.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Config, ExplicitModel, TopologyKind, WorkloadKind};
use crate::error::{ConfigError, ModelError, TopologyError};
use crate::model::{
    single_resource_options, Catalog, Placement, ResourceVector, Server, ServerId, ServiceChain,
    ServiceId, SystemModel, VnfId, VnfSpec,
};
use crate::topology::{
    build_fat_tree, build_jellyfish, comm_cost_matrix, hop_matrix, CommCostMatrix, SwitchGraph,
};
use crate::workload::{assign_window_sizes, generate_poisson, load_trace, ArrivalTrace};

/// A built model plus the substrate graph it came from (absent for
/// explicit models).
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: SystemModel,
    pub graph: Option<SwitchGraph>,
}

fn scenario_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn build_scenario(cfg: &Config) -> Result<Scenario, ConfigError> {
    if let Some(m) = &cfg.model {
        return Ok(Scenario {
            model: explicit_model(m, cfg)?,
            graph: None,
        });
    }
    let t = &cfg.topology;
    let sc = &cfg.scenario;
    let graph = match t.kind {
        TopologyKind::FatTree => build_fat_tree(t.k, t.nfv_per_pod, sc.seed)?,
        TopologyKind::Jellyfish => build_jellyfish(
            t.jellyfish_switches,
            t.jellyfish_degree,
            t.jellyfish_servers_per_switch,
            t.jellyfish_nfv,
            sc.seed,
        )?,
    };
    let hops = hop_matrix(&graph);
    if hops.unreachable_pairs() > 0 {
        return Err(TopologyError::Disconnected(hops.unreachable_pairs()).into());
    }
    let n = hops.len();
    if n == 0 {
        return Err(ConfigError::Invalid("topology has no NFV servers".into()));
    }
    let comm = comm_cost_matrix(&hops, t.base_cost, t.variation, sc.seed ^ 0x5eed);

    let mut rng = scenario_rng(sc.seed, 1);
    let servers: Vec<Server> = (0..n)
        .map(|s| Server {
            id: ServerId(s),
            capacity: ResourceVector::scalar(rng.random_range(sc.cores[0]..=sc.cores[1])),
            unit_cost: ResourceVector::scalar(rng.random_range(sc.unit_cost[0]..=sc.unit_cost[1])),
        })
        .collect();
    let max_cores = servers.iter().map(|s| s.capacity.0[0]).max().unwrap_or(0);
    let y_max = sc.y_max.min(max_cores);
    let phi_max = sc.phi_max.unwrap_or(sc.theta * y_max).max(1);

    let windows = window_sizes(cfg);
    let mut services = Vec::new();
    let mut vnfs = Vec::new();
    let mut placement = Placement::default();
    // Core demand already placed per server, for balancing.
    let mut load = vec![0usize; n];
    for k in 0..sc.services {
        let len = rng.random_range(sc.chain_len[0]..=sc.chain_len[1]);
        let mut chain = Vec::with_capacity(len);
        for pos in 1..=len {
            let id = VnfId(vnfs.len());
            vnfs.push(VnfSpec {
                id,
                service: ServiceId(k),
                position: pos,
                theta: ResourceVector::scalar(sc.theta),
                phi_max,
                options: single_resource_options(y_max),
            });
            chain.push(id);
            let count = rng.random_range(sc.instances[0]..=sc.instances[1]).min(n);
            let mut order: Vec<usize> = (0..n)
                .filter(|&s| servers[s].capacity.0[0] >= y_max)
                .collect();
            if order.is_empty() {
                order = (0..n).collect();
            }
            order.shuffle(&mut rng);
            // Stable sort after shuffling: least loaded per core first, random ties.
            order.sort_by(|&a, &b| {
                let la = load[a] as f64 / f64::from(servers[a].capacity.0[0]);
                let lb = load[b] as f64 / f64::from(servers[b].capacity.0[0]);
                la.total_cmp(&lb)
            });
            for &s in order.iter().take(count) {
                placement.insert(id, ServerId(s));
                load[s] += 1;
            }
        }
        services.push(ServiceChain {
            id: ServiceId(k),
            vnfs: chain,
            window_size: windows[k],
        });
    }
    let model = SystemModel::new(servers, Catalog { services, vnfs }, placement, comm)?;
    Ok(Scenario {
        model,
        graph: Some(graph),
    })
}

/// Per-service window sizes. Learned forecasters only look one slot ahead.
pub fn window_sizes(cfg: &Config) -> Vec<u32> {
    let k = cfg
        .model
        .as_ref()
        .map_or(cfg.scenario.services, |m| m.services.len());
    if cfg.prediction.spec().is_learned() {
        return vec![1; k];
    }
    assign_window_sizes(cfg.prediction.d_avg, k, cfg.scenario.seed ^ 0xd0d0)
}

fn explicit_model(m: &ExplicitModel, cfg: &Config) -> Result<SystemModel, ConfigError> {
    let servers = m
        .servers
        .iter()
        .enumerate()
        .map(|(s, x)| Server {
            id: ServerId(s),
            capacity: ResourceVector(x.capacity.clone()),
            unit_cost: ResourceVector(x.unit_cost.clone()),
        })
        .collect::<Vec<_>>();
    let learned = cfg.prediction.spec().is_learned();
    let mut services = Vec::new();
    let mut vnfs = Vec::new();
    let mut pairs = Vec::new();
    for (k, svc) in m.services.iter().enumerate() {
        let mut chain = Vec::new();
        for (j, v) in svc.vnfs.iter().enumerate() {
            let id = VnfId(vnfs.len());
            vnfs.push(VnfSpec {
                id,
                service: ServiceId(k),
                position: j + 1,
                theta: ResourceVector(v.theta.clone()),
                phi_max: v.phi_max,
                options: v.options.iter().cloned().map(ResourceVector).collect(),
            });
            for &s in &v.hosts {
                pairs.push((id, ServerId(s)));
            }
            chain.push(id);
        }
        services.push(ServiceChain {
            id: ServiceId(k),
            vnfs: chain,
            window_size: if learned { 1 } else { svc.window },
        });
    }
    let mut seen = BTreeSet::new();
    for &(f, s) in &pairs {
        if !seen.insert((f, s)) {
            return Err(ConfigError::Invalid(format!(
                "duplicate instance of {f} on {s}"
            )));
        }
        if s.0 >= servers.len() {
            return Err(ConfigError::Invalid(format!(
                "{f} hosted on unknown server {s}"
            )));
        }
    }
    let comm = CommCostMatrix::from_costs(m.comm_cost.clone());
    SystemModel::new(
        servers,
        Catalog { services, vnfs },
        Placement::from_pairs(pairs),
        comm,
    )
    .map_err(ModelError::into)
}

/// Mean core demand of one request per unit of per-service arrival rate,
/// summed over all services.
fn cores_per_unit_rate(model: &SystemModel) -> f64 {
    model
        .catalog
        .vnfs
        .iter()
        .map(|v| {
            let theta = v.theta.0.iter().copied().max().unwrap_or(0);
            if theta == 0 {
                0.0
            } else {
                1.0 / f64::from(theta)
            }
        })
        .sum()
}

/// Total cores over all servers (first resource type).
pub fn total_cores(model: &SystemModel) -> f64 {
    model
        .servers
        .iter()
        .map(|s| f64::from(s.capacity.0.first().copied().unwrap_or(0)))
        .sum()
}

/// Per-service arrival rate the config asks for.
pub fn arrival_rate(cfg: &Config, model: &SystemModel) -> f64 {
    match cfg.workload.target_utilization {
        Some(u) => {
            let per = cores_per_unit_rate(model);
            if per > 0.0 {
                u * total_cores(model) / per
            } else {
                0.0
            }
        }
        None => cfg.workload.rate,
    }
}

/// Mean core demand relative to total cores at rate `rate`.
pub fn utilization(model: &SystemModel, rate: f64) -> f64 {
    rate * cores_per_unit_rate(model) / total_cores(model)
}

/// Arrivals for one replication, long enough to fill every window through
/// the last slot.
pub fn build_workload(
    cfg: &Config,
    model: &SystemModel,
    seed: u64,
) -> Result<ArrivalTrace, ConfigError> {
    let horizon = cfg.simulation.horizon as usize + model.catalog.max_window() as usize + 2;
    let k = model.service_count();
    let mut trace = match cfg.workload.kind {
        WorkloadKind::Poisson => {
            let rate = arrival_rate(cfg, model);
            generate_poisson(&vec![rate; k], horizon, cfg.workload.a_max, seed)
        }
        WorkloadKind::Trace => {
            let path = cfg
                .workload
                .trace
                .as_ref()
                .ok_or_else(|| ConfigError::Invalid("workload.trace missing".into()))?;
            let series = load_trace(
                path,
                cfg.workload.trace_format,
                cfg.simulation.slot_length_ms,
            )?;
            let series: Vec<u32> = series
                .into_iter()
                .map(|c| c.min(cfg.workload.a_max))
                .collect();
            ArrivalTrace::from_series_rotated(&series, k, horizon, cfg.simulation.slot_length_ms)
        }
    };
    trace.slot_length_ms = cfg.simulation.slot_length_ms;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid_and_desk_scale() {
        let cfg = Config::default();
        let sc = build_scenario(&cfg).unwrap();
        let m = &sc.model;
        assert_eq!(m.servers.len(), 8);
        assert_eq!(m.service_count(), 5);
        for svc in &m.catalog.services {
            assert!((3..=5).contains(&svc.vnfs.len()));
            for &f in &svc.vnfs {
                assert!((2..=4).contains(&m.placement.instance_count(f)));
            }
        }
        let u = utilization(m, arrival_rate(&cfg, m));
        assert!(u > 0.3 && u < 1.0, "utilization {u}");
    }

    #[test]
    fn scenario_is_deterministic() {
        let cfg = Config::default();
        let a = build_scenario(&cfg).unwrap().model;
        let b = build_scenario(&cfg).unwrap().model;
        assert_eq!(a.placement, b.placement);
        assert_eq!(a.servers, b.servers);
        assert_eq!(a.comm, b.comm);
    }

    #[test]
    fn target_utilization_sets_rate() {
        let cfg = Config::default()
            .apply_overrides(&["target_utilization=0.5"])
            .unwrap();
        let m = build_scenario(&cfg).unwrap().model;
        let u = utilization(&m, arrival_rate(&cfg, &m));
        assert!((u - 0.5).abs() < 1e-12);
    }

    #[test]
    fn learned_forecasters_look_one_slot_ahead() {
        let cfg = Config::default()
            .apply_overrides(&["forecaster=ewma", "d_avg=7"])
            .unwrap();
        assert_eq!(window_sizes(&cfg), vec![1; 5]);
    }

    #[test]
    fn explicit_model_parses() {
        let text = r#"
            [model]
            comm_cost = [[0.0, 1.0], [1.0, 0.0]]
            [[model.servers]]
            capacity = [2]
            unit_cost = [1]
            [[model.servers]]
            capacity = [2]
            unit_cost = [1]
            [[model.services]]
            window = 1
            vnfs = [
              { theta = [1], phi_max = 2, options = [[0], [1], [2]], hosts = [0] },
              { theta = [1], phi_max = 2, options = [[0], [1], [2]], hosts = [0, 1] },
            ]
        "#;
        let cfg = Config::parse(text).unwrap();
        let m = build_scenario(&cfg).unwrap().model;
        assert_eq!(m.instances().len(), 3);
        assert_eq!(m.catalog.services[0].window_size, 1);
    }
}
