//! Random small models and snapshots shared by the integration tests.
#![allow(dead_code)]

use nfv_sched::model::{
    cross_product_options, single_resource_options, Catalog, Placement, ResourceVector, Server,
    ServerId, ServiceChain, ServiceId, SystemModel, VnfId, VnfSpec,
};
use nfv_sched::poscars::ControlParams;
use nfv_sched::queues::Snapshot;
use nfv_sched::topology::CommCostMatrix;
use rand::seq::IndexedRandom;
use rand::Rng;

/// Multi-server model with integer communication costs (so objective sums
/// are exact in f64 and ties actually occur).
pub fn random_chain_model<R: Rng>(
    rng: &mut R,
    max_servers: usize,
    max_services: usize,
) -> SystemModel {
    let n = rng.random_range(1..=max_servers);
    let servers: Vec<Server> = (0..n)
        .map(|s| Server {
            id: ServerId(s),
            capacity: ResourceVector::scalar(rng.random_range(2..=6)),
            unit_cost: ResourceVector::scalar(rng.random_range(1..=3)),
        })
        .collect();
    let mut comm = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let w = f64::from(rng.random_range(1..=4u32));
            comm[a][b] = w;
            comm[b][a] = w;
        }
    }
    let mut services = Vec::new();
    let mut vnfs = Vec::new();
    let mut pairs = Vec::new();
    for k in 0..rng.random_range(1..=max_services) {
        let mut chain = Vec::new();
        for pos in 1..=rng.random_range(2..=3) {
            let id = VnfId(vnfs.len());
            vnfs.push(VnfSpec {
                id,
                service: ServiceId(k),
                position: pos,
                theta: ResourceVector::scalar(rng.random_range(1..=3)),
                phi_max: rng.random_range(2..=8),
                options: single_resource_options(2),
            });
            let mut hosts: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
            if hosts.is_empty() {
                hosts.push(rng.random_range(0..n));
            }
            pairs.extend(hosts.into_iter().map(|s| (id, ServerId(s))));
            chain.push(id);
        }
        services.push(ServiceChain {
            id: ServiceId(k),
            vnfs: chain,
            window_size: rng.random_range(0..=2),
        });
    }
    SystemModel::new(
        servers,
        Catalog { services, vnfs },
        Placement::from_pairs(pairs),
        CommCostMatrix::from_costs(comm),
    )
    .expect("random model is valid")
}

/// Every service on one server, each VNF with its own multi-resource
/// option set.
pub fn random_single_server_model<R: Rng>(rng: &mut R) -> SystemModel {
    let capacity = ResourceVector(vec![rng.random_range(2..=8), rng.random_range(1..=4)]);
    let server = Server {
        id: ServerId(0),
        capacity: capacity.clone(),
        unit_cost: ResourceVector(vec![rng.random_range(1..=3), rng.random_range(1..=5)]),
    };
    let mut services = Vec::new();
    let mut vnfs = Vec::new();
    let mut pairs = Vec::new();
    for k in 0..rng.random_range(1..=3) {
        let mut chain = Vec::new();
        for pos in 1..=2 {
            let id = VnfId(vnfs.len());
            let per_type = ResourceVector(vec![rng.random_range(1..=4), rng.random_range(0..=2)]);
            vnfs.push(VnfSpec {
                id,
                service: ServiceId(k),
                position: pos,
                theta: ResourceVector(vec![rng.random_range(1..=4), rng.random_range(0..=3)]),
                phi_max: rng.random_range(1..=12),
                options: cross_product_options(&per_type, &capacity),
            });
            pairs.push((id, ServerId(0)));
            chain.push(id);
        }
        services.push(ServiceChain {
            id: ServiceId(k),
            vnfs: chain,
            window_size: 0,
        });
    }
    SystemModel::new(
        vec![server],
        Catalog { services, vnfs },
        Placement::from_pairs(pairs),
        CommCostMatrix::from_costs(vec![vec![0.0]]),
    )
    .expect("single-server model is valid")
}

pub fn random_snapshot<R: Rng>(rng: &mut R, model: &SystemModel) -> Snapshot {
    let n = model.instances().len();
    Snapshot {
        slot: 0,
        window: model
            .catalog
            .services
            .iter()
            .map(|s| {
                (0..=s.window_size)
                    .map(|_| rng.random_range(0..=5))
                    .collect()
            })
            .collect(),
        backlog: (0..n).map(|_| rng.random_range(0..=20)).collect(),
        carry: (0..n).map(|_| rng.random_range(0..=10)).collect(),
    }
}

pub fn random_params<R: Rng>(rng: &mut R) -> ControlParams {
    ControlParams {
        v: *[0.0, 1.0, 10.0, 100.0].choose(rng).unwrap(),
        alpha: *[0.5, 1.0, 10.0].choose(rng).unwrap(),
        gamma: *[0.5, 1.0, 2.0].choose(rng).unwrap(),
    }
}
