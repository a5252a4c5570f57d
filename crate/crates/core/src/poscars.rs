//! Per-slot admission, service chaining and resource allocation decisions
//! minimizing the drift-plus-penalty bound.

use serde::{Deserialize, Serialize};

use crate::error::ConstraintError;
use crate::model::{ResourceVector, ServerId, SystemModel, VnfSpec};
use crate::queues::{validate_decisions, Admission, DecisionSet, Route, Snapshot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    /// Weight of cost against queue backlog.
    #[serde(rename = "V")]
    pub v: f64,
    /// Weight of instance queues against prediction queues.
    pub alpha: f64,
    /// Weight of energy cost against communication cost.
    pub gamma: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            v: 10.0,
            alpha: 10.0,
            gamma: 1.0,
        }
    }
}

/// Splits `total` over `n` targets as evenly as possible; the remainder goes
/// to the first targets.
pub fn even_split(total: u64, n: usize) -> Vec<u64> {
    let n64 = n as u64;
    (0..n64)
        .map(|i| total / n64 + u64::from(i < total % n64))
        .collect()
}

/// Fills `total` from `slots[0]` upward.
pub fn earliest_first(total: u64, slots: &[u32]) -> Vec<u64> {
    let mut left = total;
    slots
        .iter()
        .map(|&c| {
            let take = left.min(u64::from(c));
            left -= take;
            take
        })
        .collect()
}

pub fn decide_admission(
    model: &SystemModel,
    snap: &Snapshot,
    params: &ControlParams,
) -> Vec<Admission> {
    model
        .catalog
        .services
        .iter()
        .map(|svc| {
            let k = svc.id.0;
            let ingress = model.instances_of(svc.ingress());
            let min_q = ingress.iter().map(|&i| snap.backlog[i]).min().unwrap_or(0);
            let least: Vec<ServerId> = ingress
                .iter()
                .filter(|&&i| snap.backlog[i] == min_q)
                .map(|&i| model.instances()[i].server)
                .collect();
            let q_p = snap.q_p(k);
            let total = if params.alpha * min_q as f64 > q_p as f64 {
                snap.q0(k)
            } else {
                q_p
            };
            let targets = least
                .iter()
                .copied()
                .zip(even_split(total, least.len()))
                .filter(|&(_, n)| n > 0)
                .collect();
            Admission {
                service: svc.id,
                per_slot: earliest_first(total, &snap.window[k]),
                targets,
            }
        })
        .collect()
}

/// `(V·w + α·Q)·carry` of sending a carry over one link.
pub fn chaining_score(v: f64, w: f64, alpha: f64, succ_queue: u64, carry: u64) -> f64 {
    if carry == 0 {
        return 0.0;
    }
    (v * w + alpha * succ_queue as f64) * carry as f64
}

/// A reachable successor instance seen from one sender.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub server: ServerId,
    pub w: f64,
    pub queue: u64,
    /// Per-request price `V·w + α·Q`.
    pub price: f64,
    pub phi_max: u32,
}

/// Reachable successors of instance `i` in ascending server order.
pub fn successor_candidates(
    model: &SystemModel,
    snap: &Snapshot,
    i: usize,
    params: &ControlParams,
) -> Vec<Candidate> {
    let key = model.instances()[i];
    let Some(next) = model.next_vnf(key.vnf) else {
        return Vec::new();
    };
    let phi_max = model.vnf(next).phi_max;
    model
        .instances_of(next)
        .iter()
        .filter_map(|&j| {
            let s = model.instances()[j].server;
            let w = model.comm.get(key.server.0, s.0);
            w.is_finite().then(|| Candidate {
                server: s,
                w,
                queue: snap.backlog[j],
                price: params.v * w + params.alpha * snap.backlog[j] as f64,
                phi_max,
            })
        })
        .collect()
}

/// Lowest-price candidate; ties go to the lowest server id.
pub fn argmin_price<'a>(cands: impl IntoIterator<Item = &'a Candidate>) -> Option<&'a Candidate> {
    cands
        .into_iter()
        .fold(None, |best: Option<&Candidate>, c| match best {
            Some(b) if (b.price, b.server) <= (c.price, c.server) => Some(b),
            _ => Some(c),
        })
}

/// One successor per non-terminal instance: the minimum-price reachable one.
pub fn decide_chaining(
    model: &SystemModel,
    snap: &Snapshot,
    params: &ControlParams,
) -> Result<Vec<Option<Route>>, ConstraintError> {
    (0..model.instances().len())
        .map(|i| {
            if model.next_vnf(model.instances()[i].vnf).is_none() {
                return Ok(None);
            }
            let cands = successor_candidates(model, snap, i, params);
            argmin_price(&cands)
                .map(|c| Some(Route::Single(c.server)))
                .ok_or(ConstraintError::NoReachableSuccessor { instance: i })
        })
        .collect()
}

/// `V·γ·(λ·Y) − α·Q·φ(Y)`.
pub fn net_cost(
    v: f64,
    gamma: f64,
    unit_cost: &ResourceVector,
    alpha: f64,
    queue: u64,
    vnf: &VnfSpec,
    option: &ResourceVector,
) -> f64 {
    v * gamma * unit_cost.dot(option) as f64 - alpha * queue as f64 * f64::from(vnf.rate(option))
}

/// Greedy per-server allocation: repeatedly take the lowest net-cost
/// `(instance, option)` entry and grant it if negative and it still fits.
/// Ties order by VNF id, then lexicographically smallest option.
pub fn decide_allocation(
    model: &SystemModel,
    snap: &Snapshot,
    params: &ControlParams,
) -> Vec<ResourceVector> {
    let types = model.resource_types();
    let mut alloc = vec![ResourceVector::zeros(types); model.instances().len()];
    for server in &model.servers {
        let on = model.instances_on(server.id);
        let mut table: Vec<(f64, usize, &ResourceVector)> = Vec::new();
        for &i in on {
            let vnf = model.vnf(model.instances()[i].vnf);
            for opt in &vnf.options {
                let r = net_cost(
                    params.v,
                    params.gamma,
                    &server.unit_cost,
                    params.alpha,
                    snap.backlog[i],
                    vnf,
                    opt,
                );
                table.push((r, i, opt));
            }
        }
        table.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then_with(|| model.instances()[a.1].vnf.cmp(&model.instances()[b.1].vnf))
                .then_with(|| a.2.cmp(b.2))
        });
        let mut used = ResourceVector::zeros(types);
        let mut granted = vec![false; model.instances().len()];
        for (r, i, opt) in table {
            if r >= 0.0 {
                break;
            }
            if granted[i] {
                continue;
            }
            let next = used.add(opt);
            if next.fits_within(&server.capacity) {
                used = next;
                alloc[i] = opt.clone();
                granted[i] = true;
            }
        }
    }
    alloc
}

/// Full POSCARS decision set for one snapshot.
pub fn decide(
    model: &SystemModel,
    snap: &Snapshot,
    params: &ControlParams,
) -> Result<DecisionSet, ConstraintError> {
    Ok(DecisionSet {
        admission: decide_admission(model, snap, params),
        chain: decide_chaining(model, snap, params)?,
        alloc: decide_allocation(model, snap, params),
    })
}

/// Admission, chaining and allocation terms of the per-slot objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObjectiveTerms {
    pub admission: f64,
    pub chaining: f64,
    pub allocation: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.admission + self.chaining + self.allocation
    }
}

/// Chaining term contributed by instance `i` under `route`.
pub fn chaining_term(
    model: &SystemModel,
    snap: &Snapshot,
    params: &ControlParams,
    i: usize,
    route: &Route,
) -> f64 {
    let key = model.instances()[i];
    let next = model.next_vnf(key.vnf).expect("non-terminal");
    let score = |s: ServerId, n: u64| {
        let j = model.instance_index(next, s).expect("successor instance");
        chaining_score(
            params.v,
            model.comm.get(key.server.0, s.0),
            params.alpha,
            snap.backlog[j],
            n,
        )
    };
    match route {
        Route::Single(s) => score(*s, snap.carry[i]),
        Route::Batches(b) => b.iter().map(|&(s, n)| score(s, n)).sum(),
    }
}

/// Per-slot objective `J_t` of a feasible decision set.
pub fn slot_objective(
    model: &SystemModel,
    snap: &Snapshot,
    d: &DecisionSet,
    params: &ControlParams,
) -> Result<ObjectiveTerms, ConstraintError> {
    validate_decisions(model, snap, d)?;
    let mut t = ObjectiveTerms::default();
    for a in &d.admission {
        let k = a.service.0;
        let ingress = model.catalog.services[k].ingress();
        for &(s, mu) in &a.targets {
            let i = model.instance_index(ingress, s).expect("validated");
            t.admission +=
                (-(snap.q_p(k) as f64) + params.alpha * snap.backlog[i] as f64) * mu as f64;
        }
    }
    for (i, route) in d.chain.iter().enumerate() {
        if let Some(route) = route {
            t.chaining += chaining_term(model, snap, params, i, route);
        }
    }
    for (i, y) in d.alloc.iter().enumerate() {
        let key = model.instances()[i];
        let server = &model.servers[key.server.0];
        t.allocation += net_cost(
            params.v,
            params.gamma,
            &server.unit_cost,
            params.alpha,
            snap.backlog[i],
            model.vnf(key.vnf),
            y,
        );
    }
    Ok(t)
}

/// Exhaustive minimum of the allocation term on one server. Reference for
/// small instances only: the search space is the product of option sets.
pub fn optimal_allocation_bruteforce(
    model: &SystemModel,
    snap: &Snapshot,
    server: ServerId,
    params: &ControlParams,
) -> (Vec<(usize, ResourceVector)>, f64) {
    let srv = &model.servers[server.0];
    let on = model.instances_on(server);
    let mut best = (Vec::new(), f64::INFINITY);
    let mut choice = vec![0usize; on.len()];
    loop {
        let picks: Vec<(usize, ResourceVector)> = on
            .iter()
            .zip(&choice)
            .map(|(&i, &c)| (i, model.vnf(model.instances()[i].vnf).options[c].clone()))
            .collect();
        let used = picks
            .iter()
            .fold(ResourceVector::zeros(srv.capacity.len()), |u, (_, y)| {
                u.add(y)
            });
        if used.fits_within(&srv.capacity) {
            let cost: f64 = picks
                .iter()
                .map(|(i, y)| {
                    net_cost(
                        params.v,
                        params.gamma,
                        &srv.unit_cost,
                        params.alpha,
                        snap.backlog[*i],
                        model.vnf(model.instances()[*i].vnf),
                        y,
                    )
                })
                .sum();
            if cost < best.1 {
                best = (picks, cost);
            }
        }
        // Odometer increment over option indices.
        let mut pos = 0;
        loop {
            if pos == on.len() {
                return best;
            }
            choice[pos] += 1;
            if choice[pos] < model.vnf(model.instances()[on[pos]].vnf).options.len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}
