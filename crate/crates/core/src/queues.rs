//! Mutable queue state of one run and the application of one slot's
//! admission, forwarding and processing decisions.

use std::collections::VecDeque;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::ConstraintError;
use crate::model::{InstanceKey, ResourceVector, ServerId, ServiceId, SystemModel};
use crate::window::{PredictionWindow, Request};

/// FIFO backlog of one VNF instance plus the requests it processed last
/// slot that still await forwarding.
#[derive(Debug, Clone)]
pub struct InstanceQueue {
    pub key: InstanceKey,
    pub backlog: VecDeque<Request>,
    pub carry: Vec<Request>,
    /// Service rate allocated in the previous slot.
    pub nominal_rate: u32,
}

#[derive(Debug, Clone)]
pub struct QueueState {
    pub slot: u64,
    pub windows: Vec<PredictionWindow>,
    pub instances: Vec<InstanceQueue>,
    next_ticket: u64,
}

/// How the per-slot communication cost is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostMode {
    /// Requests actually forwarded.
    #[default]
    Actual,
    /// The previous slot's allocated service rate, whether or not it was used.
    Rate,
}

/// Read-only view the schedulers decide from.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub slot: u64,
    /// `Q^(d)_k` per service.
    pub window: Vec<Vec<u32>>,
    /// `Q^s_f` per instance.
    pub backlog: Vec<u64>,
    /// `B^s_f` per instance (requests actually awaiting forwarding).
    pub carry: Vec<u64>,
}

impl Snapshot {
    pub fn q_p(&self, k: usize) -> u64 {
        self.window[k].iter().map(|&c| u64::from(c)).sum()
    }

    pub fn q0(&self, k: usize) -> u64 {
        u64::from(self.window[k].first().copied().unwrap_or(0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub service: ServiceId,
    /// `δ^(d)`: requests taken from each window slot.
    pub per_slot: Vec<u64>,
    /// `μ^s`: admitted requests per ingress server.
    pub targets: Vec<(ServerId, u64)>,
}

impl Admission {
    pub fn total(&self) -> u64 {
        self.per_slot.iter().sum()
    }
}

/// Where an instance sends its carry this slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Route {
    /// Whole carry to one successor.
    Single(ServerId),
    /// Consecutive batches to the listed successors.
    Batches(Vec<(ServerId, u64)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSet {
    pub admission: Vec<Admission>,
    /// Per instance; `None` exactly for terminal VNFs.
    pub chain: Vec<Option<Route>>,
    /// Per instance.
    pub alloc: Vec<ResourceVector>,
}

/// Outcome of forwarding: cost and per-instance inflow.
#[derive(Debug, Clone, PartialEq)]
pub struct Forwarded {
    pub m: f64,
    pub inflow: Vec<u64>,
    /// Upper bound `Σ X·B` of inflow using last slot's nominal rates.
    pub nominal_inflow: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Processed {
    pub g: f64,
    pub processed: Vec<u64>,
    /// Requests that left the terminal VNF this slot.
    pub completed: Vec<Request>,
}

impl QueueState {
    pub fn new(model: &SystemModel, windows: Vec<PredictionWindow>) -> Self {
        let instances = model
            .instances()
            .iter()
            .map(|&key| InstanceQueue {
                key,
                backlog: VecDeque::new(),
                carry: Vec::new(),
                nominal_rate: 0,
            })
            .collect();
        Self {
            slot: 0,
            windows,
            instances,
            next_ticket: 0,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            slot: self.slot,
            window: self.windows.iter().map(PredictionWindow::counts).collect(),
            backlog: self
                .instances
                .iter()
                .map(|q| q.backlog.len() as u64)
                .collect(),
            carry: self
                .instances
                .iter()
                .map(|q| q.carry.len() as u64)
                .collect(),
        }
    }

    /// Appends `r` to instance `i`'s backlog with a fresh ticket.
    pub fn enqueue(&mut self, i: usize, mut r: Request) {
        self.next_ticket += 1;
        r.ticket = self.next_ticket;
        self.instances[i].backlog.push_back(r);
    }

    /// Real requests held in instance backlogs and carries.
    pub fn real_in_instances(&self) -> u64 {
        self.instances
            .iter()
            .flat_map(|q| q.backlog.iter().chain(q.carry.iter()))
            .filter(|r| !r.phantom)
            .count() as u64
    }

    /// Writes one `slot,queue,length,carry` row per instance.
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        for q in &self.instances {
            writeln!(
                w,
                "{},{}@{},{},{}",
                self.slot,
                q.key.vnf,
                q.key.server,
                q.backlog.len(),
                q.carry.len()
            )?;
        }
        Ok(())
    }
}

/// Checks one slot's decisions against the admission, chaining and
/// capacity constraints.
pub fn validate_decisions(
    model: &SystemModel,
    snap: &Snapshot,
    d: &DecisionSet,
) -> Result<(), ConstraintError> {
    for a in &d.admission {
        let k = a.service.0;
        let total = a.total();
        let (lower, upper) = (snap.q0(k), snap.q_p(k));
        if total < lower || total > upper {
            return Err(ConstraintError::AdmissionBounds {
                service: a.service,
                admitted: total,
                lower,
                upper,
            });
        }
        for (slot, (&asked, &held)) in a.per_slot.iter().zip(&snap.window[k]).enumerate() {
            if asked > u64::from(held) {
                return Err(ConstraintError::AdmissionExceedsSlot {
                    service: a.service,
                    slot,
                    asked,
                    held: u64::from(held),
                });
            }
        }
        if a.per_slot.len() > snap.window[k].len() {
            return Err(ConstraintError::AdmissionExceedsSlot {
                service: a.service,
                slot: snap.window[k].len(),
                asked: a.per_slot[snap.window[k].len()..].iter().sum(),
                held: 0,
            });
        }
        let split: u64 = a.targets.iter().map(|t| t.1).sum();
        if split != total {
            return Err(ConstraintError::AdmissionSplit {
                service: a.service,
                split,
                total,
            });
        }
        let ingress = model.catalog.services[k].ingress();
        if a.targets
            .iter()
            .any(|(s, _)| model.instance_index(ingress, *s).is_none())
        {
            return Err(ConstraintError::AdmissionTarget { service: a.service });
        }
    }
    let mut admitted = vec![false; model.service_count()];
    for a in &d.admission {
        admitted[a.service.0] = true;
    }
    if let Some(k) = admitted
        .iter()
        .enumerate()
        .position(|(k, &seen)| !seen && snap.q0(k) > 0)
    {
        return Err(ConstraintError::AdmissionBounds {
            service: ServiceId(k),
            admitted: 0,
            lower: snap.q0(k),
            upper: snap.q_p(k),
        });
    }

    for (i, key) in model.instances().iter().enumerate() {
        let next = model.next_vnf(key.vnf);
        let route = d.chain.get(i).and_then(Option::as_ref);
        let Some(next) = next else {
            if route.is_some() {
                return Err(ConstraintError::Chaining { instance: i });
            }
            continue;
        };
        let valid_target = |s: ServerId| {
            model.instance_index(next, s).is_some() && model.comm.reachable(key.server.0, s.0)
        };
        match route {
            None => return Err(ConstraintError::Chaining { instance: i }),
            Some(Route::Single(s)) => {
                if !valid_target(*s) {
                    return Err(ConstraintError::Chaining { instance: i });
                }
            }
            Some(Route::Batches(b)) => {
                if b.iter().any(|(s, _)| !valid_target(*s)) {
                    return Err(ConstraintError::Chaining { instance: i });
                }
                let routed: u64 = b.iter().map(|x| x.1).sum();
                if routed != snap.carry[i] {
                    return Err(ConstraintError::ForwardingMismatch {
                        instance: i,
                        routed,
                        carry: snap.carry[i],
                    });
                }
            }
        }
    }

    if d.alloc.len() != model.instances().len() {
        return Err(ConstraintError::Invariant {
            slot: snap.slot,
            what: format!(
                "{} allocations for {} instances",
                d.alloc.len(),
                model.instances().len()
            ),
        });
    }
    for (i, key) in model.instances().iter().enumerate() {
        if !model.vnf(key.vnf).options.contains(&d.alloc[i]) {
            return Err(ConstraintError::Option {
                instance: i,
                alloc: d.alloc[i].clone(),
            });
        }
    }
    for server in &model.servers {
        let mut used = ResourceVector::zeros(server.capacity.len());
        for &i in model.instances_on(server.id) {
            used = used.add(&d.alloc[i]);
        }
        if !used.fits_within(&server.capacity) {
            return Err(ConstraintError::Capacity {
                server: server.id.0,
            });
        }
    }
    Ok(())
}

/// Drains `δ^(d)` from each window slot, earliest slot first, and appends
/// the requests to the chosen ingress instances in target order.
pub fn apply_admission(model: &SystemModel, state: &mut QueueState, admission: &[Admission]) {
    for a in admission {
        let k = a.service.0;
        let mut taken = Vec::new();
        for (d, &n) in a.per_slot.iter().enumerate() {
            taken.extend(state.windows[k].take(d, n as usize));
        }
        let ingress = model.catalog.services[k].ingress();
        let mut it = taken.into_iter();
        for &(s, n) in &a.targets {
            let i = model.instance_index(ingress, s).expect("validated target");
            for r in it.by_ref().take(n as usize) {
                state.enqueue(i, r);
            }
        }
    }
}

/// Moves every carry to its designated successor(s).
pub fn apply_forwarding(
    model: &SystemModel,
    state: &mut QueueState,
    chain: &[Option<Route>],
    mode: CostMode,
) -> Forwarded {
    let n = state.instances.len();
    let mut inflow = vec![0u64; n];
    let mut nominal_inflow = vec![0u64; n];
    let mut m = 0.0;
    for i in 0..n {
        let Some(route) = &chain[i] else {
            continue;
        };
        let key = state.instances[i].key;
        let next = model.next_vnf(key.vnf).expect("non-terminal");
        let carry = std::mem::take(&mut state.instances[i].carry);
        let nominal = u64::from(state.instances[i].nominal_rate);
        let carried = carry.len() as u64;
        let mut reqs = carry.into_iter();
        let w = |s: ServerId| model.comm.get(key.server.0, s.0);
        match route {
            Route::Single(s) => {
                let j = model.instance_index(next, *s).expect("validated");
                for r in reqs.by_ref() {
                    state.enqueue(j, r);
                }
                inflow[j] += carried;
                nominal_inflow[j] += nominal;
                m += match mode {
                    CostMode::Actual => carried as f64 * w(*s),
                    CostMode::Rate => nominal as f64 * w(*s),
                };
            }
            Route::Batches(batches) => {
                for (b, &(s, cnt)) in batches.iter().enumerate() {
                    let j = model.instance_index(next, s).expect("validated");
                    for r in reqs.by_ref().take(cnt as usize) {
                        state.enqueue(j, r);
                    }
                    inflow[j] += cnt;
                    // Unused nominal capacity is charged to the first batch.
                    let charged = if mode == CostMode::Rate && b == 0 {
                        cnt + nominal.saturating_sub(carried)
                    } else {
                        cnt
                    };
                    nominal_inflow[j] += charged;
                    m += charged as f64 * w(s);
                }
            }
        }
    }
    Forwarded {
        m,
        inflow,
        nominal_inflow,
    }
}

/// Each instance serves `min(φ(Y), backlog)` requests FIFO. Terminal
/// instances complete them; others keep them as next slot's carry.
pub fn apply_processing(
    model: &SystemModel,
    state: &mut QueueState,
    alloc: &[ResourceVector],
) -> Processed {
    let mut g = 0.0;
    let mut processed = vec![0u64; state.instances.len()];
    let mut completed = Vec::new();
    for (i, q) in state.instances.iter_mut().enumerate() {
        let vnf = model.vnf(q.key.vnf);
        let y = &alloc[i];
        g += model.servers[q.key.server.0].unit_cost.dot(y) as f64;
        let rate = vnf.rate(y);
        q.nominal_rate = rate;
        let p = (rate as usize).min(q.backlog.len());
        processed[i] = p as u64;
        let done = q.backlog.drain(..p);
        if model.next_vnf(q.key.vnf).is_some() {
            debug_assert!(q.carry.is_empty());
            q.carry = done.collect();
        } else {
            completed.extend(done);
        }
    }
    Processed {
        g,
        processed,
        completed,
    }
}

/// `h = Σ_k Q^p_k + α·Σ Q^s_f`.
pub fn total_queue_snapshot(snap: &Snapshot, alpha: f64) -> f64 {
    let pred: u64 = (0..snap.window.len()).map(|k| snap.q_p(k)).sum();
    let inst: u64 = snap.backlog.iter().sum();
    pred as f64 + alpha * inst as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(window: Vec<Vec<u32>>, backlog: Vec<u64>) -> Snapshot {
        let n = backlog.len();
        Snapshot {
            slot: 0,
            window,
            backlog,
            carry: vec![0; n],
        }
    }

    #[test]
    fn h_direct_formula() {
        assert_eq!(
            total_queue_snapshot(&snap(vec![vec![0]], vec![0, 0]), 10.0),
            0.0
        );
        assert_eq!(
            total_queue_snapshot(&snap(vec![vec![1, 1]], vec![1, 3]), 10.0),
            42.0
        );
        assert_eq!(
            total_queue_snapshot(&snap(vec![vec![1, 1]], vec![1, 3]), 0.0),
            2.0
        );
    }
}
