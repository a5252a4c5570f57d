//! The two-VNF motivating example: one service `a → b`, `a` on server I,
//! `b` on servers II and III, evaluated under forced decisions.

use std::fmt;

use crate::error::{ConstraintError, SimError};
use crate::forecast::ForecasterSpec;
use crate::model::{
    single_resource_options, Catalog, Placement, ResourceVector, Server, ServerId, ServiceChain,
    ServiceId, SystemModel, VnfId, VnfSpec,
};
use crate::queues::{Admission, DecisionSet, Route, Snapshot};
use crate::sim::{Policy, SimOptions, Simulation};
use crate::topology::CommCostMatrix;
use crate::window::Request;
use crate::workload::ArrivalTrace;

pub const SERVER_I: ServerId = ServerId(0);
pub const SERVER_II: ServerId = ServerId(1);
pub const SERVER_III: ServerId = ServerId(2);
pub const VNF_A: VnfId = VnfId(0);
pub const VNF_B: VnfId = VnfId(1);

/// Every server processes two requests per slot at unit energy cost; a
/// request costs 1 to send from I to II and 2 from I to III.
pub fn motivating_model() -> SystemModel {
    let servers = (0..3)
        .map(|s| Server {
            id: ServerId(s),
            capacity: ResourceVector::scalar(2),
            unit_cost: ResourceVector::scalar(1),
        })
        .collect();
    let vnf = |id, position| VnfSpec {
        id,
        service: ServiceId(0),
        position,
        theta: ResourceVector::scalar(1),
        phi_max: 2,
        options: single_resource_options(2),
    };
    let catalog = Catalog {
        services: vec![ServiceChain {
            id: ServiceId(0),
            vnfs: vec![VNF_A, VNF_B],
            window_size: 1,
        }],
        vnfs: vec![vnf(VNF_A, 1), vnf(VNF_B, 2)],
    };
    let placement =
        Placement::from_pairs([(VNF_A, SERVER_I), (VNF_B, SERVER_II), (VNF_B, SERVER_III)]);
    let comm = CommCostMatrix::from_costs(vec![
        vec![0.0, 1.0, 2.0],
        vec![1.0, 0.0, 1.0],
        vec![2.0, 1.0, 0.0],
    ]);
    SystemModel::new(servers, catalog, placement, comm).expect("motivating model is valid")
}

/// Slot 0 of the example: one request has arrived, one more arrives in
/// slot 1 (perfectly predicted); `a` on I holds one processed request;
/// `b` holds two requests on II and one on III.
pub fn motivating_simulation<P: Policy>(policy: P) -> Simulation<P> {
    let model = motivating_model();
    let trace = ArrivalTrace {
        counts: vec![vec![1, 1, 0, 0]],
        slot_length_ms: 10.0,
    };
    let opts = SimOptions {
        alpha: 1.0,
        gamma: 1.0,
        ..SimOptions::default()
    };
    let mut sim = Simulation::new(model, trace, &ForecasterSpec::Perfect, policy, opts, 0);
    let old = |id| Request {
        id,
        service: ServiceId(0),
        arrival_slot: 0,
        phantom: false,
        ticket: 0,
    };
    let m = sim.model().clone();
    let a_i = m.instance_index(VNF_A, SERVER_I).expect("a on I");
    let b_ii = m.instance_index(VNF_B, SERVER_II).expect("b on II");
    let b_iii = m.instance_index(VNF_B, SERVER_III).expect("b on III");
    let st = sim.state_mut();
    st.instances[a_i].carry.push(old(1001));
    st.instances[a_i].nominal_rate = 1;
    st.enqueue(b_ii, old(1002));
    st.enqueue(b_ii, old(1003));
    st.enqueue(b_iii, old(1004));
    sim
}

/// Forced decisions for one slot: admit `admit` requests to I, forward a's
/// carry to `to`, allocate `(I, II, III)` cores.
pub fn forced(
    model: &SystemModel,
    snap: &Snapshot,
    admit: u64,
    to: ServerId,
    cores: [u32; 3],
) -> DecisionSet {
    let mut per_slot = Vec::new();
    let mut left = admit;
    for &c in &snap.window[0] {
        let take = left.min(u64::from(c));
        per_slot.push(take);
        left -= take;
    }
    let mut alloc = vec![ResourceVector::scalar(0); model.instances().len()];
    let mut chain = vec![None; model.instances().len()];
    for (i, key) in model.instances().iter().enumerate() {
        alloc[i] = ResourceVector::scalar(cores[key.server.0]);
        if key.vnf == VNF_A {
            chain[i] = Some(Route::Single(to));
        }
    }
    DecisionSet {
        admission: vec![Admission {
            service: ServiceId(0),
            per_slot,
            targets: if admit > 0 {
                vec![(SERVER_I, admit)]
            } else {
                vec![]
            },
        }],
        chain,
        alloc,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenCheck {
    pub name: &'static str,
    pub expected: String,
    pub actual: String,
}

impl GoldenCheck {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

impl fmt::Display for GoldenCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{tag} {}: expected {}, got {}",
            self.name, self.expected, self.actual
        )
    }
}

/// Cost `m + g` and residual instance backlog after one forced slot.
pub fn forced_slot(to: ServerId, cores: [u32; 3]) -> Result<(f64, u64), SimError> {
    let mut sim = motivating_simulation(move |m: &SystemModel, s: &Snapshot| {
        Ok::<_, ConstraintError>(forced(m, s, 1, to, cores))
    });
    let out = sim.step()?;
    let residual = sim
        .state()
        .instances
        .iter()
        .map(|q| q.backlog.len() as u64)
        .sum();
    Ok((out.metrics.m + out.metrics.g, residual))
}

/// Response time (ms) of the request arriving in slot 1 when it is admitted
/// and served ahead of time.
pub fn pre_service_response() -> Result<Option<f64>, SimError> {
    let policy = |m: &SystemModel, s: &Snapshot| {
        Ok::<_, ConstraintError>(if s.slot == 0 {
            forced(m, s, 2, SERVER_III, [2, 2, 2])
        } else {
            forced(m, s, s.q0(0), SERVER_II, [0, 2, 2])
        })
    };
    let mut sim = motivating_simulation(policy);
    let mut response = None;
    for _ in 0..2 {
        let t = sim.state().slot;
        let out = sim.step()?;
        for r in &out.completed {
            if r.arrival_slot == 1 {
                response = crate::metrics::response_time(r, t, 10.0);
            }
        }
    }
    Ok(response)
}

/// Runs all three golden cases.
pub fn run_golden() -> Result<Vec<GoldenCheck>, SimError> {
    let (c1, r1) = forced_slot(SERVER_II, [1, 2, 1])?;
    let (c2, r2) = forced_slot(SERVER_III, [1, 2, 2])?;
    let pre = pre_service_response()?;
    Ok(vec![
        GoldenCheck {
            name: "decision #1 (forward to II)",
            expected: "cost 5, residual 1".into(),
            actual: format!("cost {c1}, residual {r1}"),
        },
        GoldenCheck {
            name: "decision #2 (forward to III)",
            expected: "cost 7, residual 0".into(),
            actual: format!("cost {c2}, residual {r2}"),
        },
        GoldenCheck {
            name: "pre-service of the future request",
            expected: "response 0 ms".into(),
            actual: match pre {
                Some(ms) => format!("response {ms} ms"),
                None => "not completed".into(),
            },
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poscars::{decide_chaining, ControlParams};

    #[test]
    fn golden_cases_hold() {
        for c in run_golden().unwrap() {
            assert!(c.passed(), "{c}");
        }
    }

    #[test]
    fn chaining_trade_off() {
        let sim = motivating_simulation(|m: &SystemModel, s: &Snapshot| {
            Ok::<_, ConstraintError>(forced(m, s, 1, SERVER_II, [0, 0, 0]))
        });
        let snap = sim.state().snapshot();
        let m = sim.model();
        let a_i = m.instance_index(VNF_A, SERVER_I).unwrap();
        let balanced = ControlParams {
            v: 0.0,
            alpha: 1.0,
            gamma: 1.0,
        };
        let frugal = ControlParams {
            v: 100.0,
            alpha: 1.0,
            gamma: 1.0,
        };
        assert_eq!(
            decide_chaining(m, &snap, &balanced).unwrap()[a_i],
            Some(Route::Single(SERVER_III))
        );
        assert_eq!(
            decide_chaining(m, &snap, &frugal).unwrap()[a_i],
            Some(Route::Single(SERVER_II))
        );
    }
}
