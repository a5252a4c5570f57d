//! Slot-by-slot orchestration: decide, admit, forward, process, advance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ConstraintError, SimError};
use crate::forecast::{Forecaster, ForecasterSpec};
use crate::metrics::{MetricsAccumulator, RunSummary, SlotMetrics};
use crate::model::SystemModel;
use crate::poscars::{decide_admission, decide_allocation, ControlParams};
use crate::queues::{
    apply_admission, apply_forwarding, apply_processing, total_queue_snapshot, validate_decisions,
    CostMode, DecisionSet, QueueState, Snapshot,
};
use crate::variants::{decide_chaining_with, ChainingStrategy};
use crate::window::{PredictionWindow, RequestIds};
use crate::workload::ArrivalTrace;

/// Produces one slot's decisions from a snapshot.
pub trait Policy {
    fn decide(
        &mut self,
        model: &SystemModel,
        snap: &Snapshot,
    ) -> Result<DecisionSet, ConstraintError>;
}

impl<F> Policy for F
where
    F: FnMut(&SystemModel, &Snapshot) -> Result<DecisionSet, ConstraintError>,
{
    fn decide(
        &mut self,
        model: &SystemModel,
        snap: &Snapshot,
    ) -> Result<DecisionSet, ConstraintError> {
        self(model, snap)
    }
}

/// POSCARS admission and allocation with a configurable chaining rule.
#[derive(Debug, Clone)]
pub struct PoscarsPolicy {
    pub params: ControlParams,
    pub strategy: ChainingStrategy,
    rng: ChaCha8Rng,
}

impl PoscarsPolicy {
    pub fn new(params: ControlParams, strategy: ChainingStrategy, seed: u64) -> Self {
        Self {
            params,
            strategy,
            rng: stream_rng(seed, STREAM_SCHEDULER),
        }
    }
}

impl Policy for PoscarsPolicy {
    fn decide(
        &mut self,
        model: &SystemModel,
        snap: &Snapshot,
    ) -> Result<DecisionSet, ConstraintError> {
        Ok(DecisionSet {
            admission: decide_admission(model, snap, &self.params),
            chain: decide_chaining_with(self.strategy, model, snap, &self.params, &mut self.rng)?,
            alloc: decide_allocation(model, snap, &self.params),
        })
    }
}

const STREAM_PREDICTION: u64 = 1 << 32;
const STREAM_SCHEDULER: u64 = 2 << 32;
const STREAM_JITTER: u64 = 3 << 32;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Run-time options independent of the scheduler.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub alpha: f64,
    pub gamma: f64,
    pub cost_mode: CostMode,
    pub warmup: u64,
    pub slot_length_ms: f64,
    /// Verify every queueing identity after each slot.
    pub check: bool,
    /// Per-slot redraw of communication costs: `(base_cost, variation)`.
    pub jitter: Option<(f64, f64)>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            alpha: ControlParams::default().alpha,
            gamma: ControlParams::default().gamma,
            cost_mode: CostMode::Actual,
            warmup: 0,
            slot_length_ms: crate::workload::DEFAULT_SLOT_MS,
            check: false,
            jitter: None,
        }
    }
}

/// What happened in one slot.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub metrics: SlotMetrics,
    pub decisions: DecisionSet,
    pub completed: Vec<crate::window::Request>,
}

pub struct Simulation<P: Policy> {
    model: SystemModel,
    trace: ArrivalTrace,
    state: QueueState,
    policy: P,
    opts: SimOptions,
    ids: RequestIds,
    pred_rng: ChaCha8Rng,
    jitter_rng: ChaCha8Rng,
    acc: MetricsAccumulator,
    admitted_real: u64,
    completed_real: u64,
}

impl<P: Policy> Simulation<P> {
    /// All instance queues empty; windows hold the arrivals visible at slot 0.
    pub fn new(
        model: SystemModel,
        trace: ArrivalTrace,
        forecaster: &ForecasterSpec,
        policy: P,
        opts: SimOptions,
        seed: u64,
    ) -> Self {
        let mut ids = RequestIds::default();
        let mut pred_rng = stream_rng(seed, STREAM_PREDICTION);
        let windows = model
            .catalog
            .services
            .iter()
            .map(|svc| {
                let k = svc.id.0;
                let tr = &trace;
                PredictionWindow::new(
                    svc.id,
                    svc.window_size,
                    Forecaster::new(forecaster.clone()),
                    0,
                    |t| tr.at(k, t),
                    &mut ids,
                    &mut pred_rng,
                )
            })
            .collect();
        let state = QueueState::new(&model, windows);
        let acc = MetricsAccumulator::new(opts.gamma, opts.warmup, opts.slot_length_ms);
        Self {
            model,
            trace,
            state,
            policy,
            opts,
            ids,
            pred_rng,
            jitter_rng: stream_rng(seed, STREAM_JITTER),
            acc,
            admitted_real: 0,
            completed_real: 0,
        }
    }

    pub fn model(&self) -> &SystemModel {
        &self.model
    }

    pub fn state(&self) -> &QueueState {
        &self.state
    }

    /// Mutable access for setting up hand-built initial states.
    pub fn state_mut(&mut self) -> &mut QueueState {
        &mut self.state
    }

    pub fn summary(&self) -> RunSummary {
        self.acc.summary()
    }

    /// Advances one slot.
    pub fn step(&mut self) -> Result<StepOutcome, SimError> {
        let t = self.state.slot;
        if let Some((base, var)) = self.opts.jitter {
            self.model.comm.resample(base, var, &mut self.jitter_rng);
        }
        let snap = self.state.snapshot();
        let decisions = self.policy.decide(&self.model, &snap)?;
        validate_decisions(&self.model, &snap, &decisions)?;

        let real_before: Vec<u64> = if self.opts.check {
            self.state
                .windows
                .iter()
                .map(|w| w.iter_requests().filter(|r| !r.phantom).count() as u64)
                .collect()
        } else {
            Vec::new()
        };
        apply_admission(&self.model, &mut self.state, &decisions.admission);
        if self.opts.check {
            let real_after: u64 = self
                .state
                .windows
                .iter()
                .map(|w| w.iter_requests().filter(|r| !r.phantom).count() as u64)
                .sum();
            self.admitted_real += real_before.iter().sum::<u64>() - real_after;
        }
        let fwd = apply_forwarding(
            &self.model,
            &mut self.state,
            &decisions.chain,
            self.opts.cost_mode,
        );
        let mid = self.state.snapshot();
        let h = total_queue_snapshot(&mid, self.opts.alpha);
        let proc = apply_processing(&self.model, &mut self.state, &decisions.alloc);

        let mut entering = Vec::with_capacity(self.state.windows.len());
        for (k, w) in self.state.windows.iter_mut().enumerate() {
            let tr = &self.trace;
            let e = w
                .advance(t, |s| tr.at(k, s), &mut self.ids, &mut self.pred_rng)
                .map_err(|what| ConstraintError::Invariant { slot: t, what })?;
            entering.push(e);
        }
        self.state.slot = t + 1;

        let metrics = self.acc.record(t, fwd.m, proc.g, h, &proc.completed);
        if self.opts.check {
            self.completed_real += proc.completed.iter().filter(|r| !r.phantom).count() as u64;
            self.check_identities(t, &snap, &decisions, &fwd, &proc, &entering)?;
        }
        Ok(StepOutcome {
            metrics,
            decisions,
            completed: proc.completed,
        })
    }

    fn check_identities(
        &self,
        t: u64,
        before: &Snapshot,
        d: &DecisionSet,
        fwd: &crate::queues::Forwarded,
        proc: &crate::queues::Processed,
        entering: &[crate::window::Entering],
    ) -> Result<(), ConstraintError> {
        let fail = |what: String| Err(ConstraintError::Invariant { slot: t, what });
        let after = self.state.snapshot();

        // Prediction queues: Q^p(t+1) = [Q^p(t) − δ(t)]⁺ + entering, and each
        // slot stays within what entered it.
        for (k, w) in self.state.windows.iter().enumerate() {
            let delta = d
                .admission
                .iter()
                .find(|a| a.service.0 == k)
                .map_or(0, |a| a.total());
            let expect = before.q_p(k).saturating_sub(delta) + entering[k].total();
            if after.q_p(k) != expect {
                return fail(format!(
                    "prediction queue k{k}: {} != {expect}",
                    after.q_p(k)
                ));
            }
            if w.counts().iter().zip(w.bounds()).any(|(&q, b)| q > b) {
                return fail(format!("window k{k} holds more than entered"));
            }
        }

        // Instance queues: exact update with the actual processed count, and
        // inflow bounded by the nominal forwarded rate.
        let mut admitted = vec![0u64; before.backlog.len()];
        for a in &d.admission {
            let f = self.model.catalog.services[a.service.0].ingress();
            for &(s, n) in &a.targets {
                admitted[self.model.instance_index(f, s).expect("validated")] += n;
            }
        }
        for (i, q) in self.state.instances.iter().enumerate() {
            let vnf = self.model.vnf(q.key.vnf);
            let rate = u64::from(vnf.rate(&d.alloc[i]));
            let avail = before.backlog[i] + admitted[i] + fwd.inflow[i];
            let served = rate.min(avail);
            if proc.processed[i] != served || after.backlog[i] != avail - served {
                return fail(format!("instance {i}: backlog update mismatch"));
            }
            if fwd.inflow[i] > fwd.nominal_inflow[i] {
                return fail(format!(
                    "instance {i}: inflow {} above nominal {}",
                    fwd.inflow[i], fwd.nominal_inflow[i]
                ));
            }
            if after.carry[i] > rate || rate > u64::from(vnf.phi_max) {
                return fail(format!(
                    "instance {i}: carry {} exceeds rate {rate}",
                    after.carry[i]
                ));
            }
            if q.backlog
                .iter()
                .zip(q.backlog.iter().skip(1))
                .any(|(a, b)| a.ticket >= b.ticket)
            {
                return fail(format!("instance {i}: FIFO order broken"));
            }
        }

        let held = self.state.real_in_instances();
        if self.admitted_real != held + self.completed_real {
            return fail(format!(
                "conservation: admitted {} != held {held} + completed {}",
                self.admitted_real, self.completed_real
            ));
        }
        Ok(())
    }

    /// Runs `horizon` slots; returns the summary and per-slot metrics.
    pub fn run(&mut self, horizon: u64) -> Result<RunOutput, SimError> {
        let mut slots = Vec::with_capacity(horizon as usize);
        for _ in 0..horizon {
            slots.push(self.step()?.metrics);
        }
        Ok(RunOutput {
            summary: self.summary(),
            slots,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub slots: Vec<SlotMetrics>,
}

/// Per-slot rows `slot,m,g,h,completions`.
pub fn slots_csv(slots: &[SlotMetrics]) -> String {
    let mut out = String::from("slot,m,g,h,completions\n");
    for s in slots {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.slot, s.m, s.g, s.h, s.completions
        ));
    }
    out
}
