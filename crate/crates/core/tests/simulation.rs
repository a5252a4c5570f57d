use std::fs;

use nfv_sched::config::Config;
use nfv_sched::error::{ConstraintError, SimError};
use nfv_sched::experiment::Experiment;
use nfv_sched::forecast::ForecasterSpec;
use nfv_sched::golden::{forced, motivating_model, motivating_simulation, SERVER_II};
use nfv_sched::model::SystemModel;
use nfv_sched::queues::{Route, Snapshot};
use nfv_sched::sim::{slots_csv, Policy, PoscarsPolicy, SimOptions, Simulation};
use nfv_sched::variants::ChainingStrategy;
use nfv_sched::workload::ArrivalTrace;

fn experiment(sets: &[&str]) -> Experiment {
    Experiment::new(Config::default().apply_overrides(sets).unwrap()).unwrap()
}

#[test]
fn empty_workload_costs_nothing() {
    let model = motivating_model();
    let trace = ArrivalTrace {
        counts: vec![vec![0; 8]],
        slot_length_ms: 10.0,
    };
    let policy = PoscarsPolicy::new(Default::default(), ChainingStrategy::Poscars, 0);
    let opts = SimOptions {
        check: true,
        ..SimOptions::default()
    };
    let mut sim = Simulation::new(model, trace, &ForecasterSpec::Perfect, policy, opts, 0);
    let out = sim.run(1).unwrap();
    assert_eq!(out.summary.time_avg_cost, 0.0);
    assert_eq!(out.summary.time_avg_h, 0.0);
    assert_eq!(out.summary.response.count, 0);
}

#[test]
fn forwarding_moves_the_whole_carry() {
    // Decision #1 of the motivating example: a's single processed request
    // joins the two already queued at II before II processes.
    let mut sim = motivating_simulation(|m: &SystemModel, s: &Snapshot| {
        Ok::<_, ConstraintError>(forced(m, s, 1, SERVER_II, [0, 0, 0]))
    });
    let out = sim.step().unwrap();
    let m = sim.model();
    let b_ii = m
        .instance_index(nfv_sched::golden::VNF_B, SERVER_II)
        .unwrap();
    assert_eq!(sim.state().instances[b_ii].backlog.len(), 3);
    assert_eq!(out.metrics.m, 1.0);
    assert_eq!(out.metrics.g, 0.0);
}

#[test]
fn invalid_decision_aborts_the_run() {
    // Allocating three cores on a two-core server breaks the capacity bound.
    let mut sim = motivating_simulation(|m: &SystemModel, s: &Snapshot| {
        let mut d = forced(m, s, 1, SERVER_II, [0, 0, 0]);
        d.alloc[0] = nfv_sched::model::ResourceVector::scalar(3);
        Ok::<_, ConstraintError>(d)
    });
    assert!(matches!(sim.step(), Err(SimError::Constraint(_))));
}

#[test]
fn missing_successor_is_rejected() {
    let mut sim = motivating_simulation(|m: &SystemModel, s: &Snapshot| {
        let mut d = forced(m, s, 1, SERVER_II, [0, 0, 0]);
        for c in d.chain.iter_mut() {
            if matches!(c, Some(Route::Single(_))) {
                *c = None;
            }
        }
        Ok::<_, ConstraintError>(d)
    });
    assert!(sim.step().is_err());
}

#[test]
fn same_seed_same_bytes() {
    let exp = experiment(&[
        "horizon=300",
        "forecaster=false-positive",
        "d_avg=3",
        "scheduler.kind=p-bs",
    ]);
    let a = exp.run_replication(0).unwrap();
    let b = exp.run_replication(0).unwrap();
    assert_eq!(slots_csv(&a.slots), slots_csv(&b.slots));
    let c = exp.run_replication(1).unwrap();
    assert_ne!(slots_csv(&a.slots), slots_csv(&c.slots));
}

#[test]
fn replication_one_equals_single_run() {
    let exp = experiment(&["horizon=200", "replications=1"]);
    let runs = exp.replicate().unwrap();
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0], exp.run_replication(0).unwrap());
}

#[test]
fn replications_are_independent_of_thread_count() {
    let one = experiment(&["horizon=200", "replications=4", "threads=1"])
        .replicate()
        .unwrap();
    let many = experiment(&["horizon=200", "replications=4", "threads=4"])
        .replicate()
        .unwrap();
    assert_eq!(one, many);
}

#[test]
fn deterministic_workload_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.txt");
    fs::write(
        &trace,
        (0..50)
            .map(|i| format!("{}\n", 3 + i % 7))
            .collect::<String>(),
    )
    .unwrap();
    let cfg = Config::default()
        .apply_overrides(&[
            "horizon=200".to_string(),
            "replications=3".to_string(),
            "workload.kind=trace".to_string(),
            format!("workload.trace={:?}", trace.display().to_string()),
        ])
        .unwrap();
    let exp = Experiment::new(cfg).unwrap();
    let report = exp.report(&exp.replicate().unwrap());
    assert_eq!(report.summary.time_avg_cost.std, 0.0);
    assert!(report.summary.time_avg_cost.mean > 0.0);
}

#[test]
fn poisson_replications_vary() {
    let exp = experiment(&["horizon=300", "replications=5"]);
    let report = exp.report(&exp.replicate().unwrap());
    assert!(report.summary.time_avg_cost.std > 0.0);
}

#[test]
fn stable_load_does_not_grow() {
    let exp = experiment(&["horizon=10000", "target_utilization=0.6"]);
    let out = exp.run_replication(0).unwrap();
    let half = out.slots.len() / 2;
    let max = |s: &[nfv_sched::metrics::SlotMetrics]| s.iter().map(|m| m.h).fold(0.0, f64::max);
    let (first, last) = (max(&out.slots[..half]), max(&out.slots[half..]));
    assert!(
        last < 2.0 * first,
        "first-half max {first}, last-half max {last}"
    );
}

#[test]
fn every_scheduler_keeps_the_identities() {
    for kind in [
        "poscars", "p-pod", "p-bs", "p-bf", "random", "jsq", "onehop",
    ] {
        let exp = experiment(&[
            "horizon=300",
            "check_invariants=true",
            "forecaster=false-positive",
            "d_avg=4",
            &format!("scheduler.kind={kind}"),
        ]);
        exp.run_replication(0)
            .unwrap_or_else(|e| panic!("{kind}: {e}"));
    }
}

#[test]
fn learned_forecasters_run() {
    for f in [
        "moving-average",
        "ewma",
        "kalman",
        "distribution-estimator",
        "all-false-negative",
    ] {
        let exp = experiment(&[
            "horizon=200",
            "check_invariants=true",
            &format!("forecaster={f}"),
        ]);
        let out = exp.run_replication(0).unwrap();
        assert!(out.summary.response.count > 0, "{f}");
    }
}

#[test]
fn phantoms_never_reach_response_statistics() {
    let exp = experiment(&[
        "horizon=400",
        "forecaster=false-positive",
        "false_positive_rate=10",
        "d_avg=3",
    ]);
    let mut sim = exp.simulation(0).unwrap();
    let mut phantoms = 0;
    let mut real = 0;
    for _ in 0..400 {
        let out = sim.step().unwrap();
        phantoms += out.completed.iter().filter(|r| r.phantom).count() as u64;
        real += out.completed.iter().filter(|r| !r.phantom).count() as u64;
    }
    let s = sim.summary();
    assert!(phantoms > 0);
    assert_eq!(s.phantom_completions, phantoms);
    assert_eq!(s.response.count, real);
}

struct Idle;

impl Policy for Idle {
    fn decide(
        &mut self,
        model: &SystemModel,
        snap: &Snapshot,
    ) -> Result<nfv_sched::queues::DecisionSet, ConstraintError> {
        nfv_sched::poscars::decide(model, snap, &nfv_sched::poscars::ControlParams::default()).map(
            |mut d| {
                for a in d.alloc.iter_mut() {
                    *a = nfv_sched::model::ResourceVector::zeros(a.len());
                }
                d
            },
        )
    }
}

#[test]
fn custom_policy_without_service_accumulates() {
    let exp = experiment(&["horizon=50"]);
    let trace = nfv_sched::scenario::build_workload(&exp.config, exp.model(), 1).unwrap();
    let opts = SimOptions {
        check: true,
        ..exp.options()
    };
    let mut sim = Simulation::new(
        exp.model().clone(),
        trace,
        &ForecasterSpec::Perfect,
        Idle,
        opts,
        1,
    );
    let out = sim.run(50).unwrap();
    assert_eq!(out.summary.time_avg_g, 0.0);
    assert!(out.slots.windows(2).all(|w| w[1].h >= w[0].h));
}
