mod common;

use std::collections::BTreeSet;

use nfv_sched::config::Config;
use nfv_sched::experiment::Experiment;
use nfv_sched::model::{ResourceVector, ServerId};
use nfv_sched::poscars::{
    decide, decide_allocation, decide_chaining, earliest_first, even_split,
    optimal_allocation_bruteforce, slot_objective, successor_candidates, ControlParams,
};
use nfv_sched::queues::{validate_decisions, DecisionSet, Route};
use nfv_sched::variants::{decide_chaining_with, ChainingStrategy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn service_rate_is_capped_and_monotone(theta in 0u32..6, phi in 1u32..30, a in 0u32..10, b in 0u32..10) {
        let model = {
            let mut rng = ChaCha8Rng::seed_from_u64(u64::from(theta));
            common::random_chain_model(&mut rng, 1, 1)
        };
        let mut vnf = model.catalog.vnfs[0].clone();
        vnf.theta = ResourceVector::scalar(theta);
        vnf.phi_max = phi;
        let (lo, hi) = (a.min(b), a.max(b));
        let r_lo = vnf.rate(&ResourceVector::scalar(lo));
        let r_hi = vnf.rate(&ResourceVector::scalar(hi));
        prop_assert!(r_hi <= phi);
        prop_assert!(r_lo <= r_hi);
        prop_assert_eq!(vnf.rate(&ResourceVector::scalar(0)), 0);
    }

    #[test]
    fn splits_cover_their_total(total in 0u64..200, n in 1usize..7, slots in prop::collection::vec(0u32..20, 1..6)) {
        let s = even_split(total, n);
        prop_assert_eq!(s.iter().sum::<u64>(), total);
        prop_assert!(s.iter().max().unwrap() - s.iter().min().unwrap() <= 1);
        prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));

        let cap: u64 = slots.iter().map(|&c| u64::from(c)).sum();
        let want = total.min(cap);
        let e = earliest_first(want, &slots);
        prop_assert_eq!(e.iter().sum::<u64>(), want);
        for (d, (&x, &c)) in e.iter().zip(&slots).enumerate() {
            prop_assert!(x <= u64::from(c));
            // A later slot is touched only once every earlier one is empty.
            if x > 0 {
                prop_assert!(e[..d].iter().zip(&slots).all(|(&y, &c)| y == u64::from(c)));
            }
        }
    }

    #[test]
    fn poscars_decisions_are_feasible_and_priced(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_chain_model(&mut rng, 3, 2);
        let snap = common::random_snapshot(&mut rng, &model);
        let p = common::random_params(&mut rng);
        let d = decide(&model, &snap, &p).unwrap();
        prop_assert!(validate_decisions(&model, &snap, &d).is_ok());
        let terms = slot_objective(&model, &snap, &d, &p).unwrap();
        prop_assert!(terms.allocation <= 0.0);
        for (i, route) in d.chain.iter().enumerate() {
            let Some(Route::Single(s)) = route else { continue };
            let cands = successor_candidates(&model, &snap, i, &p);
            let chosen = cands.iter().find(|c| c.server == *s).unwrap();
            for c in &cands {
                prop_assert!(chosen.price < c.price || (chosen.price == c.price && chosen.server <= c.server));
            }
        }
    }

    #[test]
    fn greedy_allocation_never_beats_the_exhaustive_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_single_server_model(&mut rng);
        let snap = common::random_snapshot(&mut rng, &model);
        let p = common::random_params(&mut rng);
        let alloc = decide_allocation(&model, &snap, &p);
        let full = DecisionSet {
            alloc: alloc.clone(),
            ..decide(&model, &snap, &p).unwrap()
        };
        let greedy = slot_objective(&model, &snap, &full, &p).unwrap().allocation;
        let (_, best) = optimal_allocation_bruteforce(&model, &snap, ServerId(0), &p);
        prop_assert!(best <= greedy + 1e-9);
        let used = alloc.iter().fold(ResourceVector::zeros(2), |a, y| a.add(y));
        prop_assert!(used.fits_within(&model.servers[0].capacity));
    }

    #[test]
    fn scaling_v_and_alpha_keeps_chaining_and_allocation(seed in any::<u64>(), k in prop::sample::select(vec![0.5, 2.0, 10.0])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_chain_model(&mut rng, 3, 2);
        let snap = common::random_snapshot(&mut rng, &model);
        let p = common::random_params(&mut rng);
        let q = ControlParams { v: p.v * k, alpha: p.alpha * k, gamma: p.gamma };
        prop_assert_eq!(decide_chaining(&model, &snap, &p).unwrap(), decide_chaining(&model, &snap, &q).unwrap());
        prop_assert_eq!(decide_allocation(&model, &snap, &p), decide_allocation(&model, &snap, &q));
    }

    #[test]
    fn variants_emit_valid_decisions(seed in any::<u64>(), d in 1usize..4, batch in 1u64..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_chain_model(&mut rng, 3, 2);
        let snap = common::random_snapshot(&mut rng, &model);
        let p = common::random_params(&mut rng);
        let base = decide(&model, &snap, &p).unwrap();
        for strategy in [
            ChainingStrategy::PPod { d },
            ChainingStrategy::PBs { d, batch },
            ChainingStrategy::PBf { d, batch },
            ChainingStrategy::Random,
            ChainingStrategy::Jsq,
            ChainingStrategy::OneHop,
        ] {
            let chain = decide_chaining_with(strategy, &model, &snap, &p, &mut rng).unwrap();
            for (i, r) in chain.iter().enumerate() {
                if let Some(Route::Batches(b)) = r {
                    let z = snap.carry[i].div_ceil(batch) as usize;
                    let targets: BTreeSet<ServerId> = b.iter().map(|x| x.0).collect();
                    prop_assert!(targets.len() <= d * z);
                    prop_assert_eq!(b.iter().map(|x| x.1).sum::<u64>(), snap.carry[i]);
                }
            }
            let set = DecisionSet { chain, ..base.clone() };
            prop_assert!(validate_decisions(&model, &snap, &set).is_ok(), "{strategy}");
        }
    }

    #[test]
    fn full_probe_p_pod_is_poscars(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_chain_model(&mut rng, 3, 2);
        let snap = common::random_snapshot(&mut rng, &model);
        let p = common::random_params(&mut rng);
        let d = model.placement.max_instances();
        prop_assert_eq!(
            decide_chaining_with(ChainingStrategy::PPod { d }, &model, &snap, &p, &mut rng).unwrap(),
            decide_chaining(&model, &snap, &p).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulations_keep_every_identity(seed in 0u64..1000, kind in prop::sample::select(vec!["poscars", "p-bs", "p-bf", "jsq"]), d_avg in 0u32..4) {
        let cfg = Config::default()
            .apply_overrides(&[
                "horizon=150".to_string(),
                "check_invariants=true".to_string(),
                "forecaster=false-positive".to_string(),
                format!("d_avg={d_avg}"),
                format!("scenario.seed={seed}"),
                format!("scheduler.kind={kind}"),
            ])
            .unwrap();
        let exp = Experiment::new(cfg).unwrap();
        let out = exp.run_replication(0);
        prop_assert!(out.is_ok(), "{:?}", out.err());
        let s = out.unwrap().summary;
        prop_assert!(s.response.mean_ms >= 0.0 && s.response.mean_ms.is_finite());
    }
}
