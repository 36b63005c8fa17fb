use proptest::prelude::*;

use sybilsim_core::adversary::burst_batch_size;
use sybilsim_core::analysis::{cs2_holds, detect_epochs, detect_epochs_brute_force};
use sybilsim_core::churn::{generate, parse_trace, serialize, GeneratorSpec, TraceDuration};
use sybilsim_core::{run, AdversaryConfig, ChurnKind, ChurnTrace, Defense, SimConfig, TraceEvent};

/// Random well-formed trace: `n_init` IDs at time 0, then joins of fresh IDs
/// and departures of live ones.
fn arb_trace() -> impl Strategy<Value = ChurnTrace> {
    (1usize..40, prop::collection::vec((0.01f64..2.0, any::<bool>(), any::<prop::sample::Index>()), 0..300)).prop_map(
        |(n_init, steps)| {
            let mut events: Vec<TraceEvent> =
                (0..n_init as u32).map(|id| TraceEvent { time: 0.0, id, kind: ChurnKind::Join }).collect();
            let mut live: Vec<u32> = (0..n_init as u32).collect();
            let mut next = n_init as u32;
            let mut t = 0.0;
            for (dt, join, pick) in steps {
                t += dt;
                if join || live.len() <= 1 {
                    events.push(TraceEvent { time: t, id: next, kind: ChurnKind::Join });
                    live.push(next);
                    next += 1;
                } else {
                    let id = live.swap_remove(pick.index(live.len()));
                    events.push(TraceEvent { time: t, id, kind: ChurnKind::Depart });
                }
            }
            ChurnTrace::from_events(events)
        },
    )
}

fn gnutella(seconds: f64, seed: u64) -> ChurnTrace {
    generate(&GeneratorSpec::gnutella(200, TraceDuration::Seconds(seconds)), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn epochs_match_brute_force(trace in arb_trace()) {
        prop_assert_eq!(detect_epochs(&trace).boundaries(), detect_epochs_brute_force(&trace));
    }

    #[test]
    fn epochs_partition_time(trace in arb_trace()) {
        let ep = detect_epochs(&trace);
        let all: Vec<_> = ep.all().collect();
        for w in all.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        let joins: usize = all.iter().map(|e| e.joins).sum();
        prop_assert_eq!(joins, ep.join_times.len());
    }

    #[test]
    fn burst_batch_is_largest_affordable(b in 0u64..5_000_000) {
        let k = burst_batch_size(b);
        prop_assert!(k * (k + 1) / 2 <= b);
        prop_assert!((k + 1) * (k + 2) / 2 > b);
    }

    #[test]
    fn cs2(v in prop::collection::vec(0.0f64..1e6, 1..50)) {
        prop_assert!(cs2_holds(&v));
    }

    #[test]
    fn trace_round_trip(trace in arb_trace()) {
        let text = serialize(&trace);
        let back = parse_trace(&text).unwrap();
        prop_assert_eq!(back.events.len(), trace.events.len());
        prop_assert_eq!(serialize(&back), text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn togcom_keeps_bad_fraction_low(exp in 0i32..18, seed in 0u64..1000) {
        let trace = gnutella(150.0, seed);
        let cfg = SimConfig::new(Defense::ToGCom, trace.n_init, 150.0, seed);
        let res = run(&cfg, &trace, &AdversaryConfig::greedy(2f64.powi(exp))).unwrap();
        prop_assert_eq!(res.invariant_log.population_violations, 0);
        prop_assert!(res.invariant_log.max_bad_fraction < 1.0 / 6.0);
        prop_assert_eq!(res.invariant_log.budget_violations, 0);
    }

    #[test]
    fn ledger_rows_add_up(exp in 0i32..16, seed in 0u64..1000, d in 0usize..5) {
        let defense = [Defense::ToGCom, Defense::CCom, Defense::GMCom, Defense::Tgch, Defense::SybilControl][d];
        let trace = gnutella(120.0, seed);
        let cfg = SimConfig::new(defense, trace.n_init, 120.0, seed);
        let res = run(&cfg, &trace, &AdversaryConfig::greedy(2f64.powi(exp))).unwrap();
        let rows = res.rows();
        let alg: u64 = rows.iter().map(|r| r.alg_total() * r.repeat).sum::<u64>() + res.ledger.alg_periodic;
        let adv: u64 = rows.iter().map(|r| r.adv_total() * r.repeat).sum::<u64>() + res.ledger.adv_periodic;
        prop_assert_eq!(alg, res.ledger.algorithmic_total());
        prop_assert_eq!(adv, res.ledger.adversarial_total());
        prop_assert_eq!(adv, res.adversary.spent);
        prop_assert!(res.adversary.spent as f64 <= 2f64.powi(exp) * res.duration + 1e-6);
    }

    #[test]
    fn fast_forward_matches_event_by_event(exp in 4i32..14, seed in 0u64..1000) {
        let trace = gnutella(60.0, seed);
        let mut cfg = SimConfig::new(Defense::CCom, trace.n_init, 60.0, seed);
        let adv = AdversaryConfig::greedy(2f64.powi(exp));
        let fast = run(&cfg, &trace, &adv).unwrap();
        cfg.fast_forward = false;
        let slow = run(&cfg, &trace, &adv).unwrap();
        prop_assert_eq!(fast.ledger.algorithmic_total(), slow.ledger.algorithmic_total());
        prop_assert_eq!(fast.ledger.adversarial_total(), slow.ledger.adversarial_total());
        prop_assert_eq!(fast.ledger.iteration_count(), slow.ledger.iteration_count());
        prop_assert_eq!(fast.bad_joins, slow.bad_joins);
    }
}

#[test]
fn runs_are_deterministic() {
    let trace = gnutella(200.0, 5);
    for defense in [Defense::ToGCom, Defense::GMCom, Defense::TgchSf, Defense::SybilControl] {
        let cfg = SimConfig::new(defense, trace.n_init, 200.0, 11);
        let adv = AdversaryConfig::greedy(4096.0);
        assert_eq!(run(&cfg, &trace, &adv).unwrap(), run(&cfg, &trace, &adv).unwrap());
    }
}

#[test]
fn fast_forward_engages_for_flat_prices() {
    let trace = gnutella(60.0, 3);
    let cfg = SimConfig::new(Defense::CCom, trace.n_init, 60.0, 3);
    let res = run(&cfg, &trace, &AdversaryConfig::greedy(8192.0)).unwrap();
    assert!(res.fast_forwarded_iterations > 0);
}
