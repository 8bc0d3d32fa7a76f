use larc_core::fock::{Momentum, Position};
use larc_core::scenario::{Amplitudes, ExplicitModel, MomentumScenario, PinholeScenario, Scenario, Schedule, Timing};
use larc_core::stats::trajectory_rng;
use num_complex::Complex64;
use proptest::prelude::*;

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let rest: Vec<usize> = items.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, &x)| x).collect();
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

fn amplitudes() -> impl Strategy<Value = Amplitudes> {
    (0.05..1.5f64, 0.05..1.5f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(t, s, phi, chi)| Amplitudes {
        a1: Complex64::from_polar(t.cos(), phi),
        a2: Complex64::new(t.sin(), 0.0),
        b1: Complex64::from_polar(s.cos(), chi),
        b2: Complex64::new(s.sin(), 0.0),
    })
}

/// Every ordering of four arrivals gives the same localization odds.
#[test]
fn localization_is_independent_of_arrival_order() {
    let amplitudes = Amplitudes {
        a1: Complex64::from_polar(0.3f64.sqrt(), 1.0),
        a2: Complex64::new(0.7f64.sqrt(), 0.0),
        b1: Complex64::new(0.6, 0.0),
        b2: Complex64::from_polar(0.8, -0.5),
    };
    let orders = permutations(&[0, 1, 2, 3]);
    assert_eq!(orders.len(), 24);
    for order in orders {
        let mut times = [vec![0.0; 2], vec![0.0; 2]];
        for (rank, &slot) in order.iter().enumerate() {
            times[slot / 2][slot % 2] = rank as f64;
        }
        let mut timing = Timing::simultaneous(1.0, 1.0);
        timing.schedule = Schedule::Custom(times);
        let scenario = Scenario::Pinhole(PinholeScenario {
            amplitudes,
            n: 1,
            m1: 2,
            m2: 2,
            timing,
        });
        let outcomes = scenario.exact_outcomes().unwrap();
        let total: f64 = outcomes.values().sum();
        let x1: f64 = outcomes.iter().filter(|(o, _)| o.position == Position::X1).map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12, "order {order:?}");
        assert!((x1 - 0.3).abs() < 1e-12, "order {order:?}: P(x1) = {x1}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lazy_and_explicit_trajectories_agree(
        amplitudes in amplitudes(),
        n in 1..4u32,
        m1 in 1..4usize,
        m2 in 1..4usize,
        stagger in prop::option::of(0.1..5.0f64),
        seed in any::<u64>(),
    ) {
        let mut timing = Timing::simultaneous(0.4, 20.0);
        if let Some(window) = stagger {
            timing.schedule = Schedule::Stagger { window };
        }
        let scenario = Scenario::Pinhole(PinholeScenario { amplitudes, n, m1, m2, timing });
        let model = ExplicitModel::new(&scenario).unwrap();
        for index in 0..4 {
            let lazy = scenario.run_trajectory(&mut trajectory_rng(seed, index)).unwrap();
            let explicit = model.run_trajectory_observed(&mut trajectory_rng(seed, index), |_, _| {}).unwrap();
            prop_assert_eq!(lazy.final_position, explicit.final_position);
            prop_assert_eq!(lazy.reductions.len(), explicit.reductions.len());
            for (l, e) in lazy.reductions.iter().zip(&explicit.reductions) {
                prop_assert_eq!(l.larc, e.larc);
                prop_assert_eq!(l.outcome, e.outcome);
                prop_assert_eq!(l.time, e.time);
            }
        }
    }

    #[test]
    fn class_weights_sum_to_one(amplitudes in amplitudes(), n in 1..50u32, m in 1..40usize, seed in any::<u64>()) {
        let scenario = Scenario::Pinhole(PinholeScenario { amplitudes, n, m1: m, m2: m, timing: Timing::simultaneous(0.05, 30.0) });
        let (mut state, arrivals) = scenario.build().unwrap();
        for (_, site) in &arrivals {
            state.activate(*site).unwrap();
        }
        let mut rng = trajectory_rng(seed, 0);
        for _ in 0..10 {
            let pending = state.pending().to_vec();
            if pending.is_empty() {
                break;
            }
            for site in &pending {
                let w = state.class_weights(*site).unwrap();
                prop_assert!(w.iter().all(|x| *x >= 0.0));
                prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{:?}", w);
            }
            let site = pending[rand::Rng::random_range(&mut rng, 0..pending.len())];
            let w = state.class_weights(site).unwrap();
            let u: f64 = rand::Rng::random(&mut rng);
            let mut acc = 0.0;
            let chosen = (0..3).filter(|&c| w[c] > 0.0).find(|&c| {
                acc += w[c];
                u < acc
            });
            let chosen = chosen.unwrap_or_else(|| (0..3).rev().find(|&c| w[c] > 0.0).unwrap());
            let kind = larc_core::larc::OutcomeKind::ALL[chosen];
            state.reduce(site, kind).unwrap();
            let total = state.sector_weight(Position::X1) + state.sector_weight(Position::X2);
            prop_assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn momentum_exact_localization_matches_amplitudes(amplitudes in amplitudes(), n in 1..3u32, count in 1..4usize) {
        let scenario = Scenario::Momentum(MomentumScenario {
            amplitudes,
            n,
            p1: Momentum::new(3, 0),
            p2: Momentum::new(0, 3),
            molecules: vec![Momentum::ZERO; count],
            decompose: false,
            timing: Timing::simultaneous(1.0, 1.0),
        });
        let x1: f64 = scenario.exact_outcomes().unwrap().iter().filter(|(o, _)| o.position == Position::X1).map(|(_, p)| p).sum();
        prop_assert!((x1 - amplitudes.a1.norm_sqr()).abs() < 1e-10);
    }
}
