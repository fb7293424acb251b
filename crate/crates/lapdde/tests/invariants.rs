//! Property-based invariants: structural facts that must hold for every
//! signal the generators can produce, not just the curated suites.

use lapdde::diagnostics;
use lapdde::engine::{evolutionary_matrix, integrate_equation, SimulationConfig};
use lapdde::graph;
use lapdde::model::{EventSequence, NetworkSignal, Prehistory};
use lapdde::scenarios::random_signal;

use proptest::prelude::*;

fn arb_signal() -> impl Strategy<Value = NetworkSignal> {
    (any::<u64>(), 2usize..=5, prop_oneof![Just(0.0), Just(0.3)], 0.2f64..1.0).prop_map(
        |(seed, n, h_bar, density)| {
            random_signal(seed, n, 3, 1.0, 1.0, h_bar, density, false).unwrap()
        },
    )
}

fn arb_initial(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Equation trajectories never leave the interval spanned by the initial
    /// data (prehistory = initial point): the flow only averages.
    #[test]
    fn trajectories_stay_in_initial_hull(
        (signal, initial) in arb_signal().prop_flat_map(|s| {
            let n = s.n();
            (Just(s), arb_initial(n))
        })
    ) {
        let lo = initial.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = initial.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let config = SimulationConfig::new(0.0, 3.0, 0.02, initial.clone())
            .with_prehistory(Prehistory::Constant(initial));
        let history = integrate_equation(&signal, &config).unwrap();
        for k in 0..history.len() {
            for &v in history.sample(k) {
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9,
                    "value {v} escapes [{lo}, {hi}] at sample {k}");
            }
        }
    }

    /// Equal initial values are a fixed point of the unforced flow.
    #[test]
    fn consensus_states_are_invariant(signal in arb_signal(), c in -2.0f64..2.0) {
        let n = signal.n();
        let config = SimulationConfig::new(0.0, 3.0, 0.02, vec![c; n])
            .with_prehistory(Prehistory::Constant(vec![c; n]));
        let history = integrate_equation(&signal, &config).unwrap();
        for k in 0..history.len() {
            for &v in history.sample(k) {
                prop_assert!((v - c).abs() < 1e-9);
            }
        }
    }

    /// Every sampled evolutionary matrix is (numerically) substochastic.
    #[test]
    fn evolutionary_matrices_substochastic(signal in arb_signal()) {
        let u = evolutionary_matrix(&signal, 0.0, 2.0, 0.02).unwrap();
        let n = signal.n();
        for k in 0..u.len() {
            for i in 0..n {
                let mut row = 0.0;
                for j in 0..n {
                    let e = u.sample(k).get(i, j);
                    prop_assert!(e >= -1e-9, "negative entry {e}");
                    row += e;
                }
                prop_assert!(row <= 1.0 + 1e-9, "row sum {row} > 1");
            }
        }
    }

    /// Ordered curves are sorted and bracketed by the window extrema.
    #[test]
    fn ordered_curves_within_window_extrema(
        (signal, initial) in arb_signal().prop_flat_map(|s| {
            let n = s.n();
            (Just(s), arb_initial(n))
        })
    ) {
        let config = SimulationConfig::new(0.0, 3.0, 0.02, initial.clone())
            .with_prehistory(Prehistory::Constant(initial));
        let history = integrate_equation(&signal, &config).unwrap();
        let (lambda, big_lambda) = diagnostics::window_extrema(&history, signal.h_bar()).unwrap();
        let ordered = diagnostics::ordered_components(&history);
        let n = history.n();
        for k in 0..history.len() {
            let z = &ordered.z[k];
            for r in 1..n {
                prop_assert!(z[r - 1] <= z[r] + 1e-15);
            }
            prop_assert!(lambda[k] <= z[0] + 1e-12, "lambda above smallest component");
            prop_assert!(big_lambda[k] >= z[n - 1] - 1e-12, "Lambda below largest component");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Weight integrals add over adjacent intervals.
    #[test]
    fn interval_integral_additive(
        signal in arb_signal(),
        a in 0.0f64..1.0,
        len1 in 0.1f64..1.0,
        len2 in 0.1f64..1.0,
    ) {
        let b = (a + len1).min(3.0);
        let c = (b + len2).min(3.0);
        let whole = graph::interval_integral(&signal, 0, 1, a, c).unwrap();
        let split = graph::interval_integral(&signal, 0, 1, a, b).unwrap()
            + graph::interval_integral(&signal, 0, 1, b, c).unwrap();
        prop_assert!((whole - split).abs() < 1e-12);
    }

    /// Raising the threshold can only remove arcs.
    #[test]
    fn thresholded_graph_antitone_in_epsilon(
        signal in arb_signal(),
        eps_lo in 1e-3f64..0.5,
        factor in 1.0f64..5.0,
    ) {
        let lo = graph::thresholded_graph(&signal, 0.0, 3.0, eps_lo).unwrap();
        let hi = graph::thresholded_graph(&signal, 0.0, 3.0, eps_lo * factor).unwrap();
        for (j, i) in hi.arcs() {
            prop_assert!(lo.has_arc(j, i), "arc ({j},{i}) appeared at the larger threshold");
        }
    }

    /// Uniform event sequences tile the horizon without gaps.
    #[test]
    fn uniform_events_tile_horizon(period in 0.1f64..2.0, horizon in 2.0f64..20.0) {
        let events = EventSequence::uniform(period, horizon).unwrap();
        let times = events.times();
        prop_assert_eq!(times[0], 0.0);
        prop_assert!(*times.last().unwrap() >= horizon - 1e-9);
        for w in times.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(w[1] - w[0] <= period + 1e-9);
        }
    }
}
