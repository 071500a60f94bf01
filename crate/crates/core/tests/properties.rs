//! Randomised invariants.

use betaproc_core::bep::{bep_matrix, count_stats};
use betaproc_core::bp::stick_break;
use betaproc_core::powerlaw::{chernoff_tail, fit_power_law, FitRange};
use betaproc_core::stats::special::beta_cdf;
use betaproc_core::{BPParams, FeatureMatrix, RandomStream};
use proptest::prelude::*;

fn params() -> impl Strategy<Value = BPParams> {
    (0.1f64..5.0, 0.1f64..5.0, 0.0f64..0.9).prop_map(|(g, t, a)| BPParams::new(g, t, a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_are_probabilities_in_round_order(p in params(), rounds in 1usize..40, seed in any::<u64>()) {
        let d = stick_break(&p, rounds, &mut RandomStream::new(seed, 0)).unwrap();
        prop_assert_eq!(d.weights.len(), d.log_weights.len());
        prop_assert!(d.rounds.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(d.rounds.iter().all(|&r| r >= 1 && r as usize <= rounds));
        for (w, lw) in d.weights.iter().zip(&d.log_weights) {
            prop_assert!(*w >= 0.0 && *w < 1.0);
            prop_assert!((w - lw.exp()).abs() <= 1e-12);
        }
        let ranked = d.ranked_weights();
        prop_assert!(ranked.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn count_identities(p in params(), n in 1usize..60, seed in any::<u64>()) {
        let mut s = RandomStream::new(seed, 1);
        let d = stick_break(&p, 30, &mut s).unwrap();
        let z = bep_matrix(&d, n, &mut s);
        let st = count_stats(&z);
        prop_assert_eq!(st.k_prefix.len(), n);
        prop_assert!(st.k_prefix.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*st.k_prefix.last().unwrap(), z.n_cols());
        let by_column: usize = st.k_hist.iter().map(|(j, c)| j * c).sum();
        prop_assert_eq!(by_column, st.row_counts.iter().sum::<usize>());
        prop_assert_eq!(st.k_hist.values().sum::<usize>(), z.n_cols());
        prop_assert!(z.column_counts().iter().all(|&m| m >= 1));
    }

    #[test]
    fn matrix_round_trips(rows in prop::collection::vec(prop::collection::vec(0u8..2, 4), 1..10)) {
        let z = FeatureMatrix::from_rows(&rows).unwrap();
        for (r, row) in rows.iter().enumerate() {
            prop_assert_eq!(z.row(r), row.as_slice());
        }
        for c in 0..4 {
            prop_assert_eq!(z.column_counts()[c], rows.iter().filter(|r| r[c] == 1).count());
        }
    }

    #[test]
    fn exact_power_laws_are_recovered(c in 0.01f64..100.0, a in -2.0f64..2.0, n in 3usize..50) {
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 * 1.7).collect();
        let ys: Vec<f64> = xs.iter().map(|x| c * x.powf(a)).collect();
        let fit = fit_power_law(&xs, &ys, FitRange::All).unwrap();
        prop_assert!((fit.a - a).abs() < 1e-9);
        prop_assert!((fit.c / c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn chernoff_tail_is_a_decreasing_probability_bound(q in 0.1f64..20.0, step in 0.01f64..10.0) {
        let m = q + step;
        let b = chernoff_tail(q, m).unwrap();
        prop_assert!(b > 0.0 && b <= 1.0);
        prop_assert!(chernoff_tail(q, m + 1.0).unwrap() <= b);
    }

    #[test]
    fn beta_cdf_is_monotone(a in 0.05f64..10.0, b in 0.05f64..10.0, x in 0.0f64..1.0, dx in 0.0f64..0.5) {
        let lo = beta_cdf(a, b, x);
        let hi = beta_cdf(a, b, (x + dx).min(1.0));
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo - 1e-14);
    }

    #[test]
    fn streams_replay_exactly(seed in any::<u64>(), id in any::<u64>()) {
        let mut a = RandomStream::new(seed, id);
        let mut b = RandomStream::new(seed, id);
        for _ in 0..16 {
            prop_assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }
}
