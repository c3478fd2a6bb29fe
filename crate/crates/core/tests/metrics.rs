mod common;

use common::{brute_gini, normal_equations_ols, rng, sliced_means};
use datamarket::metrics::{gini, ols, series_20, success_rate, window_means};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn gini_matches_pairwise_oracle() {
    for seed in 0..100 {
        let mut r = rng(seed);
        let n = r.random_range(1..200);
        let xs: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 1000.0).collect();
        assert!((gini(&xs) - brute_gini(&xs)).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn ols_matches_normal_equations() {
    for seed in 0..100 {
        let mut r = rng(seed + 500);
        let n = r.random_range(3..300);
        let slope_true = r.random_range(-50.0..50.0);
        let points: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let x: f64 = r.random();
                (x, 70.0 + slope_true * x + r.random_range(-5.0..5.0))
            })
            .collect();
        let (s, i) = ols(&points).unwrap();
        let (so, io) = normal_equations_ols(&points);
        assert!((s - so).abs() < 1e-9 && (i - io).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn windows_match_slicing_oracle() {
    for seed in 0..100 {
        let mut r = rng(seed + 900);
        let n = r.random_range(0..300);
        let xs: Vec<f64> = (0..n).map(|_| r.random_range(-100.0..100.0)).collect();
        let got = series_20(&xs);
        let want = sliced_means(&xs, 20);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "seed {seed}");
        }
    }
}

#[test]
fn success_rate_saturates_at_one() {
    assert_eq!(success_rate::<f64>(2000 * 120, 2000, 120), 1.0);
}

proptest! {
    #[test]
    fn gini_is_scale_invariant(xs in prop::collection::vec(0.0f64..1e4, 1..60), c in 1e-3f64..1e3) {
        let scaled: Vec<f64> = xs.iter().map(|x| c * x).collect();
        prop_assert!((gini(&xs) - gini(&scaled)).abs() < 1e-9);
        let g = gini(&xs);
        prop_assert!((0.0..=1.0).contains(&g));
    }

    #[test]
    fn price_shift_moves_only_intercept(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..200.0), 2..50),
        shift in -50.0f64..50.0,
    ) {
        let fit = ols(&pts);
        prop_assume!(fit.is_some());
        let (s, i) = fit.unwrap();
        let moved: Vec<_> = pts.iter().map(|&(x, y)| (x, y + shift)).collect();
        let (s2, i2) = ols(&moved).unwrap();
        prop_assert!((s - s2).abs() < 1e-6 * (1.0 + s.abs()));
        prop_assert!((i2 - i - shift).abs() < 1e-6 * (1.0 + i.abs()));
    }

    #[test]
    fn window_count(n in 0usize..500, w in 1usize..40) {
        prop_assert_eq!(window_means(&vec![1.0; n], w).len(), n.div_ceil(w));
    }
}
