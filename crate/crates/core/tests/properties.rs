use std::collections::BTreeSet;

use dayahead::gam::{fit_gam, forecast_gam, GamConfig};
use dayahead::neural::{mlp_forward, Activation, MlpParams};
use dayahead::persistence::{forecast_n_days, forecast_n_same_days};
use dayahead::regression::{build_spr_features, fit_spr, forecast_spr, SprWindowConfig, DEFAULT_RIDGE};
use dayahead::series::{Calendar, LoadSeries};
use dayahead::synth::{generate, SynthConfig};
use dayahead::SLOTS_PER_DAY;
use proptest::prelude::*;

fn series(days: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..100.0f64, days * SLOTS_PER_DAY)
}

fn both(h: &LoadSeries, n: usize, d: usize) -> (Vec<f64>, Vec<f64>) {
    (
        forecast_n_same_days(h, n, d).unwrap().values,
        forecast_n_days(h, n, d).unwrap().values,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persistence_is_linear(x in series(22), y in series(22), a in 0.0..3.0f64, n in 1usize..=3) {
        let d = 21;
        let z: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + q).collect();
        let (xs, xd) = both(&LoadSeries::from_values(x).unwrap(), n, d);
        let (ys, yd) = both(&LoadSeries::from_values(y).unwrap(), n, d);
        let (zs, zd) = both(&LoadSeries::from_values(z).unwrap(), n, d);
        for t in 0..SLOTS_PER_DAY {
            prop_assert!((zs[t] - (a * xs[t] + ys[t])).abs() < 1e-9);
            prop_assert!((zd[t] - (a * xd[t] + yd[t])).abs() < 1e-9);
        }
    }

    #[test]
    fn persistence_commutes_with_day_shift(x in series(30), n in 1usize..=3, shift in 1usize..=8) {
        let h = LoadSeries::from_values(x.clone()).unwrap();
        let shifted = LoadSeries::from_values(x[shift * SLOTS_PER_DAY..].to_vec()).unwrap();
        let d = 29;
        prop_assert_eq!(both(&h, n, d), both(&shifted, n, d - shift));
    }

    #[test]
    fn persistence_of_constant_is_constant(c in 0.0..100.0f64, n in 1usize..=3) {
        let h = LoadSeries::from_values(vec![c; 25 * SLOTS_PER_DAY]).unwrap();
        let (s, d) = both(&h, n, 24);
        prop_assert!(s.iter().chain(&d).all(|v| (v - c).abs() < 1e-12));
    }
}

fn max_step(v: &[f64]) -> f64 {
    v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max)
}

/// Default synth fixture (seed 2016) and default GAM configuration.
#[test]
fn gam_day_is_smoother_than_average_day() {
    let h = generate(&SynthConfig {
        n_days: 28,
        ..SynthConfig::default()
    })
    .unwrap()
    .community();
    let cfg = GamConfig::default();
    let params = fit_gam(&h, &cfg, 0..28).unwrap();
    let gam = forecast_gam(&params, &cfg, 28).unwrap().values;
    let avg: Vec<f64> = (0..SLOTS_PER_DAY)
        .map(|t| (0..28).map(|d| h.values()[d * SLOTS_PER_DAY + t]).sum::<f64>() / 28.0)
        .collect();
    assert!(max_step(&gam) <= max_step(&avg), "gam {} avg {}", max_step(&gam), max_step(&avg));
}

#[test]
fn linear_single_layer_network_is_spr() {
    let g = generate(&SynthConfig {
        n_days: 50,
        ..SynthConfig::default()
    })
    .unwrap();
    let h = g.community();
    let cal = Calendar::for_series(&h, BTreeSet::new());
    let windows = SprWindowConfig::default();
    let spr = fit_spr(&h, &cal, &windows, 35, DEFAULT_RIDGE).unwrap();
    let mut net = MlpParams::zeros(&[spr.weights.len(), 1], Activation::Identity).unwrap();
    net.weights[0] = spr.weights.to_vec();
    for d in [40, 45, 49] {
        let expected = forecast_spr(&spr, &h, &cal, d).unwrap().values;
        for (t, e) in expected.iter().enumerate() {
            let f = build_spr_features(&h, &cal, d, t, &windows, &spr.thresholds).unwrap();
            assert_eq!(mlp_forward(&net, &f).unwrap(), *e, "day {d} slot {t}");
        }
    }
}
