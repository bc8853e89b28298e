//! Additive Holt-Winters (triple exponential smoothing).
//!
//! ```text
//! L(t) = α (y(t) − S(t−T)) + (1 − α)(L(t−1) + P(t−1))
//! P(t) = β (L(t) − L(t−1)) + (1 − β) P(t−1)
//! S(t) = γ (y(t) − L(t)) + (1 − γ) S(t−T)
//! ŷ(t+h) = L(t) + h·P(t) + S(t+h−T)
//! ```
//!
//! The state is initialised from the first two seasons of history and then
//! advanced one observation at a time with [`hw_step`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::series::SLOTS_PER_DAY;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub period: usize,
}

impl HwParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, period: usize) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            gamma,
            period,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hw.alpha", self.alpha),
            ("hw.beta", self.beta),
            ("hw.gamma", self.gamma),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(name, format!("{v} is outside (0, 1)")));
            }
        }
        if self.period < 2 {
            return Err(Error::config("hw.period", "must be at least 2"));
        }
        Ok(())
    }
}

/// Level, trend and one seasonal term per phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwState {
    pub level: f64,
    pub trend: f64,
    /// `season[p]` is the most recent seasonal term at a time `≡ p (mod T)`.
    pub season: Vec<f64>,
    /// Index of the next observation.
    pub t: usize,
}

impl HwState {
    /// One-step-ahead prediction of the next observation.
    pub fn one_step(&self) -> f64 {
        self.level + self.trend + self.season[self.t % self.season.len()]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-season initialisation: level is the first season's mean, trend the
/// difference of the first two season means divided by `T`, and the seasonal
/// terms the first season's deviations from its mean. The returned state has
/// consumed the first season (`t = T`).
pub fn hw_init(history: &[f64], params: &HwParams) -> Result<HwState> {
    params.validate()?;
    let period = params.period;
    if history.len() < 2 * period {
        return Err(Error::history(
            "samples for two-season initialisation",
            2 * period,
            history.len(),
        ));
    }
    let first = mean(&history[..period]);
    let second = mean(&history[period..2 * period]);
    Ok(HwState {
        level: first,
        trend: (second - first) / period as f64,
        season: history[..period].iter().map(|y| y - first).collect(),
        t: period,
    })
}

/// Applies the three smoothing recursions for one observation.
pub fn hw_step(state: &HwState, params: &HwParams, y: f64) -> Result<HwState> {
    if !y.is_finite() {
        return Err(Error::Input(format!("observation {y} is not finite")));
    }
    let mut next = state.clone();
    step_in_place(&mut next, params, y);
    Ok(next)
}

fn step_in_place(state: &mut HwState, params: &HwParams, y: f64) {
    let phase = state.t % state.season.len();
    let prev_season = state.season[phase];
    let level = params.alpha * (y - prev_season)
        + (1.0 - params.alpha) * (state.level + state.trend);
    let trend = params.beta * (level - state.level) + (1.0 - params.beta) * state.trend;
    state.season[phase] = params.gamma * (y - level) + (1.0 - params.gamma) * prev_season;
    state.level = level;
    state.trend = trend;
    state.t += 1;
}

/// Closed-form `k`-step forecast `L + h·P + S(t+h−T)`, `h = 1..=k`.
pub fn hw_forecast(state: &HwState, k: usize) -> Result<Vec<f64>> {
    if k < 1 {
        return Err(Error::Range {
            what: "horizon",
            value: k,
            min: 1,
            max: usize::MAX,
        });
    }
    let period = state.season.len();
    Ok((1..=k)
        .map(|h| {
            state.level + h as f64 * state.trend + state.season[(state.t - 1 + h) % period]
        })
        .collect())
}

/// Initialises on `history` and steps through the remaining observations.
/// Returns the final state and the in-sample one-step squared error.
pub fn hw_filter(history: &[f64], params: &HwParams) -> Result<(HwState, f64)> {
    let mut state = hw_init(history, params)?;
    let mut sse = 0.0;
    for &y in &history[params.period..] {
        if !y.is_finite() {
            return Err(Error::Input(format!("observation {y} is not finite")));
        }
        let e = y - state.one_step();
        sse += e * e;
        step_in_place(&mut state, params, y);
    }
    Ok((state, sse))
}

fn filter_sse(history: &[f64], alpha: f64, beta: f64, gamma: f64, period: usize) -> f64 {
    let params = HwParams {
        alpha,
        beta,
        gamma,
        period,
    };
    match hw_filter(history, &params) {
        Ok((_, sse)) if sse.is_finite() => sse,
        _ => f64::INFINITY,
    }
}

/// Search settings for [`hw_fit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HwFitConfig {
    pub period: usize,
    pub grid_step: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HwFitConfig {
    fn default() -> Self {
        Self {
            period: SLOTS_PER_DAY,
            grid_step: 0.05,
            max_iter: 200,
            tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwFit {
    pub params: HwParams,
    pub sse: f64,
}

/// Chooses (α, β, γ) minimising the in-sample one-step squared error: a
/// coarse grid, ties broken by the smallest α, then β, then γ, followed by a
/// Nelder–Mead refinement that is kept only if it strictly improves.
pub fn hw_fit(history: &[f64], config: &HwFitConfig) -> Result<HwFit> {
    let period = config.period;
    if period < 2 {
        return Err(Error::config("hw.period", "must be at least 2"));
    }
    if history.len() < 3 * period {
        return Err(Error::history(
            "samples for fitting (three seasons)",
            3 * period,
            history.len(),
        ));
    }
    if let Some(y) = history.iter().find(|y| !y.is_finite()) {
        return Err(Error::Input(format!("observation {y} is not finite")));
    }
    let steps = (1.0 / config.grid_step).round() as usize;
    let grid: Vec<f64> = (1..steps).map(|k| k as f64 * config.grid_step).collect();
    let mut points = Vec::with_capacity(grid.len().pow(3));
    for &a in &grid {
        for &b in &grid {
            for &g in &grid {
                points.push((a, b, g));
            }
        }
    }
    let scores: Vec<f64> = points
        .par_iter()
        .map(|&(a, b, g)| filter_sse(history, a, b, g, period))
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s < scores[best] {
            best = i;
        }
    }
    let (a, b, g) = points[best];
    let mut fit = HwFit {
        params: HwParams::new(a, b, g, period)?,
        sse: scores[best],
    };

    let opts = NelderMeadOptions {
        max_iter: config.max_iter,
        tol: config.tol,
        initial_step: config.grid_step / 2.0,
    };
    let refined = nelder_mead(
        |x| {
            if x.iter().all(|v| *v > 0.0 && *v < 1.0) {
                filter_sse(history, x[0], x[1], x[2], period)
            } else {
                f64::INFINITY
            }
        },
        &[a, b, g],
        &opts,
    );
    if refined.value < fit.sse {
        fit = HwFit {
            params: HwParams::new(refined.x[0], refined.x[1], refined.x[2], period)?,
            sse: refined.value,
        };
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn half() -> HwParams {
        HwParams::new(0.5, 0.5, 0.5, 4).unwrap()
    }

    #[test]
    fn params_validated() {
        assert!(HwParams::new(0.0, 0.5, 0.5, 96).is_err());
        assert!(HwParams::new(0.5, 1.0, 0.5, 96).is_err());
        assert!(HwParams::new(0.5, 0.5, 0.5, 1).is_err());
    }

    #[test]
    fn init_constant() {
        let s = hw_init(&[3.0; 8], &half()).unwrap();
        assert_eq!((s.level, s.trend), (3.0, 0.0));
        assert!(s.season.iter().all(|&v| v == 0.0));
        assert_eq!(s.t, 4);
    }

    #[test]
    fn init_planted_seasonal() {
        let pattern = [1.0, -2.0, 0.5, 0.5];
        let h: Vec<f64> = (0..12).map(|i| 7.0 + pattern[i % 4]).collect();
        let s = hw_init(&h, &half()).unwrap();
        assert_eq!(s.level, 7.0);
        assert_eq!(s.trend, 0.0);
        assert_eq!(s.season, pattern.to_vec());
    }

    #[test]
    fn init_linear_slope() {
        let m = 0.37;
        let p = HwParams::new(0.5, 0.5, 0.5, 96).unwrap();
        let h: Vec<f64> = (0..192).map(|i| 2.0 + m * i as f64).collect();
        let s = hw_init(&h, &p).unwrap();
        assert!((s.trend - m).abs() < 1e-9);
    }

    #[test]
    fn init_needs_two_seasons() {
        assert!(matches!(
            hw_init(&[1.0; 7], &half()),
            Err(Error::History { .. })
        ));
    }

    #[test]
    fn step_fixed_point() {
        let s = HwState {
            level: 2.5,
            trend: 0.0,
            season: vec![0.0; 4],
            t: 4,
        };
        let n = hw_step(&s, &half(), 2.5).unwrap();
        assert_eq!((n.level, n.trend), (2.5, 0.0));
        assert!(n.season.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_hand_evaluated() {
        let s = HwState {
            level: 1.0,
            trend: 0.0,
            season: vec![0.0; 4],
            t: 4,
        };
        let n = hw_step(&s, &half(), 3.0).unwrap();
        assert_eq!(n.level, 2.0);
        assert_eq!(n.trend, 0.5);
        assert_eq!(n.season[0], 0.5);
        assert_eq!(n.t, 5);
    }

    #[test]
    fn step_rejects_nan() {
        let s = hw_init(&[1.0; 8], &half()).unwrap();
        assert!(matches!(hw_step(&s, &half(), f64::NAN), Err(Error::Input(_))));
    }

    #[test]
    fn forecast_flat_and_trend() {
        let flat = HwState {
            level: 4.0,
            trend: 0.0,
            season: vec![0.0; 96],
            t: 96,
        };
        assert!(hw_forecast(&flat, 96).unwrap().iter().all(|&v| v == 4.0));
        let ramp = HwState {
            level: 0.0,
            trend: 1.0,
            season: vec![0.0; 96],
            t: 500,
        };
        let f = hw_forecast(&ramp, 96).unwrap();
        assert!(f.iter().enumerate().all(|(h, &v)| v == (h + 1) as f64));
        assert!(matches!(hw_forecast(&ramp, 0), Err(Error::Range { .. })));
    }

    #[test]
    fn forecast_wraps_season() {
        let s = HwState {
            level: 0.0,
            trend: 0.0,
            season: vec![10.0, 20.0, 30.0],
            t: 5,
        };
        // last observed t = 4 (phase 1); next phases 2, 0, 1, 2, ...
        assert_eq!(hw_forecast(&s, 5).unwrap(), vec![30.0, 10.0, 20.0, 30.0, 10.0]);
    }

    #[test]
    fn zero_innovation_step_preserves_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let state = HwState {
            level: 3.0,
            trend: 0.01,
            season: (0..24).map(|_| rng.random_range(-1.0..1.0)).collect(),
            t: 50,
        };
        let p = HwParams::new(0.3, 0.2, 0.4, 24).unwrap();
        let before = hw_forecast(&state, 48).unwrap();
        let next = hw_step(&state, &p, state.one_step()).unwrap();
        let after = hw_forecast(&next, 47).unwrap();
        for (a, b) in after.iter().zip(&before[1..]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((next.level - (state.level + state.trend)).abs() < 1e-15);
        assert!((next.trend - state.trend).abs() < 1e-15);
    }

    #[test]
    fn forecast_is_linear_in_state() {
        let s = HwState {
            level: 1.25,
            trend: -0.5,
            season: vec![0.25, 1.5, -3.0, 2.0],
            t: 9,
        };
        let doubled = HwState {
            level: 2.0 * s.level,
            trend: 2.0 * s.trend,
            season: s.season.iter().map(|v| 2.0 * v).collect(),
            t: s.t,
        };
        let a = hw_forecast(&s, 10).unwrap();
        let b = hw_forecast(&doubled, 10).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| 2.0 * x == *y));
    }

    #[test]
    fn seasonal_mean_drift_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = HwParams::new(0.2, 0.05, 0.01, 24).unwrap();
        let first: Vec<f64> = (0..48).map(|_| rng.random_range(0.0..2.0)).collect();
        let mut s = hw_init(&first, &p).unwrap();
        let max_y = 2.0;
        for step in 1..=1000 {
            s = hw_step(&s, &p, rng.random_range(0.0..max_y)).unwrap();
            let m = s.season.iter().sum::<f64>() / 24.0;
            assert!(m.abs() < p.gamma * max_y * (step as f64 + 24.0));
        }
    }

    #[test]
    fn planted_seasonal_forecast_exact() {
        let pattern: Vec<f64> = (0..96)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 96.0).sin())
            .collect();
        let h: Vec<f64> = (0..96 * 10).map(|i| 5.0 + pattern[i % 96]).collect();
        let p = HwParams::new(0.3, 0.1, 0.2, 96).unwrap();
        let (state, _) = hw_filter(&h, &p).unwrap();
        let f = hw_forecast(&state, 96).unwrap();
        let rmse = (f
            .iter()
            .zip(&pattern)
            .map(|(a, s)| (a - 5.0 - s).powi(2))
            .sum::<f64>()
            / 96.0)
            .sqrt();
        assert!(rmse < 1e-6, "rmse {rmse}");
    }

    #[test]
    fn fit_constant_series_tie_break() {
        let h = vec![2.0; 96 * 3];
        let fit = hw_fit(&h, &HwFitConfig::default()).unwrap();
        assert_eq!(
            (fit.params.alpha, fit.params.beta, fit.params.gamma),
            (0.05, 0.05, 0.05)
        );
        assert_eq!(fit.sse, 0.0);
    }

    fn simulate(alpha: f64, beta: f64, gamma: f64, period: usize, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let p = HwParams::new(alpha, beta, gamma, period).unwrap();
        let mut state = HwState {
            level: 50.0,
            trend: 0.0,
            season: (0..period)
                .map(|i| 10.0 * (2.0 * std::f64::consts::PI * i as f64 / period as f64).sin())
                .collect(),
            t: period,
        };
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let y = state.one_step() + noise.sample(&mut rng);
            out.push(y);
            state = hw_step(&state, &p, y).unwrap();
        }
        out
    }

    #[test]
    fn fit_recovers_planted_parameters() {
        let h = simulate(0.4, 0.1, 0.3, 12, 3000, 5);
        let cfg = HwFitConfig {
            period: 12,
            ..HwFitConfig::default()
        };
        let fit = hw_fit(&h, &cfg).unwrap();
        let p = fit.params;
        assert!((p.alpha - 0.4).abs() < 0.1, "{p:?}");
        assert!((p.beta - 0.1).abs() < 0.1, "{p:?}");
        assert!((p.gamma - 0.3).abs() < 0.1, "{p:?}");
    }

    #[test]
    fn fit_deterministic() {
        let h = simulate(0.4, 0.1, 0.3, 8, 400, 9);
        let cfg = HwFitConfig {
            period: 8,
            ..HwFitConfig::default()
        };
        assert_eq!(hw_fit(&h, &cfg).unwrap(), hw_fit(&h, &cfg).unwrap());
    }

    #[test]
    fn fit_needs_three_seasons() {
        assert!(matches!(
            hw_fit(&[1.0; 200], &HwFitConfig::default()),
            Err(Error::History { .. })
        ));
    }
}
