//! Seasonal ARIMA `(p,d,q)(P,D,Q)S` estimated by conditional sum of squares.
//!
//! After differencing, the series `w` minus its intercept `μ` follows
//!
//! ```text
//! φ(B) Φ(B^S) (w(t) − μ) = θ(B) Θ(B^S) e(t)
//! φ(B) = 1 − Σ φ_i B^i     Φ(B^S) = 1 − Σ Φ_j B^{jS}
//! θ(B) = 1 + Σ θ_i B^i     Θ(B^S) = 1 + Σ Θ_j B^{jS}
//! ```
//!
//! Residuals are computed from `t₀ = p + P·S` onward with earlier residuals
//! set to zero; the objective is `Σ_{t ≥ t₀} e(t)²` and AIC uses the
//! Gaussian approximation `n·ln(CSS/n) + 2k`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};

/// Orders `(p,d,q)(P,D,Q)S`, written in that form by `Display`/`FromStr`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SarimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub sp: usize,
    pub sd: usize,
    pub sq: usize,
    pub s: usize,
}

impl SarimaOrder {
    pub fn new(p: usize, d: usize, q: usize, sp: usize, sd: usize, sq: usize, s: usize) -> Result<Self> {
        let o = Self {
            p,
            d,
            q,
            sp,
            sd,
            sq,
            s,
        };
        o.validate()?;
        Ok(o)
    }

    /// Non-seasonal `(p,d,q)` with a dummy season length.
    pub fn arima(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            sp: 0,
            sd: 0,
            sq: 0,
            s: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return Err(Error::config("sarima.order", "season length S must be at least 2"));
        }
        if self.p + self.q + self.sp + self.sq + self.d + self.sd == 0 {
            return Err(Error::config("sarima.order", "the order has no terms"));
        }
        Ok(())
    }

    /// Number of ARMA coefficients.
    pub fn n_coefficients(&self) -> usize {
        self.p + self.q + self.sp + self.sq
    }

    /// Samples lost to differencing.
    pub fn diff_loss(&self) -> usize {
        self.d + self.sd * self.s
    }

    /// Largest autoregressive lag of the expanded polynomial.
    pub fn max_ar_lag(&self) -> usize {
        self.p + self.sp * self.s
    }
}

impl fmt::Display for SarimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{},{})({},{},{}){}",
            self.p, self.d, self.q, self.sp, self.sd, self.sq, self.s
        )
    }
}

impl FromStr for SarimaOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("sarima.order", format!("`{s}` is not of the form (p,d,q)(P,D,Q)S"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let rest = compact.strip_prefix('(').ok_or_else(bad)?;
        let (first, rest) = rest.split_once(")(").ok_or_else(bad)?;
        let (second, season) = rest.split_once(')').ok_or_else(bad)?;
        let triple = |part: &str| -> Result<[usize; 3]> {
            let v: Vec<usize> = part
                .split(',')
                .map(|x| x.parse().map_err(|_| bad()))
                .collect::<Result<_>>()?;
            v.try_into().map_err(|_| bad())
        };
        let [p, d, q] = triple(first)?;
        let [sp, sd, sq] = triple(second)?;
        let s = season.parse().map_err(|_| bad())?;
        SarimaOrder::new(p, d, q, sp, sd, sq, s)
    }
}

impl TryFrom<String> for SarimaOrder {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SarimaOrder> for String {
    fn from(o: SarimaOrder) -> String {
        o.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SarimaParams {
    pub order: SarimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    pub intercept: f64,
    pub sigma2: f64,
}

impl SarimaParams {
    /// All coefficients zero, unit innovation variance.
    pub fn zeros(order: SarimaOrder) -> Self {
        Self {
            order,
            ar: vec![0.0; order.p],
            ma: vec![0.0; order.q],
            sar: vec![0.0; order.sp],
            sma: vec![0.0; order.sq],
            intercept: 0.0,
            sigma2: 1.0,
        }
    }

    fn to_vector(&self, with_intercept: bool) -> Vec<f64> {
        let mut v: Vec<f64> = [&self.ar, &self.ma, &self.sar, &self.sma]
            .into_iter()
            .flatten()
            .copied()
            .collect();
        if with_intercept {
            v.push(self.intercept);
        }
        v
    }

    fn from_vector(order: SarimaOrder, v: &[f64], intercept: Option<f64>) -> Self {
        let (ar, rest) = v.split_at(order.p);
        let (ma, rest) = rest.split_at(order.q);
        let (sar, rest) = rest.split_at(order.sp);
        let (sma, rest) = rest.split_at(order.sq);
        Self {
            order,
            ar: ar.to_vec(),
            ma: ma.to_vec(),
            sar: sar.to_vec(),
            sma: sma.to_vec(),
            intercept: intercept.unwrap_or_else(|| rest.first().copied().unwrap_or(0.0)),
            sigma2: 1.0,
        }
    }

    /// Expanded lag polynomials as `(lag, coefficient)` lists:
    /// `w(t) = Σ ar·w(t−lag) + e(t) + Σ ma·e(t−lag)`.
    fn expanded(&self) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
        let s = self.order.s;
        let mut ar: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, phi) in self.ar.iter().enumerate() {
            *ar.entry(i + 1).or_default() += phi;
        }
        for (j, big_phi) in self.sar.iter().enumerate() {
            *ar.entry((j + 1) * s).or_default() += big_phi;
            for (i, phi) in self.ar.iter().enumerate() {
                *ar.entry(i + 1 + (j + 1) * s).or_default() -= phi * big_phi;
            }
        }
        let mut ma: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, theta) in self.ma.iter().enumerate() {
            *ma.entry(i + 1).or_default() += theta;
        }
        for (j, big_theta) in self.sma.iter().enumerate() {
            *ma.entry((j + 1) * s).or_default() += big_theta;
            for (i, theta) in self.ma.iter().enumerate() {
                *ma.entry(i + 1 + (j + 1) * s).or_default() += theta * big_theta;
            }
        }
        (ar.into_iter().collect(), ma.into_iter().collect())
    }
}

/// Applies `(1−B^S)^D` then `(1−B)^d`.
pub fn difference(series: &[f64], d: usize, sd: usize, s: usize) -> Result<Vec<f64>> {
    let loss = d + sd * s;
    if series.len() <= loss {
        return Err(Error::Length(format!(
            "differencing needs more than {loss} samples, got {}",
            series.len()
        )));
    }
    let mut out = series.to_vec();
    for _ in 0..sd {
        out = (s..out.len()).map(|t| out[t] - out[t - s]).collect();
    }
    for _ in 0..d {
        out = (1..out.len()).map(|t| out[t] - out[t - 1]).collect();
    }
    Ok(out)
}

/// Integrates forecasts of the differenced series back to the original scale
/// using the last `d + D·S` original values in `tail`.
pub fn undifference(
    diff_forecasts: &[f64],
    tail: &[f64],
    d: usize,
    sd: usize,
    s: usize,
) -> Result<Vec<f64>> {
    let need = d + sd * s;
    if tail.len() < need {
        return Err(Error::Length(format!(
            "undifferencing needs {need} trailing values, got {}",
            tail.len()
        )));
    }
    // stages[i] is the tail after the first i differencing operations.
    let lags: Vec<usize> = std::iter::repeat_n(s, sd)
        .chain(std::iter::repeat_n(1, d))
        .collect();
    let mut stages = vec![tail[tail.len() - need..].to_vec()];
    for &lag in &lags {
        let prev = stages.last().expect("non-empty");
        stages.push((lag..prev.len()).map(|t| prev[t] - prev[t - lag]).collect());
    }
    let mut current = diff_forecasts.to_vec();
    for (i, &lag) in lags.iter().enumerate().rev() {
        let mut ext = stages[i].clone();
        for c in &current {
            let v = c + ext[ext.len() - lag];
            ext.push(v);
        }
        current = ext.split_off(stages[i].len());
    }
    Ok(current)
}

/// One-step residuals of the differenced series `w` (zero before `t₀`).
fn residuals(params: &SarimaParams, w: &[f64]) -> (Vec<f64>, usize) {
    let (ar, ma) = params.expanded();
    let t0 = params.order.max_ar_lag();
    let mu = params.intercept;
    let mut e = vec![0.0; w.len()];
    for t in t0..w.len() {
        let mut v = w[t] - mu;
        for &(lag, c) in &ar {
            v -= c * (w[t - lag] - mu);
        }
        for &(lag, c) in &ma {
            if lag <= t {
                v -= c * e[t - lag];
            }
        }
        e[t] = v;
    }
    (e, t0)
}

/// Conditional sum of squares of the already differenced series. Non-finite
/// results are reported as +∞.
pub fn css_objective(params: &SarimaParams, series: &[f64]) -> f64 {
    let (e, t0) = residuals(params, series);
    let css: f64 = e[t0.min(e.len())..].iter().map(|v| v * v).sum();
    if css.is_finite() {
        css
    } else {
        f64::INFINITY
    }
}

/// Gaussian CSS approximation `n·ln(css/n) + 2k`.
pub fn aic(css_value: f64, n_eff: usize, k_params: usize) -> Result<f64> {
    if !(css_value > 0.0) || !css_value.is_finite() {
        return Err(Error::Domain(format!("AIC needs a positive CSS, got {css_value}")));
    }
    if n_eff <= k_params {
        return Err(Error::Domain(format!(
            "AIC needs more observations ({n_eff}) than parameters ({k_params})"
        )));
    }
    let n = n_eff as f64;
    Ok(n * (css_value / n).ln() + 2.0 * k_params as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SarimaFitOptions {
    pub include_intercept: bool,
    pub max_iter: usize,
    pub tol: f64,
    pub initial_step: f64,
}

impl Default for SarimaFitOptions {
    fn default() -> Self {
        Self {
            include_intercept: true,
            max_iter: 2000,
            tol: 1e-8,
            initial_step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SarimaFit {
    pub params: SarimaParams,
    pub css: f64,
    pub n_eff: usize,
    pub aic: f64,
    pub converged: bool,
    /// Post-fit diagnostics, e.g. coefficients on or outside the unit circle.
    pub warnings: Vec<String>,
}

impl SarimaFit {
    pub fn n_params(&self) -> usize {
        self.params.order.n_coefficients() + 1
    }
}

/// Minimum series length accepted by [`fit_sarima`].
pub fn min_fit_length(order: &SarimaOrder) -> usize {
    3 * order.diff_loss() + 10 * order.n_coefficients()
}

/// Fits the ARMA coefficients (and intercept) by Nelder–Mead on the CSS
/// objective, starting from zero coefficients and the differenced mean.
pub fn fit_sarima(series: &[f64], order: &SarimaOrder, opts: &SarimaFitOptions) -> Result<SarimaFit> {
    order.validate()?;
    let need = min_fit_length(order).max(order.diff_loss() + order.max_ar_lag() + 2);
    if series.len() < need {
        return Err(Error::history("samples for SARIMA fitting", need, series.len()));
    }
    if let Some(v) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("series value {v} is not finite")));
    }
    let w = difference(series, order.d, order.sd, order.s)?;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let mut start = SarimaParams::zeros(*order);
    start.intercept = if opts.include_intercept { mean } else { 0.0 };
    let fixed_intercept = (!opts.include_intercept).then_some(0.0);
    let x0 = start.to_vector(opts.include_intercept);

    let nm = NelderMeadOptions {
        max_iter: opts.max_iter,
        tol: opts.tol,
        initial_step: opts.initial_step,
    };
    let min = nelder_mead(
        |x| css_objective(&SarimaParams::from_vector(*order, x, fixed_intercept), &w),
        &x0,
        &nm,
    );
    let mut params = SarimaParams::from_vector(*order, &min.x, fixed_intercept);
    let n_eff = w.len() - order.max_ar_lag();
    let css = min.value;
    params.sigma2 = (css / n_eff as f64).max(f64::MIN_POSITIVE);

    let mut warnings = Vec::new();
    if !min.converged {
        warnings.push(format!(
            "optimizer stopped after {} iterations without converging",
            min.iterations
        ));
    }
    for (name, coefs) in [
        ("ar", &params.ar),
        ("ma", &params.ma),
        ("sar", &params.sar),
        ("sma", &params.sma),
    ] {
        for (i, c) in coefs.iter().enumerate() {
            if c.abs() >= 1.0 {
                warnings.push(format!("{name}[{i}] = {c} is on or outside the unit circle"));
            }
        }
    }
    let k = order.n_coefficients() + usize::from(opts.include_intercept);
    let aic_value = aic(css.max(f64::MIN_POSITIVE), n_eff, k).unwrap_or(f64::INFINITY);
    Ok(SarimaFit {
        params,
        css,
        n_eff,
        aic: aic_value,
        converged: min.converged,
        warnings,
    })
}

/// Outcome of [`select_order`]: the chosen order and every candidate's fit.
#[derive(Debug)]
pub struct OrderSelection {
    pub order: SarimaOrder,
    pub fits: Vec<Result<SarimaFit>>,
}

/// Fits every candidate and returns the AIC minimiser; ties go to fewer
/// parameters, then to the earlier candidate.
pub fn select_order(
    series: &[f64],
    candidates: &[SarimaOrder],
    opts: &SarimaFitOptions,
) -> Result<OrderSelection> {
    if candidates.is_empty() {
        return Err(Error::config("sarima.candidates", "no candidate orders"));
    }
    let fits: Vec<Result<SarimaFit>> = candidates
        .par_iter()
        .map(|o| fit_sarima(series, o, opts))
        .collect();
    let keys: Vec<Option<(f64, usize)>> = fits
        .iter()
        .map(|f| f.as_ref().ok().map(|f| (f.aic, f.n_params())))
        .collect();
    let best = pick_min_aic(&keys);
    match best {
        Some(i) => Ok(OrderSelection {
            order: candidates[i],
            fits,
        }),
        None => Err(fits
            .into_iter()
            .find_map(|f| f.err())
            .expect("at least one candidate failed")),
    }
}

/// Index of the smallest `(aic, n_params)` in lexicographic order; the first
/// such entry wins.
fn pick_min_aic(keys: &[Option<(f64, usize)>]) -> Option<usize> {
    let mut best: Option<(usize, f64, usize)> = None;
    for (i, key) in keys.iter().enumerate() {
        if let Some((a, k)) = *key {
            let better = match best {
                None => true,
                Some((_, ba, bk)) => a < ba || (a == ba && k < bk),
            };
            if better {
                best = Some((i, a, k));
            }
        }
    }
    best.map(|b| b.0)
}

/// Iterates the fitted recursion `k` steps past the end of `history` with
/// future innovations set to zero, then undifferences.
pub fn forecast_sarima(params: &SarimaParams, history: &[f64], k: usize) -> Result<Vec<f64>> {
    let order = params.order;
    let need = order.diff_loss() + order.max_ar_lag() + 1;
    if history.len() < need {
        return Err(Error::history("samples for SARIMA forecasting", need, history.len()));
    }
    if let Some(v) = history.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!("history value {v} is not finite")));
    }
    let mut w = difference(history, order.d, order.sd, order.s)?;
    let (mut e, _) = residuals(params, &w);
    let (ar, ma) = params.expanded();
    let mu = params.intercept;
    let n = w.len();
    for t in n..n + k {
        let mut z = 0.0;
        for &(lag, c) in &ar {
            z += c * (w[t - lag] - mu);
        }
        for &(lag, c) in &ma {
            if lag <= t {
                z += c * e[t - lag];
            }
        }
        w.push(mu + z);
        e.push(0.0);
    }
    undifference(&w[n..], history, order.d, order.sd, order.s)
}
