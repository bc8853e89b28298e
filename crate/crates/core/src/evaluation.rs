//! Rolling-origin day-ahead evaluation: daily RMSE, running-average RMSE,
//! relative RMSE, report rendering and replayable run manifests.
//!
//! For every evaluation day `d` each model is refitted on the trailing
//! `train_days` days whenever `d − eval_start` is a multiple of
//! `refit_every`, and forecasts day `d` from a [`DataView`] truncated at the
//! origin. Failed fits or forecasts are recorded per day and excluded from
//! the averages.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::{DataView, FittedModel, ModelSpec};
use crate::series::{fill_missing, read_csv, write_csv, Calendar, CsvSchema, FillPolicy, LoadSeries, WeatherSeries, SLOTS_PER_DAY};
use crate::synth::{generate, SynthConfig};

pub const MANIFEST_FORMAT: u32 = 1;

/// Root mean squared difference of two equally long vectors.
pub fn rmse(forecast: &[f64], actual: &[f64]) -> Result<f64> {
    if forecast.len() != actual.len() {
        return Err(Error::shape(format!("{} values", actual.len()), forecast.len()));
    }
    if forecast.is_empty() {
        return Err(Error::shape("at least one value", 0));
    }
    if forecast.iter().chain(actual).any(|v| !v.is_finite()) {
        return Err(Error::Input("rmse of non-finite values".into()));
    }
    let ss: f64 = forecast.iter().zip(actual).map(|(f, a)| (f - a) * (f - a)).sum();
    Ok((ss / forecast.len() as f64).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub train_days: usize,
    /// First evaluated day.
    pub eval_start: usize,
    /// One past the last evaluated day.
    pub eval_end: usize,
    #[serde(default = "default_refit_every")]
    pub refit_every: usize,
}

fn default_refit_every() -> usize {
    7
}

impl CvConfig {
    pub fn validate(&self, n_days: usize) -> Result<()> {
        if self.train_days == 0 {
            return Err(Error::config("cv.train_days", "must be at least 1"));
        }
        if self.refit_every == 0 {
            return Err(Error::config("cv.refit_every", "must be at least 1"));
        }
        if self.eval_start < self.train_days {
            return Err(Error::config(
                "cv.eval_start",
                format!("day {} leaves no room for {} training days", self.eval_start, self.train_days),
            ));
        }
        if self.eval_end <= self.eval_start {
            return Err(Error::config("cv.eval_end", "the evaluation range is empty"));
        }
        if self.eval_end > n_days {
            return Err(Error::config(
                "cv.eval_end",
                format!("day {} is past the end of the data ({n_days} days)", self.eval_end),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayFailure {
    pub day: usize,
    pub message: String,
}

/// Forecast and actual values of one day, for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overlay {
    pub day: usize,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_id: String,
    pub spec: ModelSpec,
    /// `(day, rmse)` of every successful day, in day order.
    pub daily_rmse: Vec<(usize, f64)>,
    /// `running_avg_rmse[i]` is the mean of `daily_rmse[..=i]`.
    pub running_avg_rmse: Vec<f64>,
    /// `None` when no day succeeded or the mean load is not positive.
    pub relative_rmse: Option<f64>,
    /// Mean actual load over the evaluation range, kW.
    pub mean_load: f64,
    pub failures: Vec<DayFailure>,
    /// The last successfully forecast day.
    pub overlay: Option<Overlay>,
    pub manifest: Option<Manifest>,
}

/// Final running-average RMSE divided by the mean load.
pub fn relative_rmse(report: &EvalReport) -> Result<f64> {
    let last = report
        .running_avg_rmse
        .last()
        .ok_or_else(|| Error::Input(format!("`{}` has no successful days", report.model_id)))?;
    if !(report.mean_load > 0.0) {
        return Err(Error::Domain(format!("mean load {} is not positive", report.mean_load)));
    }
    Ok(last / report.mean_load)
}

/// Prefix means of `xs`, accumulated left to right.
pub fn running_average(xs: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            sum += x;
            sum / (i + 1) as f64
        })
        .collect()
}

fn mean_load(load: &LoadSeries, cv: &CvConfig) -> f64 {
    let vals = &load.values()[cv.eval_start * SLOTS_PER_DAY..cv.eval_end * SLOTS_PER_DAY];
    let (sum, n) = vals
        .iter()
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn evaluate_model(spec: &ModelSpec, data: &Dataset, cv: &CvConfig, mean: f64) -> EvalReport {
    let mut daily = Vec::new();
    let mut failures = Vec::new();
    let mut overlay = None;
    let mut fitted: Result<FittedModel> = Err(Error::Input("not fitted".into()));
    for d in cv.eval_start..cv.eval_end {
        let actual = data.load.day(d).expect("validated evaluation range");
        let outcome = DataView::truncated(&data.load, data.weather.as_ref(), &data.calendar, d).and_then(|view| {
            if (d - cv.eval_start) % cv.refit_every == 0 {
                fitted = spec.fit(&view, cv.train_days);
            }
            let values = match (spec, &fitted) {
                (ModelSpec::Oracle, _) => actual.to_vec(),
                (_, Ok(model)) => model.forecast(&view)?.values,
                (_, Err(e)) => return Err(Error::Input(format!("no fitted model: {e}"))),
            };
            let r = rmse(&values, actual)?;
            Ok((values, r))
        });
        match outcome {
            Ok((values, r)) => {
                daily.push((d, r));
                overlay = Some((d, values));
            }
            Err(e) => failures.push(DayFailure {
                day: d,
                message: e.to_string(),
            }),
        }
    }
    let values: Vec<f64> = daily.iter().map(|&(_, r)| r).collect();
    let running = running_average(&values);
    let mut report = EvalReport {
        model_id: spec.id().to_string(),
        spec: spec.clone(),
        daily_rmse: daily,
        running_avg_rmse: running,
        relative_rmse: None,
        mean_load: mean,
        failures,
        overlay: overlay.map(|(day, forecast)| Overlay {
            day,
            forecast,
            actual: data.load.day(day).expect("evaluated day").to_vec(),
        }),
        manifest: None,
    };
    report.relative_rmse = relative_rmse(&report).ok();
    report
}

/// Runs every model over the evaluation range. Models run in parallel; the
/// reports come back in the order of `models`.
pub fn rolling_cv(models: &[ModelSpec], data: &Dataset, cv: &CvConfig) -> Result<Vec<EvalReport>> {
    if models.is_empty() {
        return Err(Error::config("models", "at least one model is required"));
    }
    cv.validate(data.load.n_days())?;
    let mean = mean_load(&data.load, cv);
    Ok(models
        .par_iter()
        .map(|spec| evaluate_model(spec, data, cv, mean))
        .collect())
}

/// Load, optional weather and calendar of one evaluation run.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub load: LoadSeries,
    pub weather: Option<WeatherSeries>,
    pub calendar: Calendar,
}

impl Dataset {
    pub fn new(load: LoadSeries, weather: Option<WeatherSeries>, holidays: BTreeSet<NaiveDate>) -> Result<Self> {
        if let Some(w) = &weather {
            w.check_aligned(&load)?;
        }
        let calendar = Calendar::for_series(&load, holidays);
        Ok(Self { load, weather, calendar })
    }

    /// SHA-256 of the canonical CSV rendering of load and weather.
    pub fn sha256(&self) -> Result<String> {
        let text = write_csv(&self.load, self.weather.as_ref())?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }
}

/// Where the evaluation data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Generated data; the community sum unless `building` is set.
    Synth {
        #[serde(default)]
        synth: SynthConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        building: Option<usize>,
    },
    /// A CSV file; relative paths resolve against the manifest's directory.
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema: CsvSchema,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fill: Option<FillPolicy>,
    },
}

impl DataSource {
    pub fn load(&self, base_dir: &Path, holidays: &BTreeSet<NaiveDate>) -> Result<Dataset> {
        match self {
            DataSource::Synth { synth, building } => {
                let data = generate(synth)?;
                let load = match building {
                    None => data.community(),
                    Some(b) => data.buildings.get(*b).cloned().ok_or(Error::Range {
                        what: "building",
                        value: *b,
                        min: 0,
                        max: data.buildings.len(),
                    })?,
                };
                Dataset::new(load, Some(data.weather), holidays.clone())
            }
            DataSource::Csv { path, schema, fill } => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full).map_err(|source| Error::Io { path: full, source })?;
                let ingested = read_csv(&text, schema)?;
                let load = match fill {
                    Some(policy) => fill_missing(&ingested.load, *policy)?,
                    None => ingested.load,
                };
                Dataset::new(load, ingested.weather, holidays.clone())
            }
        }
    }
}

/// Everything needed to replay an evaluation run. Stored as TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    /// SHA-256 of the canonical CSV rendering of the evaluated data.
    pub data_sha256: String,
    /// Worker threads of the run; results do not depend on it.
    pub threads: usize,
    #[serde(default)]
    pub holidays: BTreeSet<NaiveDate>,
    pub data: DataSource,
    pub cv: CvConfig,
    pub models: Vec<ModelSpec>,
}

impl Manifest {
    pub fn new(
        data: DataSource,
        holidays: BTreeSet<NaiveDate>,
        cv: CvConfig,
        models: Vec<ModelSpec>,
        dataset: &Dataset,
    ) -> Result<Self> {
        Ok(Self {
            format: MANIFEST_FORMAT,
            data_sha256: dataset.sha256()?,
            threads: rayon::current_num_threads(),
            holidays,
            data,
            cv,
            models,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("unsupported manifest format {}", m.format)));
        }
        Ok(m)
    }
}

/// Loads the data, checks its hash and runs the evaluation. Every report
/// carries a copy of the manifest.
pub fn run_manifest(manifest: &Manifest, base_dir: &Path) -> Result<Vec<EvalReport>> {
    let data = manifest.data.load(base_dir, &manifest.holidays)?;
    let hash = data.sha256()?;
    if hash != manifest.data_sha256 {
        return Err(Error::Input(format!(
            "data hash {hash} does not match the manifest ({})",
            manifest.data_sha256
        )));
    }
    let mut reports = rolling_cv(&manifest.models, &data, &manifest.cv)?;
    for r in &mut reports {
        r.manifest = Some(manifest.clone());
    }
    Ok(reports)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    TextTable,
    Csv,
    SvgPlot,
}

pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::TextTable => text_table(reports).into_bytes(),
        ReportFormat::Csv => csv_traces(reports).into_bytes(),
        ReportFormat::SvgPlot => svg_plot(reports).into_bytes(),
    }
}

fn text_table(reports: &[EvalReport]) -> String {
    let width = reports.iter().map(|r| r.model_id.len()).max().unwrap_or(0).max(5);
    let mut s = format!(
        "{:<width$}  {:>13}  {:>15}  {:>5}  {:>8}\n",
        "model", "relative_rmse", "avg_rmse_kw", "days", "failures"
    );
    for r in reports {
        let rel = r.relative_rmse.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let avg = r.running_avg_rmse.last().map_or("n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            s,
            "{:<width$}  {:>13}  {:>15}  {:>5}  {:>8}",
            r.model_id,
            rel,
            avg,
            r.daily_rmse.len(),
            r.failures.len()
        );
    }
    if let Some(r) = reports.first() {
        let _ = writeln!(s, "mean load: {:.4} kW", r.mean_load);
    }
    s
}

pub const CSV_HEADER: &str = "model_id,day,daily_rmse,running_avg_rmse";

/// One row per model and successful day. Floats use the shortest
/// representation that parses back to the same value.
fn csv_traces(reports: &[EvalReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        for (&(day, v), avg) in r.daily_rmse.iter().zip(&r.running_avg_rmse) {
            let _ = writeln!(s, "{},{day},{v},{avg}", r.model_id);
        }
    }
    s
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
pub struct TraceRow {
    pub model_id: String,
    pub day: usize,
    pub daily_rmse: f64,
    pub running_avg_rmse: f64,
}

/// Parses the CSV written by [`render_report`].
pub fn parse_report_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::Schema(format!("expected header `{CSV_HEADER}`, found `{header}`")));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

const SVG_W: f64 = 800.0;
const PANEL_H: f64 = 260.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

struct Panel {
    top: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn point(&self, x: f64, y: f64) -> (f64, f64) {
        let w = SVG_W - 2.0 * MARGIN;
        let h = PANEL_H - 2.0 * MARGIN;
        let px = MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * w;
        let py = self.top + PANEL_H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * h;
        (px, py)
    }

    fn polyline(&self, s: &mut String, class: &str, model: &str, color: &str, pts: impl Iterator<Item = (f64, f64)>) {
        let points: Vec<String> = pts
            .map(|(x, y)| {
                let (px, py) = self.point(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="{class}" data-model="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(model),
            points.join(" ")
        );
    }

    fn frame(&self, s: &mut String, title: &str, x_label: &str, y_label: &str) {
        let (x0, y0) = self.point(self.x.0, self.y.0);
        let (x1, y1) = self.point(self.x.1, self.y.1);
        let _ = writeln!(
            s,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y0 - y1
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            SVG_W / 2.0,
            self.top + 20.0,
            escape(title)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{} ({} to {})</text>"#,
            SVG_W / 2.0,
            y0 + 30.0,
            escape(x_label),
            self.x.0,
            self.x.1
        );
        let _ = writeln!(
            s,
            r#"<text x="10" y="{:.2}" font-size="11">{} ({:.3} to {:.3})</text>"#,
            self.top + 38.0,
            escape(y_label),
            self.y.0,
            self.y.1
        );
    }
}

/// Two stacked panels: running-average RMSE per model (one `running`
/// polyline each) and forecast against actual load on the last evaluated day
/// (an `actual` polyline and one `overlay` polyline per model).
fn svg_plot(reports: &[EvalReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{}" viewBox="0 0 {SVG_W} {}">"#,
        2.0 * PANEL_H + 40.0,
        2.0 * PANEL_H + 40.0
    );
    let running = Panel {
        top: 0.0,
        x: span(reports.iter().flat_map(|r| r.daily_rmse.iter().map(|&(d, _)| d as f64))),
        y: span(reports.iter().flat_map(|r| r.running_avg_rmse.iter().copied()).chain([0.0])),
    };
    running.frame(&mut s, "Running-average RMSE", "day", "kW");
    for (k, r) in reports.iter().enumerate() {
        let pts = r.daily_rmse.iter().zip(&r.running_avg_rmse).map(|(&(d, _), &a)| (d as f64, a));
        running.polyline(&mut s, "running", &r.model_id, PALETTE[k % PALETTE.len()], pts);
    }

    let day = reports.iter().filter_map(|r| r.overlay.as_ref().map(|o| o.day)).max();
    let overlays: Vec<(usize, &Overlay)> = reports
        .iter()
        .enumerate()
        .filter_map(|(k, r)| r.overlay.as_ref().filter(|o| Some(o.day) == day).map(|o| (k, o)))
        .collect();
    let overlay = Panel {
        top: PANEL_H + 20.0,
        x: (0.0, (SLOTS_PER_DAY - 1) as f64),
        y: span(
            overlays
                .iter()
                .flat_map(|(_, o)| o.forecast.iter().chain(&o.actual).copied()),
        ),
    };
    let title = match day {
        Some(d) => format!("Forecast and actual load, day {d}"),
        None => "Forecast and actual load".to_string(),
    };
    overlay.frame(&mut s, &title, "slot", "kW");
    if let Some((_, o)) = overlays.first() {
        let pts = o.actual.iter().enumerate().map(|(t, &v)| (t as f64, v));
        overlay.polyline(&mut s, "actual", "actual", "black", pts);
    }
    for (k, o) in &overlays {
        let pts = o.forecast.iter().enumerate().map(|(t, &v)| (t as f64, v));
        overlay.polyline(&mut s, "overlay", &reports[*k].model_id, PALETTE[k % PALETTE.len()], pts);
    }
    for (k, r) in reports.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{}">{}</text>"#,
            SVG_W - MARGIN + 4.0,
            MARGIN + 14.0 * k as f64,
            PALETTE[k % PALETTE.len()],
            escape(&r.model_id)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::PersistenceSpec;

    fn periodic(days: usize) -> Dataset {
        let week: Vec<f64> = (0..7 * SLOTS_PER_DAY)
            .map(|i| 2.0 + (i as f64 * 0.05).sin() + (i / SLOTS_PER_DAY) as f64 * 0.3)
            .collect();
        let values = (0..days * SLOTS_PER_DAY).map(|i| week[i % week.len()]).collect();
        Dataset::new(LoadSeries::from_values(values).unwrap(), None, BTreeSet::new()).unwrap()
    }

    fn cv(train: usize, start: usize, end: usize) -> CvConfig {
        CvConfig {
            train_days: train,
            eval_start: start,
            eval_end: end,
            refit_every: 7,
        }
    }

    #[test]
    fn rmse_basics() {
        let a: Vec<f64> = (0..96).map(|i| i as f64 * 0.1).collect();
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|v| v + 0.75).collect();
        assert_eq!(rmse(&b, &a).unwrap(), 0.75);
        assert!(matches!(rmse(&a[..95], &a), Err(Error::Shape { .. })));
    }

    #[test]
    fn oracle_scores_zero() {
        let data = periodic(30);
        let r = &rolling_cv(&[ModelSpec::Oracle], &data, &cv(14, 14, 30)).unwrap()[0];
        assert!(r.daily_rmse.iter().all(|&(_, v)| v == 0.0));
        assert_eq!(r.relative_rmse, Some(0.0));
        assert_eq!(r.daily_rmse.len(), 16);
    }

    #[test]
    fn periodic_persistence() {
        let data = periodic(40);
        let specs = [
            ModelSpec::NSameDays(PersistenceSpec { n: 1 }),
            ModelSpec::NDays(PersistenceSpec { n: 1 }),
        ];
        let reports = rolling_cv(&specs, &data, &cv(14, 14, 40)).unwrap();
        assert!(reports[0].daily_rmse.iter().all(|&(_, v)| v == 0.0));
        assert!(reports[1].daily_rmse.iter().all(|&(_, v)| v > 0.0));
    }

    #[test]
    fn running_average_is_prefix_mean() {
        let xs = [1.0, 2.0, 6.0, 3.0];
        assert_eq!(running_average(&xs), vec![1.0, 1.5, 3.0, 3.0]);
    }

    #[test]
    fn relative_rmse_definition() {
        let mut r = rolling_cv(&[ModelSpec::Oracle], &periodic(20), &cv(7, 7, 10)).unwrap().remove(0);
        r.running_avg_rmse = vec![2.0, 2.0];
        r.mean_load = 2.0;
        assert_eq!(relative_rmse(&r).unwrap(), 1.0);
        r.mean_load = 0.0;
        assert!(matches!(relative_rmse(&r), Err(Error::Domain(_))));
    }

    #[test]
    fn failures_are_recorded_and_excluded() {
        let data = periodic(30);
        let specs = [ModelSpec::NSameDays(PersistenceSpec { n: 3 })];
        let r = &rolling_cv(&specs, &data, &cv(10, 10, 30)).unwrap()[0];
        assert_eq!(r.failures.len(), 11);
        assert_eq!(r.failures[0].day, 10);
        assert_eq!(r.daily_rmse.len(), 9);
        assert_eq!(r.daily_rmse[0].0, 21);
    }

    #[test]
    fn invalid_ranges() {
        let data = periodic(20);
        assert!(rolling_cv(&[ModelSpec::Oracle], &data, &cv(10, 5, 15)).is_err());
        assert!(rolling_cv(&[ModelSpec::Oracle], &data, &cv(10, 10, 21)).is_err());
        assert!(rolling_cv(&[], &data, &cv(10, 10, 20)).is_err());
    }

    #[test]
    fn text_table_has_one_row_per_model() {
        let r = rolling_cv(&[ModelSpec::Oracle], &periodic(20), &cv(7, 7, 10)).unwrap();
        let t = String::from_utf8(render_report(&r, ReportFormat::TextTable)).unwrap();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3, "{t}");
        assert!(lines[1].starts_with("oracle") && lines[1].contains("0.0000"));
    }

    #[test]
    fn manifest_toml_round_trip() {
        let data = periodic(20);
        let m = Manifest::new(
            DataSource::Synth {
                synth: SynthConfig::default(),
                building: None,
            },
            BTreeSet::new(),
            cv(7, 7, 10),
            vec![ModelSpec::Oracle, ModelSpec::default_for("par_w").unwrap()],
            &data,
        )
        .unwrap();
        let text = m.to_toml().unwrap();
        assert_eq!(Manifest::from_toml(&text).unwrap(), m, "{text}");
    }
}
