//! 15-minute load and weather series, day slicing, calendar features and
//! community aggregation.
//!
//! A [`LoadSeries`] stores a single start timestamp and a flat vector of
//! values; sample `i` sits at `start + 15 min · i`. Day `d` is the block
//! `[96·d, 96·d + 96)`. Missing samples are represented by `NaN` and must be
//! filled (see [`fill_missing`]) before a series is handed to a model.

use std::collections::BTreeSet;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Samples in one day at 15-minute granularity.
pub const SLOTS_PER_DAY: usize = 96;
/// Length of one slot in seconds.
pub const SLOT_SECS: i64 = 15 * 60;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

fn check_on_grid(start: NaiveDateTime) -> Result<()> {
    let secs = start.and_utc().timestamp();
    if secs.rem_euclid(SLOT_SECS) != 0 || start.nanosecond() != 0 {
        return Err(Error::Granularity {
            timestamp: start.format(TIMESTAMP_FORMAT).to_string(),
            offset_secs: secs.rem_euclid(SLOT_SECS),
        });
    }
    Ok(())
}

/// Uniformly spaced 15-minute load measurements (kW) for one building or a
/// community. `NaN` marks a missing sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSeries {
    start: NaiveDateTime,
    values: Vec<f64>,
}

impl LoadSeries {
    /// Builds a series, checking grid alignment, whole days and value ranges.
    pub fn new(start: NaiveDateTime, values: Vec<f64>) -> Result<Self> {
        check_on_grid(start)?;
        if values.len() % SLOTS_PER_DAY != 0 {
            return Err(Error::Length(format!(
                "{} samples is not a whole number of {SLOTS_PER_DAY}-sample days",
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_nan() && (!v.is_finite() || **v < 0.0))
        {
            return Err(Error::Input(format!(
                "load sample {i} is {v}; loads must be finite and non-negative"
            )));
        }
        Ok(Self { start, values })
    }

    /// Convenience constructor starting at 2016-01-01 00:00 UTC.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(default_start(), values)
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of whole days.
    pub fn n_days(&self) -> usize {
        self.values.len() / SLOTS_PER_DAY
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(|v| v.is_nan())
    }

    /// The 96 samples of day `d`.
    pub fn day(&self, d: usize) -> Result<&[f64]> {
        if d >= self.n_days() {
            return Err(Error::Range {
                what: "day",
                value: d,
                min: 0,
                max: self.n_days(),
            });
        }
        Ok(&self.values[d * SLOTS_PER_DAY..(d + 1) * SLOTS_PER_DAY])
    }

    /// The first `days` whole days of the series.
    pub fn prefix_days(&self, days: usize) -> LoadSeries {
        let end = (days * SLOTS_PER_DAY).min(self.values.len());
        LoadSeries {
            start: self.start,
            values: self.values[..end].to_vec(),
        }
    }

    /// Calendar date of the first sample of day `d`.
    pub fn date_of_day(&self, d: usize) -> NaiveDate {
        (self.start + Duration::days(d as i64)).date()
    }

    /// Timestamp of sample `i`.
    pub fn timestamp(&self, i: usize) -> NaiveDateTime {
        self.start + Duration::seconds(SLOT_SECS * i as i64)
    }

    /// Elementwise map, keeping start and length. The result is re-validated.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<LoadSeries> {
        LoadSeries::new(self.start, self.values.iter().map(|&v| f(v)).collect())
    }
}

pub(crate) fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2016, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid constant date")
}

/// One day of load values.
#[derive(Clone, Debug, PartialEq)]
pub struct DayProfile {
    pub day_index: usize,
    pub values: [f64; SLOTS_PER_DAY],
}

/// Returns samples `[96·d, 96·d + 95]` verbatim.
pub fn day_slice(series: &LoadSeries, d: usize) -> Result<DayProfile> {
    let mut values = [0.0; SLOTS_PER_DAY];
    values.copy_from_slice(series.day(d)?);
    Ok(DayProfile {
        day_index: d,
        values,
    })
}

/// Solar radiation (W/m²) and outdoor temperature (°C), aligned with a
/// [`LoadSeries`]. Missing samples are `NaN`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeatherSeries {
    start: NaiveDateTime,
    solar: Vec<f64>,
    temperature: Vec<f64>,
}

impl WeatherSeries {
    pub fn new(start: NaiveDateTime, solar: Vec<f64>, temperature: Vec<f64>) -> Result<Self> {
        check_on_grid(start)?;
        if solar.len() != temperature.len() {
            return Err(Error::Alignment(format!(
                "solar has {} samples, temperature has {}",
                solar.len(),
                temperature.len()
            )));
        }
        if let Some(v) = solar.iter().find(|v| **v < 0.0 || v.is_infinite()) {
            return Err(Error::Input(format!(
                "solar radiation must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self {
            start,
            solar,
            temperature,
        })
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn solar(&self) -> &[f64] {
        &self.solar
    }

    pub fn temperature(&self) -> &[f64] {
        &self.temperature
    }

    pub fn len(&self) -> usize {
        self.solar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solar.is_empty()
    }

    pub fn n_days(&self) -> usize {
        self.solar.len() / SLOTS_PER_DAY
    }

    /// Checks that this series shares start and length with `load`.
    pub fn check_aligned(&self, load: &LoadSeries) -> Result<()> {
        if self.start != load.start() || self.len() != load.len() {
            return Err(Error::Alignment(format!(
                "weather ({}, {} samples) vs load ({}, {} samples)",
                self.start,
                self.len(),
                load.start(),
                load.len()
            )));
        }
        Ok(())
    }

    /// The first `days` whole days.
    pub fn prefix_days(&self, days: usize) -> WeatherSeries {
        let end = (days * SLOTS_PER_DAY).min(self.solar.len());
        WeatherSeries {
            start: self.start,
            solar: self.solar[..end].to_vec(),
            temperature: self.temperature[..end].to_vec(),
        }
    }
}

/// Working day or weekend/holiday.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayType {
    WorkingDay,
    WeekendOrHoliday,
}

impl DayType {
    /// 1.0 for weekend/holiday, 0.0 otherwise.
    pub fn flag(self) -> f64 {
        match self {
            DayType::WorkingDay => 0.0,
            DayType::WeekendOrHoliday => 1.0,
        }
    }
}

pub fn day_type(date: NaiveDate, holidays: &BTreeSet<NaiveDate>) -> DayType {
    match date.weekday() {
        Weekday::Sat | Weekday::Sun => DayType::WeekendOrHoliday,
        _ if holidays.contains(&date) => DayType::WeekendOrHoliday,
        _ => DayType::WorkingDay,
    }
}

/// Maps day indices of a series to calendar dates and day types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calendar {
    pub start: NaiveDate,
    pub holidays: BTreeSet<NaiveDate>,
}

impl Calendar {
    pub fn new(start: NaiveDate, holidays: BTreeSet<NaiveDate>) -> Self {
        Self { start, holidays }
    }

    pub fn for_series(series: &LoadSeries, holidays: BTreeSet<NaiveDate>) -> Self {
        Self::new(series.start().date(), holidays)
    }

    pub fn date_of(&self, d: usize) -> NaiveDate {
        self.start + Duration::days(d as i64)
    }

    pub fn day_type_of(&self, d: usize) -> DayType {
        day_type(self.date_of(d), &self.holidays)
    }
}

/// Pointwise sum of aligned, gap-free building series, accumulated in list
/// order.
pub fn aggregate_community(buildings: &[LoadSeries]) -> Result<LoadSeries> {
    let first = buildings
        .first()
        .ok_or_else(|| Error::Alignment("no buildings to aggregate".into()))?;
    let mut total = first.values.clone();
    for (b, s) in buildings.iter().enumerate() {
        if s.start != first.start || s.len() != first.len() {
            return Err(Error::Alignment(format!(
                "building {b} starts {} with {} samples; building 0 starts {} with {}",
                s.start,
                s.len(),
                first.start,
                first.len()
            )));
        }
        if s.has_missing() {
            return Err(Error::Input(format!("building {b} has missing samples")));
        }
        if b > 0 {
            for (acc, v) in total.iter_mut().zip(&s.values) {
                *acc += v;
            }
        }
    }
    LoadSeries::new(first.start, total)
}

/// Strategy used by [`fill_missing`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Straight line between the neighbours of each gap; gaps must be shorter
    /// than one day and bracketed on both sides.
    LinearInterpolate,
    /// Copy the (already filled) value at the same slot of the previous day.
    /// Missing samples on day 0 take the next available day's value.
    SameTimePrevDay,
}

/// Replaces every missing sample; non-missing values are untouched.
pub fn fill_missing(series: &LoadSeries, policy: FillPolicy) -> Result<LoadSeries> {
    let mut out = series.values.clone();
    match policy {
        FillPolicy::LinearInterpolate => {
            let mut i = 0;
            while i < out.len() {
                if !out[i].is_nan() {
                    i += 1;
                    continue;
                }
                let gap_start = i;
                while i < out.len() && out[i].is_nan() {
                    i += 1;
                }
                let gap_len = i - gap_start;
                let day = gap_start / SLOTS_PER_DAY;
                if gap_start == 0 || i == out.len() {
                    return Err(Error::Unfillable {
                        day,
                        reason: "gap touches the series boundary".into(),
                    });
                }
                if gap_len >= SLOTS_PER_DAY {
                    return Err(Error::Unfillable {
                        day,
                        reason: format!("gap of {gap_len} samples is not shorter than one day"),
                    });
                }
                let (a, b) = (out[gap_start - 1], out[i]);
                let steps = (gap_len + 1) as f64;
                for k in 0..gap_len {
                    out[gap_start + k] = a + (b - a) * (k + 1) as f64 / steps;
                }
            }
        }
        FillPolicy::SameTimePrevDay => {
            let n_days = series.n_days();
            for d in 0..n_days {
                let day = &series.values[d * SLOTS_PER_DAY..(d + 1) * SLOTS_PER_DAY];
                if day.iter().all(|v| v.is_nan()) {
                    return Err(Error::Unfillable {
                        day: d,
                        reason: "the whole day is missing".into(),
                    });
                }
            }
            for i in 0..out.len() {
                if !out[i].is_nan() {
                    continue;
                }
                if i >= SLOTS_PER_DAY {
                    out[i] = out[i - SLOTS_PER_DAY];
                } else {
                    out[i] = (1..n_days)
                        .map(|k| series.values[i + k * SLOTS_PER_DAY])
                        .find(|v| !v.is_nan())
                        .ok_or_else(|| Error::Unfillable {
                            day: 0,
                            reason: format!("slot {i} is missing on every day"),
                        })?;
                }
            }
        }
    }
    LoadSeries::new(series.start, out)
}

/// How the `load` column is expressed in the input file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadUnit {
    /// Average power over the slot.
    #[default]
    Kw,
    /// Energy per 15-minute slot; multiplied by 4 on ingestion.
    KwhPerSlot,
}

/// Whether a timestamp labels the beginning or the end of its slot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StampLabel {
    #[default]
    IntervalStart,
    IntervalEnd,
}

/// Column mapping for [`read_csv`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub timestamp: String,
    pub load: String,
    pub unit: LoadUnit,
    /// Read when present in the header.
    pub solar: String,
    /// Read when present in the header.
    pub temperature: String,
    pub label: StampLabel,
    /// Maximum distance to the 15-minute grid that is silently snapped.
    pub snap_tolerance_secs: i64,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            load: "load_kw".into(),
            unit: LoadUnit::Kw,
            solar: "solar_wm2".into(),
            temperature: "temp_c".into(),
            label: StampLabel::IntervalStart,
            snap_tolerance_secs: 60,
        }
    }
}

/// Result of [`read_csv`]: the load and, when both weather columns are
/// present, the aligned weather series.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub load: LoadSeries,
    pub weather: Option<WeatherSeries>,
}

fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(raw, f).ok())
}

fn parse_value(raw: &str) -> f64 {
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => v,
        _ => f64::NAN,
    }
}

/// Parses CSV text into a load series (and weather, when present), snapping
/// timestamps onto the 15-minute grid and trimming partial leading/trailing
/// days. Days start at midnight UTC.
pub fn read_csv(text: &str, schema: &CsvSchema) -> Result<Ingested> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let ts_col = col(&schema.timestamp)
        .ok_or_else(|| Error::Schema(format!("missing column `{}`", schema.timestamp)))?;
    let load_col =
        col(&schema.load).ok_or_else(|| Error::Schema(format!("missing column `{}`", schema.load)))?;
    let weather_cols = col(&schema.solar).zip(col(&schema.temperature));

    // (slot number since the epoch, load, solar, temperature)
    let mut rows: Vec<(i64, f64, f64, f64)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let raw_ts = record.get(ts_col).unwrap_or_default();
        let ts = parse_timestamp(raw_ts)
            .ok_or_else(|| Error::Input(format!("row {}: bad timestamp `{raw_ts}`", line + 1)))?;
        let secs = ts.and_utc().timestamp();
        let mut slot = (secs as f64 / SLOT_SECS as f64).round() as i64;
        let offset = secs - slot * SLOT_SECS;
        if offset.abs() > schema.snap_tolerance_secs {
            return Err(Error::Granularity {
                timestamp: raw_ts.to_string(),
                offset_secs: offset,
            });
        }
        if schema.label == StampLabel::IntervalEnd {
            slot -= 1;
        }
        let mut load = parse_value(record.get(load_col).unwrap_or_default());
        if load < 0.0 {
            return Err(Error::Input(format!(
                "row {}: negative load {load}",
                line + 1
            )));
        }
        if schema.unit == LoadUnit::KwhPerSlot {
            load *= 4.0;
        }
        let (solar, temp) = match weather_cols {
            Some((s, t)) => (
                parse_value(record.get(s).unwrap_or_default()),
                parse_value(record.get(t).unwrap_or_default()),
            ),
            None => (f64::NAN, f64::NAN),
        };
        rows.push((slot, load, solar, temp));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        let ts = DateTime::from_timestamp(w[0].0 * SLOT_SECS, 0)
            .map(|t| t.naive_utc().format(TIMESTAMP_FORMAT).to_string())
            .unwrap_or_default();
        return Err(Error::Duplicate(ts));
    }

    let per_day = SLOTS_PER_DAY as i64;
    let (first, last) = match (rows.first(), rows.last()) {
        (Some(f), Some(l)) => (f.0, l.0),
        _ => return Err(Error::Input("no data rows".into())),
    };
    let day_start = first.div_euclid(per_day) + i64::from(first.rem_euclid(per_day) != 0);
    let day_end = (last + 1).div_euclid(per_day);
    let n_days = (day_end - day_start).max(0) as usize;
    let origin = day_start * per_day;
    let len = n_days * SLOTS_PER_DAY;

    let mut load = vec![f64::NAN; len];
    let mut solar = vec![f64::NAN; len];
    let mut temp = vec![f64::NAN; len];
    for (slot, l, s, t) in rows {
        let idx = slot - origin;
        if idx >= 0 && (idx as usize) < len {
            let idx = idx as usize;
            load[idx] = l;
            solar[idx] = s;
            temp[idx] = t;
        }
    }
    let start = DateTime::from_timestamp(origin * SLOT_SECS, 0)
        .ok_or_else(|| Error::Input("timestamp out of range".into()))?
        .naive_utc();
    let load = LoadSeries::new(start, load)?;
    let weather = match weather_cols {
        Some(_) => Some(WeatherSeries::new(start, solar, temp)?),
        None => None,
    };
    Ok(Ingested { load, weather })
}

/// Parses CSV text into a load series; see [`read_csv`].
pub fn load_csv(text: &str, schema: &CsvSchema) -> Result<LoadSeries> {
    read_csv(text, schema).map(|i| i.load)
}

/// Writes the canonical CSV format (`timestamp,load_kw[,solar_wm2,temp_c]`).
/// Values use the shortest representation that parses back to the same bits.
pub fn write_csv(load: &LoadSeries, weather: Option<&WeatherSeries>) -> Result<String> {
    if let Some(w) = weather {
        w.check_aligned(load)?;
    }
    let mut out = String::with_capacity(load.len() * 40);
    out.push_str("timestamp,load_kw");
    if weather.is_some() {
        out.push_str(",solar_wm2,temp_c");
    }
    out.push('\n');
    for (i, v) in load.values().iter().enumerate() {
        out.push_str(&load.timestamp(i).format(TIMESTAMP_FORMAT).to_string());
        out.push(',');
        out.push_str(&v.to_string());
        if let Some(w) = weather {
            out.push(',');
            out.push_str(&w.solar()[i].to_string());
            out.push(',');
            out.push_str(&w.temperature()[i].to_string());
        }
        out.push('\n');
    }
    Ok(out)
}
