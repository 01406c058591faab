//! Price series ingestion, validation, windowing and increment views.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calendar::{self, DAY_EPS};
use crate::error::{Error, Result};

/// Default minimum number of observations in a fitting window.
pub const DEFAULT_MIN_POINTS: usize = 30;

/// Ordered `(time, price)` observations. Times are decimal calendar years.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    times: Vec<f64>,
    prices: Vec<f64>,
    label: String,
}

impl PriceSeries {
    /// Builds a series, checking that times strictly increase and prices are
    /// positive and finite.
    pub fn new(times: Vec<f64>, prices: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if times.len() != prices.len() {
            return Err(Error::validation(format!(
                "{} times but {} prices",
                times.len(),
                prices.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::validation("a series needs at least 2 observations"));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::validation(format!("time at index {i} is not finite")));
        }
        if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::validation(format!(
                "price {} at index {i} is not strictly positive",
                prices[i]
            )));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::validation(format!(
                "times not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self {
            times,
            prices,
            label: label.into(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn log_prices(&self) -> Vec<f64> {
        log_prices(self)
    }

    /// Times and prices restricted to a window's index range.
    pub fn window_slices(&self, window: &Window) -> (&[f64], &[f64]) {
        (
            &self.times[window.start..window.end],
            &self.prices[window.start..window.end],
        )
    }

    pub(crate) fn day_numbers(&self) -> Vec<f64> {
        self.times
            .iter()
            .map(|&t| calendar::decimal_year_to_day_number(t))
            .collect()
    }
}

pub fn log_prices(series: &PriceSeries) -> Vec<f64> {
    series.prices.iter().map(|p| p.ln()).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvConfig {
    pub date_format: String,
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvConfig {
    fn default() -> Self {
        Self {
            date_format: calendar::ISO_DATE.to_string(),
            has_header: true,
            delimiter: b',',
        }
    }
}

/// Loads a two-column `date,price` file. Lines starting with `#` are
/// comments. Rows may be in any order; the result is sorted by time.
pub fn load_csv(path: impl AsRef<Path>, config: &CsvConfig) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, config, label)
}

pub fn read_csv(reader: impl Read, config: &CsvConfig, label: impl Into<String>) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(config.has_header)
        .delimiter(config.delimiter)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 fields (date, price), found {}", record.len()),
            });
        }
        let date = calendar::parse_date(&record[0], &config.date_format).map_err(|e| Error::Parse {
            line,
            message: format!("bad date '{}': {e}", &record[0]),
        })?;
        let price: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad price '{}'", &record[1]),
        })?;
        if !(price.is_finite() && price > 0.0) {
            return Err(Error::Validation {
                line: Some(line),
                message: format!("price {price} is not strictly positive"),
            });
        }
        rows.push((calendar::date_to_decimal_year(date), price, line));
    }

    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Validation {
            line: Some(w[0].2.max(w[1].2)),
            message: format!("duplicate date {}", calendar::format_time(w[0].0)),
        });
    }
    let (times, prices): (Vec<f64>, Vec<f64>) = rows.into_iter().map(|(t, p, _)| (t, p)).unzip();
    PriceSeries::new(times, prices, label)
}

/// Writes the canonical `date,price` form: ISO dates, shortest round-trip
/// price formatting, LF line endings.
pub fn emit_csv(series: &PriceSeries, mut out: impl Write) -> Result<()> {
    let io = |source| Error::Io {
        path: "<output>".into(),
        source,
    };
    out.write_all(b"date,price\n").map_err(io)?;
    for (&t, &p) in series.times.iter().zip(&series.prices) {
        let date = calendar::decimal_year_to_date(t)?;
        writeln!(out, "{},{}", date.format(calendar::ISO_DATE), p).map_err(io)?;
    }
    Ok(())
}

/// Samples `values` at each grid point using the last observation at or
/// before it. `days` must be increasing. Grid points before the first
/// observation yield `None`.
pub(crate) fn locf(days: &[f64], values: &[f64], grid: &[f64]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut j = 0usize;
    let mut last: Option<usize> = None;
    let mut prev = f64::NEG_INFINITY;
    for &g in grid {
        if g < prev {
            // Non-monotone grid: restart the sweep.
            j = 0;
            last = None;
        }
        prev = g;
        while j < days.len() && days[j] <= g + DAY_EPS {
            last = Some(j);
            j += 1;
        }
        out.push(last.map(|i| values[i]));
    }
    out
}

/// Non-overlapping differences of (log-)prices on a grid of `step_days`
/// anchored at the first observation.
pub fn increments(series: &PriceSeries, step_days: f64, on_log: bool) -> Result<Vec<f64>> {
    if !(step_days.is_finite() && step_days > 0.0) {
        return Err(Error::Config(format!("step must be positive, got {step_days}")));
    }
    let days = series.day_numbers();
    let values = if on_log {
        series.log_prices()
    } else {
        series.prices.clone()
    };
    let first = days[0];
    let span = days[days.len() - 1] - first;
    let count = ((span + DAY_EPS) / step_days).floor() as usize;
    if count == 0 {
        return Err(Error::EmptyResult(format!(
            "step of {step_days} days exceeds the series span of {span:.3} days"
        )));
    }
    let grid: Vec<f64> = (0..=count).map(|k| first + k as f64 * step_days).collect();
    let sampled: Vec<f64> = locf(&days, &values, &grid)
        .into_iter()
        .map(|v| v.expect("grid starts at the first observation"))
        .collect();
    Ok(sampled.windows(2).map(|w| w[1] - w[0]).collect())
}

/// A contiguous range of observations `[start, end)` bounded by
/// `t_start` and `t_last`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_start: f64,
    pub t_last: f64,
    pub start: usize,
    pub end: usize,
}

impl Window {
    /// Window covering every observation in `[t_start, t_last]`.
    pub fn covering(series: &PriceSeries, t_start: f64, t_last: f64) -> Result<Self> {
        if !(t_start < t_last) {
            return Err(Error::Domain(format!(
                "window start {t_start} is not before its end {t_last}"
            )));
        }
        let times = series.times();
        let start = times.partition_point(|&t| t < t_start - time_eps(t_start));
        let end = times.partition_point(|&t| t <= t_last + time_eps(t_last));
        Ok(Self {
            t_start,
            t_last,
            start,
            end: end.max(start),
        })
    }

    /// Window spanning the whole series.
    pub fn full(series: &PriceSeries) -> Self {
        Self {
            t_start: series.first_time(),
            t_last: series.last_time(),
            start: 0,
            end: series.len(),
        }
    }

    /// A bare time span with no parent series, e.g. for synthetic generation.
    pub fn span(t_start: f64, t_last: f64) -> Self {
        Self {
            t_start,
            t_last,
            start: 0,
            end: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn duration(&self) -> f64 {
        self.t_last - self.t_start
    }
}

/// Slack for rounding noise when comparing decimal-year times.
fn time_eps(t: f64) -> f64 {
    DAY_EPS / 365.0 * t.abs().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    /// Grid starts whose windows held fewer than `min_points` observations.
    pub dropped: Vec<f64>,
}

/// One window per start that keeps at least `min_points` observations up to
/// `t_last`.
pub fn make_windows(series: &PriceSeries, t_last: f64, start_grid: &[f64], min_points: usize) -> Result<WindowSet> {
    if t_last > series.last_time() + time_eps(t_last) {
        return Err(Error::Domain(format!(
            "t_last {t_last} is after the last observation {}",
            series.last_time()
        )));
    }
    let mut windows = Vec::new();
    let mut dropped = Vec::new();
    for &start in start_grid {
        if !(start < t_last) {
            return Err(Error::Domain(format!(
                "window start {start} is not before t_last {t_last}"
            )));
        }
        let window = Window::covering(series, start, t_last)?;
        if window.len() >= min_points.max(2) {
            windows.push(window);
        } else {
            dropped.push(start);
        }
    }
    if windows.is_empty() {
        return Err(Error::NoAdmissibleWindows);
    }
    Ok(WindowSet { windows, dropped })
}
