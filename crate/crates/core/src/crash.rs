//! Crash detection by a drawdown rule: a local maximum followed, within a
//! short horizon, by a fall of at least a given fraction.

use serde::{Deserialize, Serialize};

use crate::timeseries::PriceSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashConfig {
    /// Minimum fractional loss from peak to trough.
    pub threshold: f64,
    /// Calendar days allowed from peak to trough; also the half-width of the
    /// neighbourhood a peak must dominate.
    pub horizon_days: f64,
}

impl Default for CrashConfig {
    fn default() -> Self {
        Self {
            threshold: 0.15,
            horizon_days: 21.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrashEvent {
    pub peak_time: f64,
    pub peak_price: f64,
    pub trough_time: f64,
    pub trough_price: f64,
    /// `1 - trough / peak`.
    pub drawdown: f64,
    pub duration_days: f64,
}

/// Scans for peaks that are followed by a qualifying drop.
///
/// A peak is at least as high as every observation in the preceding
/// horizon and strictly higher than every observation in the following
/// horizon, so on a plateau the last day counts. The trough is the lowest
/// price within the horizon after the peak. After an event the scan resumes
/// past its trough, so events never overlap.
pub fn detect_crashes(series: &PriceSeries, config: &CrashConfig) -> Vec<CrashEvent> {
    let days = series.day_numbers();
    let prices = series.prices();
    let horizon = config.horizon_days;
    let n = prices.len();
    let mut events = Vec::new();

    let mut i = 0;
    while i < n {
        let peak = prices[i];
        let before_ok = (0..i)
            .rev()
            .take_while(|&j| days[i] - days[j] <= horizon)
            .all(|j| prices[j] <= peak);
        let after: Vec<usize> = (i + 1..n).take_while(|&j| days[j] - days[i] <= horizon).collect();
        let after_ok = !after.is_empty() && after.iter().all(|&j| prices[j] < peak);
        if before_ok && after_ok {
            // First occurrence of the minimum.
            let trough = after
                .iter()
                .copied()
                .reduce(|a, b| if prices[b] < prices[a] { b } else { a })
                .expect("non-empty");
            if prices[trough] <= (1.0 - config.threshold) * peak {
                events.push(CrashEvent {
                    peak_time: series.times()[i],
                    peak_price: peak,
                    trough_time: series.times()[trough],
                    trough_price: prices[trough],
                    drawdown: 1.0 - prices[trough] / peak,
                    duration_days: days[trough] - days[i],
                });
                i = trough + 1;
                continue;
            }
        }
        i += 1;
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::date_to_decimal_year;
    use chrono::{Days, NaiveDate};

    fn daily(values: &[f64]) -> PriceSeries {
        let start = NaiveDate::from_ymd_opt(2001, 2, 1).unwrap();
        let times = (0..values.len())
            .map(|i| date_to_decimal_year(start + Days::new(i as u64)))
            .collect();
        PriceSeries::new(times, values.to_vec(), "t").unwrap()
    }

    #[test]
    fn monotone_series_has_no_crash() {
        let s = daily(&(1..200).map(|i| i as f64).collect::<Vec<_>>());
        assert!(detect_crashes(&s, &CrashConfig::default()).is_empty());
    }

    #[test]
    fn plateau_then_drop() {
        let mut v = vec![100.0; 30];
        v.push(100.0);
        v.extend([80.0; 10]);
        let s = daily(&v);
        let ev = detect_crashes(&s, &CrashConfig::default());
        assert_eq!(ev.len(), 1);
        let e = ev[0];
        assert_eq!(e.peak_time, s.times()[30]);
        assert_eq!(e.trough_time, s.times()[31]);
        assert!((e.drawdown - 0.2).abs() < 1e-15);
        assert_eq!(e.duration_days, 1.0);
    }

    #[test]
    fn slow_decline_is_not_a_crash() {
        // 20% over 40 days: never 15% within three weeks.
        let mut v: Vec<f64> = (0..30).map(|i| 80.0 + i as f64).collect();
        v.extend((0..41).map(|i| 109.0 * (1.0 - 0.2 * i as f64 / 40.0)));
        assert!(detect_crashes(&daily(&v), &CrashConfig::default()).is_empty());
    }

    #[test]
    fn drop_beyond_horizon_is_ignored() {
        let mut v = vec![100.0, 101.0];
        v.extend((0..25).map(|i| 100.0 - 0.4 * i as f64));
        v.push(50.0);
        assert!(detect_crashes(&daily(&v), &CrashConfig::default()).is_empty());
    }
}
