//! Lagged cross-correlation between the increments of two series.
//!
//! Both series are carried forward onto a common daily grid over their
//! overlap. For an increment step `s` and a lag `n`, the increment of `a`
//! ending on grid day `g` is paired with the increment of `b` ending on
//! `g + n`, using non-overlapping increments. A positive lag therefore means
//! `b` moves after `a`.
//!
//! The grid days of whichever series comes first in the pairing sit on a
//! fixed phase, which makes `corr(a, b)` at lag `n` bit-identical to
//! `corr(b, a)` at lag `-n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::pearson;
use crate::timeseries::{locf, PriceSeries};

/// Weekly, monthly and quarterly steps in days.
pub const DEFAULT_STEPS: [u32; 3] = [7, 30, 91];

/// Fewest increment pairs for which a coefficient is reported.
const MIN_PAIRS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagCorrelation {
    pub steps_days: Vec<u32>,
    /// `-max_lag..=max_lag` in days.
    pub lags: Vec<i64>,
    /// `coefficients[s][l]` for step `steps_days[s]` and lag `lags[l]`.
    pub coefficients: Vec<Vec<f64>>,
    /// Number of increment pairs behind each coefficient.
    pub pairs: Vec<Vec<usize>>,
    /// Lag of the largest `|coefficient|` per step.
    pub extremal_lag: Vec<i64>,
}

impl LagCorrelation {
    pub fn coefficient(&self, step_index: usize, lag: i64) -> Option<f64> {
        let offset = lag - self.lags.first()?;
        self.coefficients
            .get(step_index)?
            .get(usize::try_from(offset).ok()?)
            .copied()
    }
}

pub fn cross_correlation_lag(
    a: &PriceSeries,
    b: &PriceSeries,
    steps_days: &[u32],
    max_lag: u32,
    on_log: bool,
) -> Result<LagCorrelation> {
    if steps_days.is_empty() || steps_days.contains(&0) {
        return Err(Error::Config("increment steps must be positive".into()));
    }
    let (days_a, days_b) = (a.day_numbers(), b.day_numbers());
    let start = days_a[0].max(days_b[0]).ceil();
    let end = days_a[days_a.len() - 1].min(days_b[days_b.len() - 1]).floor();
    let largest = *steps_days.iter().max().expect("non-empty") as f64;
    let needed = 2.0 * max_lag as f64 + largest;
    if !(end - start >= needed) {
        return Err(Error::InsufficientOverlap(format!(
            "series overlap by {:.0} days; need {needed:.0} for max lag {max_lag} and step {largest}",
            (end - start).max(0.0)
        )));
    }

    let grid: Vec<f64> = (0..=(end - start) as usize).map(|k| start + k as f64).collect();
    let values = |s: &PriceSeries, days: &[f64]| -> Vec<f64> {
        let v = if on_log { s.log_prices() } else { s.prices().to_vec() };
        locf(days, &v, &grid)
            .into_iter()
            .map(|x| x.expect("grid starts inside both series"))
            .collect()
    };
    let va = values(a, &days_a);
    let vb = values(b, &days_b);
    let last = grid.len() - 1;

    let lags: Vec<i64> = (-(max_lag as i64)..=max_lag as i64).collect();
    let mut coefficients = Vec::with_capacity(steps_days.len());
    let mut pairs = Vec::with_capacity(steps_days.len());
    let mut extremal_lag = Vec::with_capacity(steps_days.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &step in steps_days {
        let s = step as usize;
        let mut row = Vec::with_capacity(lags.len());
        let mut counts = Vec::with_capacity(lags.len());
        for &lag in &lags {
            let shift = lag.unsigned_abs() as usize;
            xs.clear();
            ys.clear();
            let mut g = s;
            while g + shift <= last {
                let (ga, gb) = if lag >= 0 { (g, g + shift) } else { (g + shift, g) };
                xs.push(va[ga] - va[ga - s]);
                ys.push(vb[gb] - vb[gb - s]);
                g += s;
            }
            if xs.len() < MIN_PAIRS {
                return Err(Error::InsufficientOverlap(format!(
                    "only {} increment pairs at step {step} and lag {lag}",
                    xs.len()
                )));
            }
            let r = pearson(&xs, &ys).ok_or(Error::UndefinedCorrelation { step_days: step })?;
            row.push(r);
            counts.push(xs.len());
        }
        let best = (0..lags.len())
            .min_by(|&i, &j| {
                row[j]
                    .abs()
                    .total_cmp(&row[i].abs())
                    .then(lags[i].abs().cmp(&lags[j].abs()))
                    .then(lags[i].cmp(&lags[j]))
            })
            .expect("at least one lag");
        extremal_lag.push(lags[best]);
        coefficients.push(row);
        pairs.push(counts);
    }

    Ok(LagCorrelation {
        steps_days: steps_days.to_vec(),
        lags,
        coefficients,
        pairs,
        extremal_lag,
    })
}
