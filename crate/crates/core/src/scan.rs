//! Shrinking-window critical-time ensembles and the super-exponential
//! diagnostic.

use serde::{Deserialize, Serialize};

use crate::calibrate::{fit_exponential, fit_window, FitConfig, FitResult, ModelKind};
use crate::error::{Error, Result};
use crate::stats::quantile_sorted;
use crate::timeseries::{make_windows, PriceSeries, Window};

pub const HISTOGRAM_BINS: usize = 25;
/// Minimum number of usable critical-time estimates in an ensemble.
pub const MIN_ENSEMBLE: usize = 3;
/// Lower and upper quantiles of the reported interval.
pub const CI_QUANTILES: (f64, f64) = (0.1, 0.9);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Equal-width bins over `[lo, hi]`; values outside are ignored and the
    /// upper edge is included in the last bin.
    pub fn new(values: &[f64], (lo, hi): (f64, f64), bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect();
        let mut counts = vec![0; bins];
        for &v in values {
            if v < lo || v > hi {
                continue;
            }
            let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
            counts[idx] += 1;
        }
        Self { edges, counts }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub model: ModelKind,
    pub t_last: f64,
    /// One fit per admissible window, ordered by window start.
    pub fits: Vec<FitResult>,
    /// Grid starts that left too few observations.
    pub dropped_starts: Vec<f64>,
    /// Critical times of the converged fits with a bubble signature.
    pub tc_samples: Vec<f64>,
    /// 10% and 90% empirical quantiles of `tc_samples`.
    pub ci80: (f64, f64),
    pub median_tc: f64,
    pub tc_histogram: Histogram,
}

/// Fits every window `[start, t_last]` for the given starts and aggregates
/// the critical-time estimates.
pub fn scan_shrinking_windows(
    series: &PriceSeries,
    t_last: f64,
    start_grid: &[f64],
    model: ModelKind,
    config: &FitConfig,
) -> Result<ScanReport> {
    config.validate()?;
    let set = make_windows(series, t_last, start_grid, config.min_points)?;
    let mut windows = set.windows;
    windows.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));

    let mut fits = Vec::with_capacity(windows.len());
    for window in &windows {
        match fit_window(series, window, model, config) {
            Ok(fit) => fits.push(fit),
            Err(Error::FitFailure(_) | Error::DegenerateWindow { .. }) => {}
            Err(e) => return Err(e),
        }
    }

    let mut tc_samples: Vec<f64> = fits.iter().filter(|f| f.is_usable()).map(|f| f.params.tc).collect();
    if tc_samples.len() < MIN_ENSEMBLE {
        return Err(Error::InsufficientEnsemble {
            usable: tc_samples.len(),
            fits,
        });
    }
    let mut sorted = tc_samples.clone();
    sorted.sort_by(f64::total_cmp);
    let ci80 = (
        quantile_sorted(&sorted, CI_QUANTILES.0),
        quantile_sorted(&sorted, CI_QUANTILES.1),
    );
    let median_tc = quantile_sorted(&sorted, 0.5);
    let tc_histogram = Histogram::new(&tc_samples, config.tc_range(t_last), HISTOGRAM_BINS);
    tc_samples.shrink_to_fit();

    Ok(ScanReport {
        model,
        t_last,
        fits,
        dropped_starts: set.dropped,
        tc_samples,
        ci80,
        median_tc,
        tc_histogram,
    })
}

/// Evenly spaced starts from `earliest` to `latest`, inclusive.
pub fn start_grid(earliest: f64, latest: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![earliest],
        _ => (0..count)
            .map(|i| earliest + (latest - earliest) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Exponential against power-law comparison on one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperExponentialDiagnostic {
    pub exponential_rmse: f64,
    pub power_law_rmse: f64,
    /// `power_law_rmse / exponential_rmse`; 1 when both vanish.
    pub rmse_ratio: f64,
    pub growth_rate: f64,
    pub m: f64,
    pub b: f64,
    /// Power law beats the exponential with `B < 0` and `m` clear of its bounds.
    pub super_exponential: bool,
}

/// Margin by which `m` must clear the search bounds to count as interior.
pub const M_INTERIOR_MARGIN: f64 = 0.01;

pub fn super_exponential_diagnostic(
    series: &PriceSeries,
    window: &Window,
    config: &FitConfig,
) -> Result<SuperExponentialDiagnostic> {
    let exp = fit_exponential(series, window)?;
    let pl = fit_window(series, window, ModelKind::PowerLaw, config)?;
    let rmse_ratio = if exp.rmse > 0.0 {
        pl.rmse / exp.rmse
    } else if pl.rmse == 0.0 {
        1.0
    } else {
        f64::INFINITY
    };
    let m = pl.params.m;
    let interior = m > config.m_bounds.0 + M_INTERIOR_MARGIN && m < config.m_bounds.1 - M_INTERIOR_MARGIN;
    Ok(SuperExponentialDiagnostic {
        exponential_rmse: exp.rmse,
        power_law_rmse: pl.rmse,
        rmse_ratio,
        growth_rate: exp.growth_rate,
        m,
        b: pl.params.b,
        super_exponential: pl.rmse < exp.rmse && pl.params.b < 0.0 && interior,
    })
}
