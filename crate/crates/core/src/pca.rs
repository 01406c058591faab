//! First principal component of a panel of asset returns, by power iteration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calendar;
use crate::error::{Error, Result};
use crate::timeseries::{locf, PriceSeries};

/// Fewest grid points an aligned panel may have.
pub const MIN_OVERLAP_POINTS: usize = 60;
/// Relative change in the eigenvalue at which power iteration stops.
pub const EIGEN_TOL: f64 = 1e-10;
/// Leading eigenvalues closer than this (relative) are considered tied.
pub const SEPARATION_TOL: f64 = 1e-8;
const MAX_POWER_ITER: usize = 200_000;
/// Base level of the rebuilt component series.
pub const COMPONENT_BASE: f64 = 100.0;

/// How return columns are normalised before the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PanelScaling {
    /// Zero mean, unit variance: the decomposition is of the correlation matrix.
    #[default]
    Standardize,
    /// Zero mean only: the decomposition is of the covariance matrix.
    Demean,
}

/// Aligned log-returns, one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetPanel {
    pub assets: Vec<String>,
    /// Grid times of the price levels; one more entry than `matrix` has rows.
    pub times: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub scaling: PanelScaling,
}

impl AssetPanel {
    /// Normalises raw returns column by column.
    pub fn from_returns(
        assets: Vec<String>,
        times: Vec<f64>,
        returns: DMatrix<f64>,
        scaling: PanelScaling,
    ) -> Result<Self> {
        let (n, k) = returns.shape();
        if assets.len() != k || times.len() != n + 1 {
            return Err(Error::validation("panel labels or times do not match the matrix shape"));
        }
        if n < 2 || k < 1 {
            return Err(Error::validation("panel needs at least 2 rows and 1 column"));
        }
        let mut matrix = returns;
        for (j, mut col) in matrix.column_iter_mut().enumerate() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            if scaling == PanelScaling::Standardize {
                let sd = (col.norm_squared() / (n - 1) as f64).sqrt();
                // Relative to the level so a constant column's rounding residue counts as zero.
                if !(sd > 1e-12 * (mean.abs() + sd) && sd.is_finite()) {
                    return Err(Error::validation(format!(
                        "asset '{}' has zero return variance",
                        assets[j]
                    )));
                }
                col /= sd;
            }
        }
        Ok(Self {
            assets,
            times,
            matrix,
            scaling,
        })
    }

    /// Sample covariance of the normalised columns.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.matrix.nrows();
        self.matrix.tr_mul(&self.matrix) / (n - 1) as f64
    }
}

/// Aligns series on a common grid of `step_days` over their overlap and
/// takes log-returns.
pub fn build_panel(series: &[PriceSeries], step_days: u32, scaling: PanelScaling) -> Result<AssetPanel> {
    if series.len() < 2 {
        return Err(Error::InsufficientOverlap("a panel needs at least 2 series".into()));
    }
    if step_days == 0 {
        return Err(Error::Config("grid step must be positive".into()));
    }
    let days: Vec<Vec<f64>> = series.iter().map(|s| s.day_numbers()).collect();
    let start = days.iter().map(|d| d[0]).fold(f64::NEG_INFINITY, f64::max).ceil();
    let end = days
        .iter()
        .map(|d| d[d.len() - 1])
        .fold(f64::INFINITY, f64::min)
        .floor();
    let points = if end >= start {
        ((end - start) / step_days as f64).floor() as usize + 1
    } else {
        0
    };
    if points < MIN_OVERLAP_POINTS {
        return Err(Error::InsufficientOverlap(format!(
            "common span has {points} grid points, need {MIN_OVERLAP_POINTS}"
        )));
    }
    let grid: Vec<f64> = (0..points)
        .map(|i| start + (i as u64 * step_days as u64) as f64)
        .collect();

    let mut returns = DMatrix::zeros(points - 1, series.len());
    for (j, (s, d)) in series.iter().zip(&days).enumerate() {
        let levels: Vec<f64> = locf(d, &s.log_prices(), &grid)
            .into_iter()
            .map(|v| v.expect("grid inside every series"))
            .collect();
        for (i, w) in levels.windows(2).enumerate() {
            returns[(i, j)] = w[1] - w[0];
        }
    }
    let times = grid.iter().map(|&d| calendar::day_number_to_decimal_year(d)).collect();
    let assets = series.iter().map(|s| s.label().to_string()).collect();
    AssetPanel::from_returns(assets, times, returns, scaling)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalComponent {
    /// Unit-norm loadings; the largest-magnitude entry is positive.
    pub weights: Vec<f64>,
    pub eigenvalue: f64,
    /// `eigenvalue / trace(covariance)`.
    pub explained_fraction: f64,
    /// `COMPONENT_BASE * exp(cumulative projected returns)`.
    pub component_series: PriceSeries,
    pub iterations: usize,
}

struct Eigenpair {
    value: f64,
    vector: DVector<f64>,
    iterations: usize,
    converged: bool,
}

fn power_iteration(cov: &DMatrix<f64>) -> Eigenpair {
    let k = cov.nrows();
    // Start from the covariance row with the largest norm.
    let row = (0..k)
        .max_by(|&a, &b| cov.row(a).norm().total_cmp(&cov.row(b).norm()).then(b.cmp(&a)))
        .unwrap_or(0);
    let mut v: DVector<f64> = cov.row(row).transpose();
    let norm = v.norm();
    if norm == 0.0 {
        return Eigenpair {
            value: 0.0,
            vector: DVector::from_element(k, 1.0 / (k as f64).sqrt()),
            iterations: 0,
            converged: true,
        };
    }
    v /= norm;
    let mut value = v.dot(&(cov * &v));
    for it in 1..=MAX_POWER_ITER {
        let w = cov * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Eigenpair {
                value: 0.0,
                vector: v,
                iterations: it,
                converged: true,
            };
        }
        let next = w / norm;
        let next_value = next.dot(&(cov * &next));
        let residual = (cov * &next - &next * next_value).norm();
        let scale = next_value.abs().max(f64::MIN_POSITIVE);
        let settled = (next_value - value).abs() <= EIGEN_TOL * scale && residual <= EIGEN_TOL * scale;
        v = next;
        value = next_value;
        if settled {
            return Eigenpair {
                value,
                vector: v,
                iterations: it,
                converged: true,
            };
        }
    }
    Eigenpair {
        value,
        vector: v,
        iterations: MAX_POWER_ITER,
        converged: false,
    }
}

pub fn first_principal_component(panel: &AssetPanel) -> Result<PrincipalComponent> {
    let cov = panel.covariance();
    let trace = cov.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateSpectrum("covariance has zero trace".into()));
    }
    let lead = power_iteration(&cov);
    if !lead.converged {
        return Err(Error::DegenerateSpectrum(format!(
            "power iteration did not settle in {MAX_POWER_ITER} steps"
        )));
    }
    if cov.nrows() > 1 {
        let deflated = &cov - &lead.vector * lead.vector.transpose() * lead.value;
        let second = power_iteration(&deflated);
        let gap = (lead.value - second.value.abs()) / lead.value;
        if gap < SEPARATION_TOL {
            return Err(Error::DegenerateSpectrum(format!(
                "leading eigenvalues {} and {} are not separated",
                lead.value, second.value
            )));
        }
    }

    let mut w = lead.vector;
    let pivot = w.iamax();
    if w[pivot] < 0.0 {
        w.neg_mut();
    }
    let projected = &panel.matrix * &w;
    let mut level = 0.0;
    let mut prices = Vec::with_capacity(projected.len() + 1);
    prices.push(COMPONENT_BASE);
    for r in projected.iter() {
        level += r;
        prices.push(COMPONENT_BASE * level.exp());
    }
    let component_series = PriceSeries::new(panel.times.clone(), prices, "first-component")?;
    Ok(PrincipalComponent {
        weights: w.iter().copied().collect(),
        eigenvalue: lead.value,
        explained_fraction: lead.value / trace,
        component_series,
        iterations: lead.iterations,
    })
}
