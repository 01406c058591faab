//! Bubble diagnostics built on the log-periodic power law (LPPL).
//!
//! * [`timeseries`]: price series ingestion, windows and increments.
//! * [`model`]: the power-law and LPPL log-price models and synthetic generators.
//! * [`calibrate`]: least-squares calibration of a single window.
//! * [`scan`]: shrinking-window ensembles of critical-time estimates.
//! * [`crash`]: drawdown-based crash detection.
//! * [`lagcorr`]: lagged cross-correlation of increments.
//! * [`pca`]: first principal component of a multi-asset panel.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calendar;
pub mod calibrate;
pub mod crash;
pub mod error;
pub mod lagcorr;
pub mod model;
pub mod pca;
pub mod scan;
pub mod stats;
pub mod timeseries;

pub use calibrate::{
    fit_exponential, fit_window, fit_window_traced, solve_linear_subproblem, ExponentialFit, FitConfig, FitResult,
    GridSize, LinearSolution, ModelKind,
};
pub use crash::{detect_crashes, CrashConfig, CrashEvent};
pub use error::{Error, Result};
pub use lagcorr::{cross_correlation_lag, LagCorrelation};
pub use model::{
    eval_lppl, eval_power_law, scaling_ratio, synth_feedback_ode, synth_lppl, FeedbackOde, LpplParams, NoiseSpec,
};
pub use pca::{build_panel, first_principal_component, AssetPanel, PrincipalComponent};
pub use scan::{scan_shrinking_windows, super_exponential_diagnostic, ScanReport, SuperExponentialDiagnostic};
pub use timeseries::{increments, load_csv, log_prices, make_windows, CsvConfig, PriceSeries, Window, WindowSet};
