use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lppl_core::calendar::parse_time;
use lppl_core::pca::PanelScaling;
use lppl_core::{FitConfig, GridSize};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "lppl", version, about = "Bubble diagnostics with the log-periodic power law")]
pub struct Cli {
    /// Directory that receives output files.
    #[arg(long, global = true, env = "LPPL_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Calibrate one window and write the fit record, plot data and residuals.
    Fit(FitArgs),
    /// Fit shrinking windows with a common end and summarise the critical times.
    Scan(ScanArgs),
    /// List peaks followed by a fast drawdown.
    Crashes(CrashArgs),
    /// Lagged cross-correlation of two series' increments.
    Lagcorr(LagArgs),
    /// First principal component of several series' log-returns.
    Pca(PcaArgs),
    /// Write a synthetic price series as CSV.
    #[command(subcommand)]
    Synth(SynthCommand),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Fit(_) => "fit",
            Command::Scan(_) => "scan",
            Command::Crashes(_) => "crashes",
            Command::Lagcorr(_) => "lagcorr",
            Command::Pca(_) => "pca",
            Command::Synth(SynthCommand::Lppl(_)) => "synth lppl",
            Command::Synth(SynthCommand::Feedback(_)) => "synth feedback",
        }
    }
}

/// A date (YYYY-MM-DD) or a decimal year.
fn time_arg(s: &str) -> Result<f64, String> {
    parse_time(s).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Lppl,
    PowerLaw,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FittedModel {
    Lppl,
    PowerLaw,
}

/// Overrides of the calibration defaults.
#[derive(Debug, Args, Serialize)]
pub struct FitOverrides {
    #[arg(long)]
    pub m_min: Option<f64>,
    #[arg(long)]
    pub m_max: Option<f64>,
    #[arg(long)]
    pub omega_min: Option<f64>,
    #[arg(long)]
    pub omega_max: Option<f64>,
    /// Earliest critical time, in years after the window end.
    #[arg(long)]
    pub tc_min: Option<f64>,
    /// Latest critical time, in years after the window end.
    #[arg(long)]
    pub tc_max: Option<f64>,
    #[arg(long)]
    pub grid_tc: Option<usize>,
    #[arg(long)]
    pub grid_m: Option<usize>,
    #[arg(long)]
    pub grid_omega: Option<usize>,
    /// Grid nodes refined locally.
    #[arg(long)]
    pub n_starts: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub rmse_tol: Option<f64>,
    /// Fewest observations a window may hold.
    #[arg(long)]
    pub min_points: Option<usize>,
}

impl FitOverrides {
    pub fn config(&self) -> FitConfig {
        let d = FitConfig::default();
        FitConfig {
            m_bounds: (self.m_min.unwrap_or(d.m_bounds.0), self.m_max.unwrap_or(d.m_bounds.1)),
            omega_bounds: (
                self.omega_min.unwrap_or(d.omega_bounds.0),
                self.omega_max.unwrap_or(d.omega_bounds.1),
            ),
            tc_bounds: (
                self.tc_min.unwrap_or(d.tc_bounds.0),
                self.tc_max.unwrap_or(d.tc_bounds.1),
            ),
            grid: GridSize {
                tc: self.grid_tc.unwrap_or(d.grid.tc),
                m: self.grid_m.unwrap_or(d.grid.m),
                omega: self.grid_omega.unwrap_or(d.grid.omega),
            },
            rmse_tol: self.rmse_tol.unwrap_or(d.rmse_tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            n_starts: self.n_starts.unwrap_or(d.n_starts),
            min_points: self.min_points.unwrap_or(d.min_points),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// CSV file with `date,price` rows.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Lppl)]
    pub model: ModelArg,
    /// Window start; defaults to the first observation.
    #[arg(long, value_parser = time_arg)]
    pub start: Option<f64>,
    /// Window end; defaults to the last observation.
    #[arg(long, value_parser = time_arg)]
    pub last: Option<f64>,
    #[command(flatten)]
    pub fit: FitOverrides,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FittedModel::Lppl)]
    pub model: FittedModel,
    /// Common window end; defaults to the last observation.
    #[arg(long, value_parser = time_arg)]
    pub t_last: Option<f64>,
    /// Either a count of evenly spaced starts between --earliest and
    /// --latest, or a comma-separated list of start times.
    #[arg(long)]
    pub starts: String,
    /// First start for a counted grid; defaults to the first observation.
    #[arg(long, value_parser = time_arg)]
    pub earliest: Option<f64>,
    /// Last start for a counted grid; defaults to halfway between
    /// --earliest and --t-last.
    #[arg(long, value_parser = time_arg)]
    pub latest: Option<f64>,
    #[command(flatten)]
    pub fit: FitOverrides,
}

#[derive(Debug, Args, Serialize)]
pub struct CrashArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Minimum fractional loss from peak to trough.
    #[arg(long, default_value_t = 0.15)]
    pub threshold: f64,
    /// Calendar days allowed from peak to trough.
    #[arg(long, default_value_t = 21.0)]
    pub horizon_days: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct LagArgs {
    /// Leading series.
    #[arg(long)]
    pub a: PathBuf,
    /// Series paired at a positive lag after `a`.
    #[arg(long)]
    pub b: PathBuf,
    /// Increment steps in days.
    #[arg(long, value_delimiter = ',', default_value = "7,30,91")]
    pub steps: Vec<u32>,
    #[arg(long, default_value_t = 60)]
    pub max_lag: u32,
    /// Use price increments instead of log-price increments.
    #[arg(long)]
    pub levels: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalingArg {
    Standardize,
    Demean,
}

impl From<ScalingArg> for PanelScaling {
    fn from(s: ScalingArg) -> Self {
        match s {
            ScalingArg::Standardize => PanelScaling::Standardize,
            ScalingArg::Demean => PanelScaling::Demean,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PcaArgs {
    /// Two or more CSV files; repeat the flag or separate with commas.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Grid step in days for the log-returns.
    #[arg(long, default_value_t = 1)]
    pub step_days: u32,
    /// `standardize` analyses correlations, `demean` covariances.
    #[arg(long, value_enum, default_value_t = ScalingArg::Standardize)]
    pub scaling: ScalingArg,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthCommand {
    /// LPPL log-price plus Gaussian noise, one point per step.
    Lppl(SynthLpplArgs),
    /// Closed-form solution of dp/dt = c p^2.
    Feedback(SynthFeedbackArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthLpplArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub c: f64,
    #[arg(long)]
    pub m: f64,
    #[arg(long, default_value_t = 0.0)]
    pub omega: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    #[arg(long, value_parser = time_arg)]
    pub tc: f64,
    #[arg(long, value_parser = time_arg)]
    pub start: f64,
    #[arg(long, value_parser = time_arg)]
    pub last: f64,
    /// Days between samples.
    #[arg(long, default_value_t = 1)]
    pub every_days: u32,
    /// Standard deviation of the log-price noise.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file name, relative to the output directory.
    #[arg(long, default_value = "synth.csv")]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthFeedbackArgs {
    #[arg(long)]
    pub p0: f64,
    /// Feedback coefficient, per unit price per year.
    #[arg(long)]
    pub c: f64,
    #[arg(long, value_parser = time_arg)]
    pub start: f64,
    #[arg(long, default_value_t = 1)]
    pub every_days: u32,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "synth.csv")]
    pub output: PathBuf,
}
