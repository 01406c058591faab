//! Least-squares calibration of the power-law and LPPL models to a window
//! of log-prices.
//!
//! The four linear coefficients are eliminated in closed form (see
//! [`linear`]), which leaves a search over `(tc, m, omega)`. That search
//! runs a coarse grid, then a bounded simplex from the best few
//! well-separated grid nodes, then a Levenberg-Marquardt polish over all
//! parameters. Everything is deterministic for a given configuration.
//!
//! Internally times are measured from the window's `t_last` and log-prices
//! are centred, so shifting the time axis or rescaling prices changes the
//! numerical problem only at rounding level.

pub mod linear;
mod polish;
mod simplex;

use std::cell::Cell;
use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

pub use linear::{solve_linear_subproblem, solve_power_law_subproblem, LinearSolution};

use crate::error::{Error, Result};
use crate::model::LpplParams;
use crate::timeseries::{PriceSeries, Window, DEFAULT_MIN_POINTS};
use linear::Workspace;

/// Smallest admissible `tc - t_last`, in years. Keeps `ln(tc - t)` finite
/// at the last observation.
pub const MIN_TC_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `A + B (tc - t)^m`
    PowerLaw,
    /// `A + B (tc - t)^m [1 + C cos(omega ln(tc - t) + phi)]`
    Lppl,
}

impl ModelKind {
    fn n_linear(self) -> usize {
        match self {
            ModelKind::PowerLaw => 2,
            ModelKind::Lppl => 4,
        }
    }

    fn n_nonlinear(self) -> usize {
        match self {
            ModelKind::PowerLaw => 2,
            ModelKind::Lppl => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    pub tc: usize,
    pub m: usize,
    pub omega: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub m_bounds: (f64, f64),
    pub omega_bounds: (f64, f64),
    /// Critical-time search range as offsets in years after the window end.
    pub tc_bounds: (f64, f64),
    pub grid: GridSize,
    /// Relative RMSE spread at which the simplex stops.
    pub rmse_tol: f64,
    pub max_iter: usize,
    /// Number of grid nodes refined locally.
    pub n_starts: usize,
    pub min_points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            m_bounds: (0.01, 0.99),
            omega_bounds: (2.0, 25.0),
            tc_bounds: (0.0, 0.5),
            grid: GridSize {
                tc: 20,
                m: 15,
                omega: 15,
            },
            rmse_tol: 1e-8,
            max_iter: 500,
            n_starts: 5,
            min_points: DEFAULT_MIN_POINTS,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |name: &str, (lo, hi): (f64, f64)| {
            if lo.is_finite() && hi.is_finite() && lo < hi {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} bounds ({lo}, {hi}) are not an ordered interval"
                )))
            }
        };
        ordered("m", self.m_bounds)?;
        ordered("omega", self.omega_bounds)?;
        ordered("tc", self.tc_bounds)?;
        if !(self.m_bounds.0 > 0.0 && self.m_bounds.1 < 1.0) {
            return Err(Error::Config("m bounds must lie inside (0, 1)".into()));
        }
        if !(self.omega_bounds.0 > 0.0) {
            return Err(Error::Config("omega bounds must be positive".into()));
        }
        if !(self.tc_bounds.0 >= 0.0 && self.tc_bounds.1 > MIN_TC_OFFSET) {
            return Err(Error::Config(format!(
                "tc offsets must satisfy 0 <= lower and upper > {MIN_TC_OFFSET}"
            )));
        }
        if self.grid.tc < 2 || self.grid.m < 2 || self.grid.omega < 2 {
            return Err(Error::Config("grid sizes must be at least 2".into()));
        }
        if !(self.rmse_tol > 0.0) || self.max_iter == 0 || self.n_starts == 0 {
            return Err(Error::Config(
                "tolerance, iteration and start counts must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn search_box(&self) -> SearchBox {
        SearchBox {
            tc_offset: (self.tc_bounds.0.max(MIN_TC_OFFSET), self.tc_bounds.1),
            m: self.m_bounds,
            omega: self.omega_bounds,
        }
    }

    /// Absolute critical-time range searched for windows ending at `t_last`.
    pub fn tc_range(&self, t_last: f64) -> (f64, f64) {
        let b = self.search_box().tc_offset;
        (t_last + b.0, t_last + b.1)
    }
}

/// The feasible region of the nonlinear parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBox {
    pub tc_offset: (f64, f64),
    pub m: (f64, f64),
    pub omega: (f64, f64),
}

impl SearchBox {
    fn axes(&self) -> [(f64, f64); 3] {
        [self.tc_offset, self.m, self.omega]
    }

    pub(crate) fn contains(&self, kind: ModelKind, nl: &[f64; 3]) -> bool {
        self.axes()
            .iter()
            .zip(nl)
            .take(kind.n_nonlinear())
            .all(|(&(lo, hi), &v)| v >= lo && v <= hi)
    }

    fn unit_to_box(&self, u: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, (&(lo, hi), &ui)) in self.axes().iter().zip(u).enumerate() {
            out[i] = lo + ui * (hi - lo);
        }
        out
    }

    fn box_to_unit(&self, nl: &[f64; 3], d: usize) -> Vec<f64> {
        self.axes()
            .iter()
            .zip(nl)
            .take(d)
            .map(|(&(lo, hi), &v)| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
            .collect()
    }
}

/// Calibrated parameters and fit quality for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: LpplParams,
    /// Root-mean-square log-price residual.
    pub rmse: f64,
    pub n_points: usize,
    pub window: Window,
    pub converged: bool,
    /// `B < 0`, `0 < m < 1` and `|C| < 1`.
    pub bubble_signature: bool,
    pub objective_evals: usize,
}

impl FitResult {
    /// Converged with a bubble signature, i.e. usable as a critical-time estimate.
    pub fn is_usable(&self) -> bool {
        self.converged && self.bubble_signature
    }
}

/// One evaluated node of the coarse grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridNode {
    pub model: ModelKind,
    pub tc: f64,
    pub m: f64,
    pub omega: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FitTrace {
    pub nodes: Vec<GridNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Log-price growth per year.
    pub growth_rate: f64,
    /// Log-price at `t = 0`, so that `ln p ~ intercept + growth_rate * t`.
    pub intercept: f64,
    pub rmse: f64,
}

/// Ordinary least squares of log-price on time over the window.
pub fn fit_exponential(series: &PriceSeries, window: &Window) -> Result<ExponentialFit> {
    check_window(series, window, 2)?;
    let problem = Problem::new(
        series,
        window,
        ModelKind::PowerLaw,
        SearchBox {
            tc_offset: (0.0, 1.0),
            m: (0.0, 1.0),
            omega: (0.0, 1.0),
        },
    );
    let line = problem.linear_trend()?;
    let t_mean_abs = problem.t_ref + problem.tau.iter().sum::<f64>() / problem.tau.len() as f64;
    let y_at_mean = problem.y_mean + line.value_at_mean;
    Ok(ExponentialFit {
        growth_rate: line.slope,
        intercept: y_at_mean - line.slope * t_mean_abs,
        rmse: line.rmse,
    })
}

pub fn fit_window(series: &PriceSeries, window: &Window, model: ModelKind, config: &FitConfig) -> Result<FitResult> {
    fit_window_traced(series, window, model, config).map(|(fit, _)| fit)
}

/// [`fit_window`] that also returns every evaluated grid node.
pub fn fit_window_traced(
    series: &PriceSeries,
    window: &Window,
    model: ModelKind,
    config: &FitConfig,
) -> Result<(FitResult, FitTrace)> {
    config.validate()?;
    check_window(series, window, config.min_points.max(ModelKind::Lppl.n_linear() + 1))?;
    let bounds = config.search_box();
    let mut trace = FitTrace::default();
    let evals = Cell::new(0usize);

    let pl_problem = Problem::new(series, window, ModelKind::PowerLaw, bounds);
    let mut power_law = search(&pl_problem, config, &[], &mut trace, &evals)?;
    // A straight line in log-price is the m -> 1 edge of the power-law family.
    let line = pl_problem.linear_trend()?;
    if line.rmse < power_law.rmse {
        power_law = Candidate {
            nonlinear: [bounds.tc_offset.1, 1.0, 0.0],
            linear: [
                line.value_at_mean - line.slope * pl_problem.tau_mean() + line.slope * bounds.tc_offset.1,
                -line.slope,
                0.0,
                0.0,
            ],
            rmse: line.rmse,
            converged: true,
        };
    }

    let best = match model {
        ModelKind::PowerLaw => power_law,
        ModelKind::Lppl => {
            let problem = Problem::new(series, window, ModelKind::Lppl, bounds);
            let mut seeds = Vec::new();
            if bounds.contains(ModelKind::PowerLaw, &power_law.nonlinear) {
                seeds.push(best_omega_seed(&problem, config, power_law.nonlinear, &evals));
            }
            let lppl = search(&problem, config, &seeds, &mut trace, &evals)?;
            if lppl.rmse <= power_law.rmse {
                lppl
            } else {
                power_law
            }
        }
    };

    let fit = finalize(&pl_problem, model, best, window, evals.get());
    Ok((fit, trace))
}

fn check_window(series: &PriceSeries, window: &Window, min_points: usize) -> Result<()> {
    if window.end > series.len() || window.start > window.end {
        return Err(Error::Domain(format!(
            "window [{}, {}) outside series of length {}",
            window.start,
            window.end,
            series.len()
        )));
    }
    if window.len() < min_points {
        return Err(Error::Domain(format!(
            "window holds {} observations, need at least {min_points}",
            window.len()
        )));
    }
    let last = series.times()[window.end - 1];
    if last > window.t_last {
        return Err(Error::Domain(format!(
            "window observations run past t_last ({last} > {})",
            window.t_last
        )));
    }
    Ok(())
}

/// Window data in fitting coordinates.
pub(crate) struct Problem {
    /// `t - t_ref`, all `<= 0`.
    pub tau: Vec<f64>,
    /// Centred log-prices.
    pub y: Vec<f64>,
    pub y_mean: f64,
    pub t_ref: f64,
    pub kind: ModelKind,
    pub bounds: SearchBox,
}

struct LinearTrend {
    slope: f64,
    /// Fitted centred log-price at the mean of `tau`.
    value_at_mean: f64,
    rmse: f64,
}

impl Problem {
    fn new(series: &PriceSeries, window: &Window, kind: ModelKind, bounds: SearchBox) -> Self {
        let (times, prices) = series.window_slices(window);
        let t_ref = window.t_last;
        let tau: Vec<f64> = times.iter().map(|&t| t - t_ref).collect();
        let logs: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
        let y_mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let y = logs.iter().map(|v| v - y_mean).collect();
        Self {
            tau,
            y,
            y_mean,
            t_ref,
            kind,
            bounds,
        }
    }

    fn tau_mean(&self) -> f64 {
        self.tau.iter().sum::<f64>() / self.tau.len() as f64
    }

    fn linear_trend(&self) -> Result<LinearTrend> {
        let n = self.tau.len() as f64;
        let tm = self.tau_mean();
        let ym = self.y.iter().sum::<f64>() / n;
        let sxx: f64 = self.tau.iter().map(|t| (t - tm).powi(2)).sum();
        if !(sxx > 0.0) {
            return Err(Error::FitFailure("window has no time spread".into()));
        }
        let sxy: f64 = self.tau.iter().zip(&self.y).map(|(t, y)| (t - tm) * (y - ym)).sum();
        let slope = sxy / sxx;
        let rss: f64 = self
            .tau
            .iter()
            .zip(&self.y)
            .map(|(t, y)| (y - ym - slope * (t - tm)).powi(2))
            .sum();
        Ok(LinearTrend {
            slope,
            value_at_mean: ym,
            rmse: (rss / n).sqrt(),
        })
    }

    /// Linear solve at one nonlinear point; `None` if degenerate.
    fn solve(&self, ws: &mut Workspace, x: &mut [f64], nl: &[f64; 3]) -> Option<LinearSolution> {
        for (xi, &t) in x.iter_mut().zip(&self.tau) {
            *xi = nl[0] - t;
        }
        let omega = (self.kind == ModelKind::Lppl).then_some(nl[2]);
        ws.fill(x, nl[1], omega);
        ws.y.copy_from_slice(&self.y);
        ws.solve(self.kind.n_linear()).ok().filter(|s| s.rmse.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    nonlinear: [f64; 3],
    linear: [f64; 4],
    rmse: f64,
    converged: bool,
}

/// Total order on `(rmse, tc, m, omega)` so ties resolve the same way
/// whatever the evaluation order.
fn rank(a: &(f64, [f64; 3]), b: &(f64, [f64; 3])) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1[0].total_cmp(&b.1[0]))
        .then(a.1[1].total_cmp(&b.1[1]))
        .then(a.1[2].total_cmp(&b.1[2]))
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

fn as_array(s: &LinearSolution) -> [f64; 4] {
    [s.a, s.b, s.c1, s.c2]
}

/// Best omega on the grid for a fixed `(tc, m)`, as an extra start.
fn best_omega_seed(problem: &Problem, config: &FitConfig, pl: [f64; 3], evals: &Cell<usize>) -> [f64; 3] {
    let n = problem.tau.len();
    let mut ws = Workspace::new(n);
    let mut x = vec![0.0; n];
    let mut best = (f64::INFINITY, [pl[0], pl[1], problem.bounds.omega.0]);
    for omega in linspace(problem.bounds.omega, config.grid.omega) {
        let nl = [pl[0], pl[1], omega];
        evals.set(evals.get() + 1);
        if let Some(sol) = problem.solve(&mut ws, &mut x, &nl) {
            let cand = (sol.rmse, nl);
            if rank(&cand, &best) == Ordering::Less {
                best = cand;
            }
        }
    }
    best.1
}

fn search(
    problem: &Problem,
    config: &FitConfig,
    extra_starts: &[[f64; 3]],
    trace: &mut FitTrace,
    evals: &Cell<usize>,
) -> Result<Candidate> {
    let kind = problem.kind;
    let k = kind.n_linear();
    let d = kind.n_nonlinear();
    let n = problem.tau.len();
    let bounds = problem.bounds;
    let tcs = linspace(bounds.tc_offset, config.grid.tc);
    let ms = linspace(bounds.m, config.grid.m);
    let omegas = match kind {
        ModelKind::Lppl => linspace(bounds.omega, config.grid.omega),
        ModelKind::PowerLaw => vec![0.0],
    };

    let mut ws = Workspace::new(n);
    let mut ln_x = vec![0.0; n];
    let mut f = vec![0.0; n];
    // (rmse, nonlinear point, grid index)
    let mut nodes: Vec<(f64, [f64; 3], [usize; 3])> = Vec::with_capacity(tcs.len() * ms.len() * omegas.len());
    for (i, &tc) in tcs.iter().enumerate() {
        for (l, &t) in ln_x.iter_mut().zip(&problem.tau) {
            *l = (tc - t).ln();
        }
        for (j, &m) in ms.iter().enumerate() {
            for (fi, &l) in f.iter_mut().zip(&ln_x) {
                *fi = (m * l).exp();
            }
            for (w, &omega) in omegas.iter().enumerate() {
                ws.fill_cached(&ln_x, &f, (kind == ModelKind::Lppl).then_some(omega));
                ws.y.copy_from_slice(&problem.y);
                evals.set(evals.get() + 1);
                let rmse = match ws.solve(k) {
                    Ok(s) if s.rmse.is_finite() => s.rmse,
                    _ => continue,
                };
                let nl = [tc, m, omega];
                trace.nodes.push(GridNode {
                    model: kind,
                    tc: problem.t_ref + tc,
                    m,
                    omega,
                    rmse,
                });
                nodes.push((rmse, nl, [i, j, w]));
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::FitFailure(
            "no grid node gave a well-conditioned linear subproblem".into(),
        ));
    }
    nodes.sort_by(|a, b| rank(&(a.0, a.1), &(b.0, b.1)));

    // Best nodes that are not grid neighbours of an already chosen start.
    let mut starts: Vec<[f64; 3]> = Vec::new();
    let mut chosen: Vec<[usize; 3]> = Vec::new();
    for (_, nl, idx) in &nodes {
        let near = chosen
            .iter()
            .any(|c| c.iter().zip(idx).all(|(a, b)| a.abs_diff(*b) <= 1));
        if !near {
            chosen.push(*idx);
            starts.push(*nl);
            if starts.len() == config.n_starts {
                break;
            }
        }
    }
    starts.extend_from_slice(extra_starts);

    let grid_len = [config.grid.tc, config.grid.m, config.grid.omega];
    let opts = simplex::SimplexOptions {
        step: grid_len.iter().take(d).map(|&g| 0.5 / (g - 1) as f64).collect(),
        tol: config.rmse_tol,
        max_iter: config.max_iter,
    };

    let mut x = vec![0.0; n];
    let mut best: Option<Candidate> = None;
    for start in starts {
        let mut objective = |u: &[f64]| {
            evals.set(evals.get() + 1);
            let nl = bounds.unit_to_box(u);
            problem.solve(&mut ws, &mut x, &nl).map_or(f64::INFINITY, |s| s.rmse)
        };
        let nm = simplex::minimize(&mut objective, &bounds.box_to_unit(&start, d), &opts);
        if !nm.f.is_finite() {
            continue;
        }
        let mut nl = bounds.unit_to_box(&nm.x);
        if kind == ModelKind::PowerLaw {
            nl[2] = 0.0;
        }
        let Some(sol) = problem.solve(&mut ws, &mut x, &nl) else {
            continue;
        };
        let mut cand = Candidate {
            nonlinear: nl,
            linear: as_array(&sol),
            rmse: sol.rmse,
            converged: nm.converged,
        };

        let polished = polish::polish(problem, cand.linear, nl, config.max_iter);
        evals.set(evals.get() + polished.evals);
        if let Some(sol) = problem.solve(&mut ws, &mut x, &polished.nonlinear) {
            if sol.rmse <= cand.rmse {
                cand = Candidate {
                    nonlinear: polished.nonlinear,
                    linear: as_array(&sol),
                    rmse: sol.rmse,
                    converged: cand.converged || polished.converged,
                };
            }
        }

        let better = match &best {
            None => true,
            Some(b) => rank(&(cand.rmse, cand.nonlinear), &(b.rmse, b.nonlinear)) == Ordering::Less,
        };
        if better {
            best = Some(cand);
        }
    }

    // Refinement never returns worse than the best grid node.
    let (rmse0, nl0, _) = nodes[0];
    match best {
        Some(b) if b.rmse <= rmse0 => Ok(b),
        _ => {
            let sol = problem
                .solve(&mut ws, &mut x, &nl0)
                .ok_or_else(|| Error::FitFailure("best grid node became degenerate".into()))?;
            Ok(Candidate {
                nonlinear: nl0,
                linear: as_array(&sol),
                rmse: sol.rmse,
                converged: false,
            })
        }
    }
}

fn finalize(problem: &Problem, model: ModelKind, cand: Candidate, window: &Window, evals: usize) -> FitResult {
    let lin = LinearSolution {
        a: cand.linear[0],
        b: cand.linear[1],
        c1: cand.linear[2],
        c2: cand.linear[3],
        rmse: cand.rmse,
    };
    let (c, phi) = lin.amplitude_and_phase();
    let params = LpplParams {
        a: lin.a + problem.y_mean,
        b: lin.b,
        c,
        m: cand.nonlinear[1],
        omega: if c == 0.0 { 0.0 } else { cand.nonlinear[2] },
        phi,
        tc: problem.t_ref + cand.nonlinear[0],
    };
    FitResult {
        model,
        params,
        rmse: cand.rmse,
        n_points: problem.tau.len(),
        window: *window,
        converged: cand.converged,
        bubble_signature: params.is_bubble(),
        objective_evals: evals,
    }
}
