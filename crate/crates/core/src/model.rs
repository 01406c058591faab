//! The power-law singularity and LPPL log-price models, plus seeded
//! synthetic generators used as test oracles.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::{PriceSeries, Window};

/// Parameters of `ln p(t) = A + B (tc - t)^m [1 + C cos(omega ln(tc - t) + phi)]`.
///
/// The pure power law is the `c = 0` restriction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplParams {
    /// Log-price at the critical time.
    pub a: f64,
    /// Power-law amplitude; negative for a bubble.
    pub b: f64,
    /// Relative amplitude of the log-periodic oscillation.
    pub c: f64,
    /// Power-law exponent.
    pub m: f64,
    /// Angular log-frequency.
    pub omega: f64,
    /// Phase in `[0, 2pi)`.
    pub phi: f64,
    /// Critical time in decimal years.
    pub tc: f64,
}

impl LpplParams {
    pub fn power_law(a: f64, b: f64, m: f64, tc: f64) -> Self {
        Self {
            a,
            b,
            c: 0.0,
            m,
            omega: 0.0,
            phi: 0.0,
            tc,
        }
    }

    /// Checks the bubble-regime constraints: `0 < m < 1`, `B < 0`,
    /// `|C| < 1`, `omega > 0` (unless `C = 0`) and `phi` in `[0, 2pi)`.
    pub fn validate(&self) -> Result<()> {
        let fields = [self.a, self.b, self.c, self.m, self.omega, self.phi, self.tc];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("parameters must be finite"));
        }
        if !(self.m > 0.0 && self.m < 1.0) {
            return Err(Error::validation(format!("m = {} outside (0, 1)", self.m)));
        }
        if !(self.b < 0.0) {
            return Err(Error::validation(format!("B = {} is not negative", self.b)));
        }
        if !(self.c.abs() < 1.0) {
            return Err(Error::validation(format!("|C| = {} is not below 1", self.c.abs())));
        }
        if self.c != 0.0 && !(self.omega > 0.0) {
            return Err(Error::validation(format!("omega = {} is not positive", self.omega)));
        }
        if !(0.0..TAU).contains(&self.phi) {
            return Err(Error::validation(format!("phi = {} outside [0, 2pi)", self.phi)));
        }
        Ok(())
    }

    pub fn is_bubble(&self) -> bool {
        self.validate().is_ok()
    }
}

fn time_to_critical(tc: f64, t: f64) -> Result<f64> {
    let dt = tc - t;
    if dt > 0.0 {
        Ok(dt)
    } else {
        Err(Error::Domain(format!("t = {t} is not before tc = {tc}")))
    }
}

/// `A + B (tc - t)^m`. The oscillation parameters are ignored.
pub fn eval_power_law(params: &LpplParams, t: f64) -> Result<f64> {
    let dt = time_to_critical(params.tc, t)?;
    Ok(params.a + params.b * dt.powf(params.m))
}

pub fn eval_lppl(params: &LpplParams, t: f64) -> Result<f64> {
    let dt = time_to_critical(params.tc, t)?;
    let osc = 1.0 + params.c * (params.omega * dt.ln() + params.phi).cos();
    Ok(params.a + params.b * dt.powf(params.m) * osc)
}

/// Preferred scaling ratio `exp(2pi / omega)` of the log-periodic oscillations.
pub fn scaling_ratio(params: &LpplParams) -> f64 {
    (2.0 * PI / params.omega).exp()
}

/// Additive Gaussian noise on log-price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }
}

/// `n` equidistant samples of the LPPL model across `window`, inclusive of
/// both ends.
pub fn synth_lppl(params: &LpplParams, window: &Window, n: usize, noise: NoiseSpec) -> Result<PriceSeries> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 samples, got {n}")));
    }
    if !(window.t_start < window.t_last) {
        return Err(Error::Domain("window start must precede its end".into()));
    }
    let step = (window.t_last - window.t_start) / (n - 1) as f64;
    let times: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                window.t_last
            } else {
                window.t_start + i as f64 * step
            }
        })
        .collect();
    synth_lppl_at(params, &times, noise, "synthetic-lppl")
}

/// LPPL samples at arbitrary increasing times.
pub fn synth_lppl_at(params: &LpplParams, times: &[f64], noise: NoiseSpec, label: &str) -> Result<PriceSeries> {
    if let Some(&last) = times.last() {
        if last >= params.tc {
            return Err(Error::Domain(format!(
                "samples reach the critical time: last time {last} >= tc {}",
                params.tc
            )));
        }
    }
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::Domain(format!("noise sigma {} must be >= 0", noise.sigma)));
    }
    let mut log_prices = times
        .iter()
        .map(|&t| eval_lppl(params, t))
        .collect::<Result<Vec<_>>>()?;
    if noise.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let normal = Normal::new(0.0, noise.sigma).map_err(|e| Error::Domain(e.to_string()))?;
        for v in &mut log_prices {
            *v += normal.sample(&mut rng);
        }
    }
    let prices = log_prices.into_iter().map(f64::exp).collect();
    PriceSeries::new(times.to_vec(), prices, label)
}

/// Positive-feedback growth `dp/dt = c p^2`, solved in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackOde {
    pub p0: f64,
    pub c: f64,
}

impl FeedbackOde {
    pub fn new(p0: f64, c: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0.is_finite()) {
            return Err(Error::Domain(format!("p0 = {p0} must be positive")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("c = {c} must be positive")));
        }
        Ok(Self { p0, c })
    }

    /// Time at which the price diverges.
    pub fn singularity_time(&self) -> f64 {
        1.0 / (self.c * self.p0)
    }

    /// Price at elapsed time `t` from the initial condition.
    pub fn price_at(&self, t: f64) -> Result<f64> {
        if t >= self.singularity_time() {
            return Err(Error::Domain(format!(
                "t = {t} reaches the singularity at {}",
                self.singularity_time()
            )));
        }
        Ok(self.p0 / (1.0 - self.c * self.p0 * t))
    }
}

/// `n` samples at `t = 0, dt, 2dt, ...` of the feedback ODE.
pub fn synth_feedback_ode(p0: f64, c: f64, dt: f64, n: usize) -> Result<PriceSeries> {
    let ode = FeedbackOde::new(p0, c)?;
    if !(dt > 0.0) || n < 2 {
        return Err(Error::Domain("need dt > 0 and at least 2 samples".into()));
    }
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let prices = times.iter().map(|&t| ode.price_at(t)).collect::<Result<Vec<_>>>()?;
    PriceSeries::new(times, prices, "synthetic-feedback")
}
