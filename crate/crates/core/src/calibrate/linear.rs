//! Closed-form solution of the parameters that enter the model linearly.
//!
//! With `x = tc - t`, `f = x^m` and `L = ln x` the LPPL log-price is
//! `A + B f + C1 f cos(omega L) + C2 f sin(omega L)`, where
//! `C1 = B C cos(phi)` and `C2 = -B C sin(phi)`. For fixed `(tc, m, omega)`
//! this is ordinary least squares in `(A, B, C1, C2)`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Design matrices with a larger condition number are treated as rank deficient.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSolution {
    pub a: f64,
    pub b: f64,
    pub c1: f64,
    pub c2: f64,
    /// Root-mean-square residual in log-price units.
    pub rmse: f64,
}

impl LinearSolution {
    /// Relative oscillation amplitude `C >= 0` and phase `phi` in `[0, 2pi)`.
    ///
    /// The phase absorbs the sign of `B`, so `B C cos(phi) = C1` and
    /// `-B C sin(phi) = C2` hold for either sign of `B`.
    pub fn amplitude_and_phase(&self) -> (f64, f64) {
        let norm = self.c1.hypot(self.c2);
        if self.b == 0.0 || norm == 0.0 {
            return (0.0, 0.0);
        }
        let s = self.b.signum();
        (norm / self.b.abs(), normalize_phase((-self.c2 * s).atan2(self.c1 * s)))
    }
}

pub(crate) fn normalize_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Least-squares `(A, B, C1, C2)` at fixed `(tc, m, omega)` for log-prices
/// observed at absolute `times`.
pub fn solve_linear_subproblem(
    times: &[f64],
    log_prices: &[f64],
    tc: f64,
    m: f64,
    omega: f64,
) -> Result<LinearSolution> {
    solve_at(times, log_prices, tc, m, Some(omega))
}

/// As [`solve_linear_subproblem`] with `C` fixed at zero.
pub fn solve_power_law_subproblem(times: &[f64], log_prices: &[f64], tc: f64, m: f64) -> Result<LinearSolution> {
    solve_at(times, log_prices, tc, m, None)
}

fn solve_at(times: &[f64], log_prices: &[f64], tc: f64, m: f64, omega: Option<f64>) -> Result<LinearSolution> {
    if times.len() != log_prices.len() {
        return Err(Error::validation("times and log-prices differ in length"));
    }
    let k = if omega.is_some() { 4 } else { 2 };
    if times.len() < k {
        return Err(Error::DegenerateWindow {
            condition: f64::INFINITY,
        });
    }
    if let Some(&t) = times.iter().find(|&&t| !(t < tc)) {
        return Err(Error::Domain(format!("t = {t} is not before tc = {tc}")));
    }
    let x: Vec<f64> = times.iter().map(|&t| tc - t).collect();
    let mut ws = Workspace::new(times.len());
    ws.fill(&x, m, omega);
    ws.y.copy_from_slice(log_prices);
    ws.solve(k).map_err(|condition| Error::DegenerateWindow { condition })
}

/// Reusable buffers for repeated solves over the same sample size.
#[derive(Debug, Clone)]
pub(crate) struct Workspace {
    n: usize,
    /// Column-major `n x 4` design.
    cols: Vec<f64>,
    pub(crate) y: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            cols: vec![0.0; 4 * n],
            y: vec![0.0; n],
        }
    }

    /// Writes the basis columns for distances-to-critical `x`.
    pub(crate) fn fill(&mut self, x: &[f64], m: f64, omega: Option<f64>) {
        let n = self.n;
        let (c0, rest) = self.cols.split_at_mut(n);
        let (c1, rest) = rest.split_at_mut(n);
        let (c2, c3) = rest.split_at_mut(n);
        for i in 0..n {
            let ln_x = x[i].ln();
            let f = (m * ln_x).exp();
            c0[i] = 1.0;
            c1[i] = f;
            if let Some(w) = omega {
                let (s, c) = (w * ln_x).sin_cos();
                c2[i] = f * c;
                c3[i] = f * s;
            }
        }
    }

    /// Like [`fill`](Self::fill) but with `ln x` and `x^m` precomputed.
    pub(crate) fn fill_cached(&mut self, ln_x: &[f64], f: &[f64], omega: Option<f64>) {
        let n = self.n;
        let (c0, rest) = self.cols.split_at_mut(n);
        let (c1, rest) = rest.split_at_mut(n);
        let (c2, c3) = rest.split_at_mut(n);
        c0.fill(1.0);
        c1.copy_from_slice(f);
        if let Some(w) = omega {
            for i in 0..n {
                let (s, c) = (w * ln_x[i]).sin_cos();
                c2[i] = f[i] * c;
                c3[i] = f[i] * s;
            }
        }
    }

    /// Householder QR on the first `k` equilibrated columns. Destroys the
    /// design and `y`. Returns the condition number on failure.
    pub(crate) fn solve(&mut self, k: usize) -> std::result::Result<LinearSolution, f64> {
        let n = self.n;
        let mut scale = [0.0f64; 4];
        for (col, s) in self.cols.chunks_exact_mut(n).take(k).zip(&mut scale) {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(f64::INFINITY);
            }
            *s = 1.0 / norm;
            col.iter_mut().for_each(|v| *v *= *s);
        }

        let mut r = [[0.0f64; 4]; 4];
        for j in 0..k {
            let (head, tail) = self.cols.split_at_mut((j + 1) * n);
            let v = &mut head[j * n + j..(j + 1) * n];
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(f64::INFINITY);
            }
            let alpha = if v[0] > 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vtv = v.iter().map(|x| x * x).sum::<f64>();
            r[j][j] = alpha;
            for l in j + 1..k {
                let col = &mut tail[(l - j - 1) * n + j..(l - j) * n];
                let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                let s = 2.0 * dot / vtv;
                col.iter_mut().zip(v.iter()).for_each(|(c, a)| *c -= s * a);
                r[j][l] = col[0];
            }
            let yv = &mut self.y[j..];
            let dot: f64 = v.iter().zip(yv.iter()).map(|(a, b)| a * b).sum();
            let s = 2.0 * dot / vtv;
            yv.iter_mut().zip(v.iter()).for_each(|(c, a)| *c -= s * a);
        }

        let condition = condition_number(&r, k);
        if !(condition <= MAX_CONDITION) {
            return Err(condition);
        }

        let mut coef = [0.0f64; 4];
        for j in (0..k).rev() {
            let mut acc = self.y[j];
            for l in j + 1..k {
                acc -= r[j][l] * coef[l];
            }
            coef[j] = acc / r[j][j];
        }
        for j in 0..k {
            coef[j] *= scale[j];
        }
        let rss: f64 = self.y[k..].iter().map(|v| v * v).sum();
        Ok(LinearSolution {
            a: coef[0],
            b: coef[1],
            c1: coef[2],
            c2: coef[3],
            rmse: (rss / n as f64).sqrt(),
        })
    }
}

fn condition_number(r: &[[f64; 4]; 4], k: usize) -> f64 {
    let m = DMatrix::from_fn(k, k, |i, j| if j >= i { r[i][j] } else { 0.0 });
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
