#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use lppl_core::calendar::date_to_decimal_year;
use lppl_core::{LpplParams, PriceSeries};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Bubble parameters drawn well inside the default search box, for a window
/// ending at `t_last`.
pub fn random_bubble(rng: &mut impl Rng, t_last: f64) -> LpplParams {
    LpplParams {
        a: rng.random_range(3.0..6.0),
        b: rng.random_range(-1.2..-0.4),
        c: rng.random_range(0.04..0.12),
        m: rng.random_range(0.2..0.8),
        omega: rng.random_range(5.0..13.0),
        phi: rng.random_range(0.0..std::f64::consts::TAU),
        tc: t_last + rng.random_range(0.05..0.4),
    }
}

pub fn daily(start: NaiveDate, values: &[f64], label: &str) -> PriceSeries {
    let times = (0..values.len())
        .map(|i| date_to_decimal_year(start + Days::new(i as u64)))
        .collect();
    PriceSeries::new(times, values.to_vec(), label).unwrap()
}

pub fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Least-squares residual RMSE of the four-column LPPL design at fixed
/// nonlinear parameters, solved by SVD. `None` when the design is singular.
pub fn svd_rmse(times: &[f64], y: &[f64], tc: f64, m: f64, omega: f64) -> Option<f64> {
    let n = times.len();
    let x = DMatrix::from_fn(n, 4, |i, j| {
        let dt = tc - times[i];
        let f = dt.powf(m);
        match j {
            0 => 1.0,
            1 => f,
            2 => f * (omega * dt.ln()).cos(),
            _ => f * (omega * dt.ln()).sin(),
        }
    });
    let rhs = DVector::from_column_slice(y);
    let svd = x.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= sv.max() * 1e-12 {
        return None;
    }
    let beta = svd.solve(&rhs, 1e-14).ok()?;
    let r = rhs - x * beta;
    Some((r.norm_squared() / n as f64).sqrt())
}

pub fn angle_degrees(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot.abs() / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}
