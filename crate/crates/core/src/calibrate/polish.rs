//! Levenberg-Marquardt refinement over all model parameters with the
//! analytic Jacobian. Run after the simplex so the final point is fixed by
//! the normal equations rather than by comparisons of objective values.

use nalgebra::{DMatrix, DVector};

use super::{ModelKind, Problem};

pub(crate) struct PolishResult {
    /// `(tc offset, m, omega)`; omega is unused for the power law.
    pub nonlinear: [f64; 3],
    pub converged: bool,
    pub evals: usize,
}

const STEP_TOL: f64 = 1e-13;
const MAX_DAMPING: f64 = 1e12;

/// Linear coefficients first, then the nonlinear ones.
fn pack(kind: ModelKind, lin: [f64; 4], nl: [f64; 3]) -> Vec<f64> {
    match kind {
        ModelKind::Lppl => vec![lin[0], lin[1], lin[2], lin[3], nl[0], nl[1], nl[2]],
        ModelKind::PowerLaw => vec![lin[0], lin[1], nl[0], nl[1]],
    }
}

fn nonlinear_of(kind: ModelKind, theta: &[f64]) -> [f64; 3] {
    match kind {
        ModelKind::Lppl => [theta[4], theta[5], theta[6]],
        ModelKind::PowerLaw => [theta[2], theta[3], 0.0],
    }
}

/// Residuals `model - y`, optionally with the Jacobian. `None` when the
/// parameters leave the model's domain.
fn evaluate(problem: &Problem, theta: &[f64], r: &mut DVector<f64>, jac: Option<&mut DMatrix<f64>>) -> Option<f64> {
    let kind = problem.kind;
    let nl = nonlinear_of(kind, theta);
    let (tc, m, omega) = (nl[0], nl[1], nl[2]);
    let (a, b) = (theta[0], theta[1]);
    let (c1, c2) = match kind {
        ModelKind::Lppl => (theta[2], theta[3]),
        ModelKind::PowerLaw => (0.0, 0.0),
    };
    let mut jac = jac;
    let mut rss = 0.0;
    for (i, (&tau, &y)) in problem.tau.iter().zip(&problem.y).enumerate() {
        let x = tc - tau;
        if !(x > 0.0) {
            return None;
        }
        let ln_x = x.ln();
        let f = (m * ln_x).exp();
        let (s, c) = (omega * ln_x).sin_cos();
        let g = b + c1 * c + c2 * s;
        let model = a + f * g;
        let res = model - y;
        r[i] = res;
        rss += res * res;
        if let Some(j) = jac.as_deref_mut() {
            let osc_rate = c2 * c - c1 * s;
            let d_tc = m * f / x * g + f * omega / x * osc_rate;
            let d_m = f * ln_x * g;
            j[(i, 0)] = 1.0;
            j[(i, 1)] = f;
            match kind {
                ModelKind::Lppl => {
                    j[(i, 2)] = f * c;
                    j[(i, 3)] = f * s;
                    j[(i, 4)] = d_tc;
                    j[(i, 5)] = d_m;
                    j[(i, 6)] = f * ln_x * osc_rate;
                }
                ModelKind::PowerLaw => {
                    j[(i, 2)] = d_tc;
                    j[(i, 3)] = d_m;
                }
            }
        }
    }
    rss.is_finite().then_some(rss)
}

pub(crate) fn polish(problem: &Problem, lin: [f64; 4], start: [f64; 3], max_iter: usize) -> PolishResult {
    let kind = problem.kind;
    let n = problem.tau.len();
    let p = match kind {
        ModelKind::Lppl => 7,
        ModelKind::PowerLaw => 4,
    };
    let mut theta = pack(kind, lin, start);
    let mut r = DVector::zeros(n);
    let mut jac = DMatrix::zeros(n, p);
    let mut trial_r = DVector::zeros(n);
    let mut evals = 1;
    let Some(mut rss) = evaluate(problem, &theta, &mut r, Some(&mut jac)) else {
        return PolishResult {
            nonlinear: start,
            converged: false,
            evals,
        };
    };

    let mut damping = 1e-3;
    let mut converged = false;
    for _ in 0..max_iter {
        let jtj = jac.tr_mul(&jac);
        let grad = jac.tr_mul(&r);
        let mut lhs = jtj.clone();
        for d in 0..p {
            lhs[(d, d)] += damping * jtj[(d, d)].max(1e-300);
        }
        let Some(chol) = lhs.cholesky() else {
            damping *= 10.0;
            if damping > MAX_DAMPING {
                break;
            }
            continue;
        };
        let step = chol.solve(&(-grad));
        let small = step
            .iter()
            .zip(&theta)
            .all(|(d, t)| d.abs() <= STEP_TOL * (t.abs() + 1.0));
        if small {
            converged = true;
            break;
        }
        let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, d)| t + d).collect();
        let nl = nonlinear_of(kind, &trial);
        let inside = problem.bounds.contains(kind, &nl);
        evals += 1;
        let trial_rss = if inside {
            evaluate(problem, &trial, &mut trial_r, None)
        } else {
            None
        };
        match trial_rss {
            // Allow rounding-level increases so Gauss-Newton can settle on the stationary point.
            Some(v) if v <= rss * (1.0 + 1e-14) + 1e-300 => {
                theta = trial;
                rss = evaluate(problem, &theta, &mut r, Some(&mut jac)).unwrap_or(v);
                damping = (damping / 10.0).max(1e-12);
            }
            _ => {
                damping *= 10.0;
                if damping > MAX_DAMPING {
                    // No descent direction left at this precision.
                    converged = true;
                    break;
                }
            }
        }
    }

    PolishResult {
        nonlinear: nonlinear_of(kind, &theta),
        converged,
        evals,
    }
}
