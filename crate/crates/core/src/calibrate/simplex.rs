//! Nelder-Mead restricted to the unit box.

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub converged: bool,
}

pub(crate) struct SimplexOptions {
    /// Initial edge length along each axis.
    pub step: Vec<f64>,
    /// Relative spread of vertex values that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
/// Vertices must also collapse to this diameter before stopping.
const MIN_DIAMETER: f64 = 1e-4;

fn clamp_unit(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
}

/// Minimizes `f` over `[0, 1]^d` starting at `start`. Trial points are
/// projected onto the box, so every evaluated point is feasible.
pub(crate) fn minimize(mut f: impl FnMut(&[f64]) -> f64, start: &[f64], opts: &SimplexOptions) -> SimplexResult {
    let d = start.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    let mut x0 = start.to_vec();
    clamp_unit(&mut x0);
    pts.push(x0.clone());
    for i in 0..d {
        let mut p = x0.clone();
        // Step inward when the start sits on the upper face.
        p[i] = if p[i] + opts.step[i] <= 1.0 {
            p[i] + opts.step[i]
        } else {
            p[i] - opts.step[i]
        };
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=d).collect();
    while iterations < opts.max_iter {
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[d];
        let second = order[d - 1];

        let spread = vals[worst] - vals[best];
        let diameter = pts
            .iter()
            .flat_map(|p| p.iter().zip(&pts[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= opts.tol * vals[best].abs() + 1e-15 && diameter <= MIN_DIAMETER {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..d)
            .map(|j| order[..d].iter().map(|&i| pts[i][j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&pts[worst]).map(|(c, w)| c + t * (c - w)).collect();
            clamp_unit(&mut p);
            p
        };

        let xr = along(REFLECT);
        let fr = f(&xr);
        if fr < vals[best] {
            let xe = along(EXPAND);
            let fe = f(&xe);
            if fe < fr {
                pts[worst] = xe;
                vals[worst] = fe;
            } else {
                pts[worst] = xr;
                vals[worst] = fr;
            }
            continue;
        }
        if fr < vals[second] {
            pts[worst] = xr;
            vals[worst] = fr;
            continue;
        }
        // Outside contraction if the reflection helped at all, inside otherwise.
        let xc = if fr < vals[worst] {
            along(CONTRACT * REFLECT)
        } else {
            along(-CONTRACT)
        };
        let fc = f(&xc);
        if fc < vals[worst].min(fr) {
            pts[worst] = xc;
            vals[worst] = fc;
            continue;
        }
        let anchor = pts[best].clone();
        for &i in &order[1..] {
            for j in 0..d {
                pts[i][j] = anchor[j] + SHRINK * (pts[i][j] - anchor[j]);
            }
            vals[i] = f(&pts[i]);
        }
    }

    let best = (0..=d)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)))
        .unwrap();
    SimplexResult {
        x: pts[best].clone(),
        f: vals[best],
        converged,
    }
}
