//! Comparison baselines used by the evaluation harness: a linear
//! least-squares / ridge model for scalar-accuracy comparisons, and a plain
//! level-remapping calibrator (the textbook recalibration recipe, without
//! interval scaling) for calibration comparisons.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, chol_solve};

/// Linear model `y = w . x + intercept`, fitted by (regularized) normal
/// equations. `lambda = 0` is ordinary least squares; a small escalating
/// jitter keeps the system solvable when columns are nearly dependent.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBaseline {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearBaseline {
    pub fn fit(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::data("baseline fit needs aligned non-empty data"));
        }
        let d = xs[0].len() + 1; // intercept column
        let n = xs.len();
        let mut xtx = vec![vec![0.0; d]; d];
        let mut xty = vec![0.0; d];
        for (x, &y) in xs.iter().zip(ys) {
            let mut row = Vec::with_capacity(d);
            row.push(1.0);
            row.extend_from_slice(x);
            for i in 0..d {
                for j in 0..=i {
                    xtx[i][j] += row[i] * row[j];
                }
                xty[i] += row[i] * y;
            }
        }
        for i in 0..d {
            for j in i + 1..d {
                xtx[i][j] = xtx[j][i];
            }
            if i > 0 {
                xtx[i][i] += lambda; // do not penalize the intercept
            }
        }
        let mut jitter = 0.0;
        let sol = loop {
            let mut a = xtx.clone();
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += jitter;
            }
            if let Some(l) = cholesky(&a) {
                break chol_solve(&l, &xty);
            }
            jitter = if jitter == 0.0 { 1e-10 * n as f64 } else { jitter * 10.0 };
            if jitter > 1e-2 * n as f64 {
                return Err(Error::numerical("normal equations are singular"));
            }
        };
        Ok(LinearBaseline {
            intercept: sol[0],
            weights: sol[1..].to_vec(),
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Plain level remapping: for a target level rho, find the level rho_cal
/// whose intervals cover rho percent of the held-out truths, by bisection on
/// the (monotone) coverage curve. No interval scaling is involved, so when
/// even the widest interval misses most truths the remap saturates --
/// exactly the failure mode the scaling-factor approach avoids.
pub fn remap_level<F>(mut coverage_at: F, rho: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let mut lo = 0.1;
    let mut hi = 99.9;
    if coverage_at(hi) <= rho {
        return hi;
    }
    if coverage_at(lo) >= rho {
        return lo;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if coverage_at(mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
