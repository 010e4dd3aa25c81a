//! Confidence-interval calibration by halfwidth scaling.
//!
//! For each confidence level rho, a scaling factor zeta is fitted on held-out
//! data so that intervals `mean ± zeta * halfwidth` cover the truths close to
//! rho percent of the time. The search runs over a log-spaced grid on
//! `[0.01 zeta_max, 10 zeta_max]`, where zeta_max is the smallest factor that
//! covers every held-out truth; ties resolve toward the smallest (tightest)
//! factor.

use serde::{Deserialize, Serialize};

use crate::bnn::PredictiveDistribution;
use crate::error::{Error, Result};
use crate::stats::z_score;

/// Default number of grid points for the scaling-factor search.
pub const DEFAULT_GRID_SIZE: usize = 200;

/// Default calibration levels, in percent: 5, 10, ..., 95.
pub fn default_levels() -> Vec<f64> {
    (1..=19).map(|j| 5.0 * j as f64).collect()
}

/// Per-level interval scaling factors for one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    levels: Vec<f64>,
    zetas: Vec<f64>,
    zeta_max_used: Vec<f64>,
}

impl CalibrationTable {
    pub fn new(levels: Vec<f64>, zetas: Vec<f64>, zeta_max_used: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || levels.len() != zetas.len() || levels.len() != zeta_max_used.len() {
            return Err(Error::config("calibration table columns must be non-empty and aligned"));
        }
        if levels.windows(2).any(|w| !(w[0] < w[1]))
            || levels.iter().any(|&l| !(l > 0.0 && l < 100.0))
        {
            return Err(Error::config(
                "calibration levels must be strictly increasing within (0, 100)",
            ));
        }
        if zetas.iter().chain(&zeta_max_used).any(|&z| !(z > 0.0)) {
            return Err(Error::config("scaling factors must be positive"));
        }
        Ok(CalibrationTable {
            levels,
            zetas,
            zeta_max_used,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn zetas(&self) -> &[f64] {
        &self.zetas
    }

    pub fn zeta_max_used(&self) -> &[f64] {
        &self.zeta_max_used
    }

    /// Scaling factor at an arbitrary level: exact at fitted levels,
    /// piecewise-linear between them, clamped to the end values outside.
    pub fn zeta_at(&self, rho: f64) -> Result<f64> {
        if !(rho > 0.0 && rho < 100.0) {
            return Err(Error::config(format!(
                "confidence level must lie in (0, 100); got {rho}"
            )));
        }
        let levels = &self.levels;
        if rho <= levels[0] {
            return Ok(self.zetas[0]);
        }
        if rho >= levels[levels.len() - 1] {
            return Ok(self.zetas[levels.len() - 1]);
        }
        let hi = levels.partition_point(|&l| l < rho);
        if levels[hi] == rho {
            return Ok(self.zetas[hi]);
        }
        let lo = hi - 1;
        let w = (rho - levels[lo]) / (levels[hi] - levels[lo]);
        Ok(self.zetas[lo] + w * (self.zetas[hi] - self.zetas[lo]))
    }
}

/// Percent of truths inside their (closed) intervals.
pub fn observed_frequency(intervals: &[(f64, f64)], truths: &[f64]) -> Result<f64> {
    if intervals.is_empty() || intervals.len() != truths.len() {
        return Err(Error::data(format!(
            "{} intervals but {} truths",
            intervals.len(),
            truths.len()
        )));
    }
    if intervals.iter().any(|&(lo, hi)| lo > hi) {
        return Err(Error::data("interval endpoints out of order"));
    }
    let inside = intervals
        .iter()
        .zip(truths)
        .filter(|(&(lo, hi), &t)| lo <= t && t <= hi)
        .count();
    Ok(inside as f64 / truths.len() as f64 * 100.0)
}

/// The smallest halfwidth multiplier that makes every interval
/// `mean ± zeta * halfwidth` contain its truth: `max |truth - mean| / hw`.
/// Falls back to 1 when all residuals are zero.
pub fn zeta_max(means: &[f64], halfwidths: &[f64], truths: &[f64]) -> Result<f64> {
    if means.is_empty() || means.len() != halfwidths.len() || means.len() != truths.len() {
        return Err(Error::data("means, halfwidths and truths must have equal non-zero length"));
    }
    if halfwidths.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::numerical("zero or negative interval halfwidth"));
    }
    let max = means
        .iter()
        .zip(halfwidths)
        .zip(truths)
        .map(|((&m, &h), &t)| (t - m).abs() / h)
        .fold(0.0, f64::max);
    Ok(if max == 0.0 { 1.0 } else { max })
}

/// Grid-search the scaling factor minimizing `|rho - alpha(zeta)|` over a
/// log-spaced grid on `[0.01 zeta_max, 10 zeta_max]`. Ties break toward the
/// smallest factor.
pub fn search_scaling(
    means: &[f64],
    halfwidths: &[f64],
    truths: &[f64],
    rho: f64,
    grid_size: usize,
) -> Result<f64> {
    if grid_size < 2 {
        return Err(Error::config("grid size must be at least 2"));
    }
    let zmax = zeta_max(means, halfwidths, truths)?;
    let lo = 0.01 * zmax;
    let hi = 10.0 * zmax;
    let log_step = (hi / lo).ln() / (grid_size - 1) as f64;
    let mut best_zeta = lo;
    let mut best_gap = f64::INFINITY;
    for i in 0..grid_size {
        let zeta = lo * (log_step * i as f64).exp();
        let intervals: Vec<(f64, f64)> = means
            .iter()
            .zip(halfwidths)
            .map(|(&m, &h)| (m - zeta * h, m + zeta * h))
            .collect();
        let alpha = observed_frequency(&intervals, truths)?;
        let gap = (rho - alpha).abs();
        if gap < best_gap {
            best_gap = gap;
            best_zeta = zeta;
        }
    }
    Ok(best_zeta)
}

/// Fit the full calibration table for one member: per level, halfwidths are
/// `z(rho) * total_sd` of each held-out predictive distribution.
pub fn calibrate_member(
    predictions: &[PredictiveDistribution],
    truths: &[f64],
    levels: &[f64],
    grid_size: usize,
) -> Result<CalibrationTable> {
    if predictions.is_empty() || predictions.len() != truths.len() {
        return Err(Error::data("calibration needs a non-empty aligned evaluation set"));
    }
    if levels.is_empty() {
        return Err(Error::config("need at least one calibration level"));
    }
    let means: Vec<f64> = predictions.iter().map(|p| p.mean()).collect();
    let sds: Vec<f64> = predictions.iter().map(|p| p.total_sd()).collect();
    let mut zetas = Vec::with_capacity(levels.len());
    let mut zmaxes = Vec::with_capacity(levels.len());
    for &rho in levels {
        if !(rho > 0.0 && rho < 100.0) {
            return Err(Error::config(format!(
                "confidence level must lie in (0, 100); got {rho}"
            )));
        }
        let z = z_score(rho);
        let halfwidths: Vec<f64> = sds.iter().map(|&s| z * s).collect();
        zmaxes.push(zeta_max(&means, &halfwidths, truths)?);
        zetas.push(search_scaling(&means, &halfwidths, truths, rho, grid_size)?);
    }
    CalibrationTable::new(levels.to_vec(), zetas, zmaxes)
}
