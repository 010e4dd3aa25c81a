//! Evaluation metrics and statistical comparison: MAPE, the calibration
//! score over a ladder of confidence levels, repeat summaries with 95%
//! margins, and Welch's t-test.

use serde::{Deserialize, Serialize};

use crate::calibration::observed_frequency;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance, t_cdf, t_quantile};

///Mean absolute percentage error, in percent. Points with a zero truth are
/// excluded (the ratio is undefined there); use [`mape_counting`] to observe
/// how many were skipped.
pub fn mape(predicted: &[f64], truths: &[f64]) -> Result<f64> {
    mape_counting(predicted, truths).map(|(m, _)| m)
}

/// MAPE plus the number of zero-truth points excluded.
pub fn mape_counting(predicted: &[f64], truths: &[f64]) -> Result<(f64, usize)> {
    if predicted.is_empty() || predicted.len() != truths.len() {
        return Err(Error::data(format!(
            "{} predictions but {} truths",
            predicted.len(),
            truths.len()
        )));
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for (&p, &t) in predicted.iter().zip(truths) {
        if t == 0.0 {
            continue;
        }
        total += (p - t).abs() / t.abs();
        used += 1;
    }
    if used == 0 {
        return Err(Error::data("all truths are zero; MAPE is undefined"));
    }
    Ok((total / used as f64 * 100.0, truths.len() - used))
}

/// Calibration score over per-level observed frequencies:
/// `sum_j w_j ((rho_j - alpha_j) / 100)^2 * 100`. Zero iff perfectly
/// calibrated at every level.
pub fn cal_score_from_curve(levels: &[f64], alphas: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if levels.is_empty() || levels.len() != alphas.len() {
        return Err(Error::data("levels and observed frequencies must align"));
    }
    if let Some(w) = weights {
        if w.len() != levels.len() {
            return Err(Error::data("weights must align with levels"));
        }
    }
    let mut total = 0.0;
    for (j, (&rho, &alpha)) in levels.iter().zip(alphas).enumerate() {
        let w = weights.map_or(1.0, |w| w[j]);
        let d = (rho - alpha) / 100.0;
        total += w * d * d;
    }
    Ok(total * 100.0)
}

/// Calibration score of an interval generator on a test set: for every level,
/// generate intervals for all rows, measure the observed frequency, then
/// aggregate with [`cal_score_from_curve`].
pub fn cal_score<F>(
    mut interval_fn: F,
    rows: &[Vec<f64>],
    truths: &[f64],
    levels: &[f64],
    weights: Option<&[f64]>,
) -> Result<f64>
where
    F: FnMut(&[f64], f64) -> Result<(f64, f64)>,
{
    if rows.is_empty() || rows.len() != truths.len() {
        return Err(Error::data("test set must be non-empty with aligned truths"));
    }
    let mut alphas = Vec::with_capacity(levels.len());
    for &rho in levels {
        let intervals: Vec<(f64, f64)> = rows
            .iter()
            .map(|x| interval_fn(x, rho))
            .collect::<Result<_>>()?;
        alphas.push(observed_frequency(&intervals, truths)?);
    }
    cal_score_from_curve(levels, &alphas, weights)
}

/// Scores over repeated runs with their mean and the half-width of the 95%
/// confidence interval (`t_{0.975, r-1} * sd / sqrt(r)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub scores: Vec<f64>,
    pub mean: f64,
    pub margin: f64,
}

pub fn summarize(scores: &[f64]) -> Result<EvalSummary> {
    if scores.len() < 2 {
        return Err(Error::data("need at least 2 repeats to summarize"));
    }
    let m = mean(scores);
    let sd = sample_variance(scores).sqrt();
    let df = (scores.len() - 1) as f64;
    let margin = t_quantile(0.975, df) * sd / (scores.len() as f64).sqrt();
    Ok(EvalSummary {
        scores: scores.to_vec(),
        mean: m,
        margin,
    })
}

/// Outcome of a two-sided Welch comparison of score samples (lower is better).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelchDecision {
    ABetter,
    BBetter,
    Same,
}

/// Welch's t-test with Welch-Satterthwaite degrees of freedom at significance
/// `alpha`; `Same` when the two-sided p-value is at least `alpha`.
pub fn welch_t_test(a: &[f64], b: &[f64], alpha: f64) -> Result<WelchDecision> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::data("each sample needs at least 2 values"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("significance level must lie in (0, 1)"));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        // both samples constant: identical means are indistinguishable,
        // different means trivially separated
        return Ok(if ma == mb {
            WelchDecision::Same
        } else if ma < mb {
            WelchDecision::ABetter
        } else {
            WelchDecision::BBetter
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let p = 2.0 * (1.0 - t_cdf(t.abs(), df));
    Ok(if p >= alpha {
        WelchDecision::Same
    } else if ma < mb {
        WelchDecision::ABetter
    } else {
        WelchDecision::BBetter
    })
}
