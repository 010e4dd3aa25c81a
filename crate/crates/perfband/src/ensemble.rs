//! K-member ensemble over fold splits: member k trains on fold k and fits
//! its calibration table on the union of the other folds (one third of the
//! training data trains each network, two thirds validate its intervals).
//! Predictions average member means; intervals average the members'
//! zeta-scaled endpoints. The trained ensemble is the serializable artifact:
//! it embeds the original schema, the preprocessing drops it replays on raw
//! inputs, the output normalizer, and every member with its calibration
//! table and fold assignment.

use serde::{Deserialize, Serialize};

use crate::bnn::{
    predict_samples, train_bnn, BnnModel, PredictiveDistribution, DEFAULT_PREDICTIVE_SAMPLES,
};
use crate::calibration::{calibrate_member, CalibrationTable, DEFAULT_GRID_SIZE};
use crate::dataset::{
    kfold_split, normalize_performance, remove_collinear, Normalizer, OptionSchema,
    PerformanceDataset, PreprocessReport, DEFAULT_COLLINEARITY_TOL,
};
use crate::error::{Error, Result};
use crate::hpo::Hyperparams;
use crate::seeds;
use crate::stats::z_score;

pub const DEFAULT_FOLDS: usize = 3;

const STREAM_FOLDS: u64 = 0xF0;
const STREAM_MEMBER: u64 = 0x3E;
const STREAM_CALIB: u64 = 0xCA;
const STREAM_PREDICT: u64 = 0x9D;

/// Training-time knobs; defaults follow the pipeline constants (K = 3,
/// 300 predictive samples, levels 5..95, 200-point calibration grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub k: usize,
    pub seed: u64,
    pub samples: usize,
    pub levels: Vec<f64>,
    pub grid_size: usize,
    pub collinearity_tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            k: DEFAULT_FOLDS,
            seed: 0,
            samples: DEFAULT_PREDICTIVE_SAMPLES,
            levels: crate::calibration::default_levels(),
            grid_size: DEFAULT_GRID_SIZE,
            collinearity_tol: DEFAULT_COLLINEARITY_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions {
            samples: DEFAULT_PREDICTIVE_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub model: BnnModel,
    pub calibration: CalibrationTable,
    pub train_fold: Vec<usize>,
    pub eval_fold: Vec<usize>,
}

/// The trained prediction artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    /// Original option schema, before preprocessing drops.
    pub schema: OptionSchema,
    pub preprocess: PreprocessReport,
    /// Indices into `schema` of the columns the members consume.
    pub retained: Vec<usize>,
    pub normalizer: Normalizer,
    pub members: Vec<EnsembleMember>,
    pub k: usize,
    pub seed: u64,
}

/// Per-row prediction with calibrated and raw intervals at requested levels,
/// all in measured units, computed from one set of member distributions.
/// `per_member` carries each member's own intervals for member-level
/// reliability curves.
#[derive(Debug, Clone, PartialEq)]
pub struct RowEvaluation {
    pub prediction: f64,
    pub calibrated: Vec<(f64, f64)>,
    pub uncalibrated: Vec<(f64, f64)>,
    pub per_member: Vec<MemberIntervals>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberIntervals {
    pub calibrated: Vec<(f64, f64)>,
    pub uncalibrated: Vec<(f64, f64)>,
}

/// Preprocess the raw training data (collinearity drops + output
/// normalization fitted on the training set), split into K folds, train one
/// BNN per fold and calibrate it on the remaining folds. Deterministic given
/// `opts.seed`.
pub fn train_ensemble(
    train: &PerformanceDataset,
    hp: &Hyperparams,
    opts: &TrainOptions,
) -> Result<EnsembleModel> {
    if opts.k < 2 {
        return Err(Error::config(format!("K must be at least 2; got {}", opts.k)));
    }
    let n = train.len();
    if n < 3 * opts.k {
        return Err(Error::data(format!(
            "dataset too small: {n} points, need at least 3K = {}",
            3 * opts.k
        )));
    }
    let (pre, report) = remove_collinear(train, opts.collinearity_tol)?;
    let retained: Vec<usize> = pre
        .schema
        .options
        .iter()
        .map(|o| train.schema.index_of(&o.name).unwrap())
        .collect();
    crate::hpo::HpSpace::new(pre.width()).validate(hp)?;
    let (normalized, normalizer) = normalize_performance(&pre)?;
    let folds = kfold_split(n, opts.k, seeds::derive(opts.seed, STREAM_FOLDS))?;

    let mut members = Vec::with_capacity(opts.k);
    for (m, fold) in folds.iter().enumerate() {
        let member_seed = seeds::derive2(opts.seed, STREAM_MEMBER, m as u64);
        let train_part = normalized.subset(fold);
        let model = train_bnn(&train_part, hp, member_seed)?;

        let eval_fold: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != m)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        let mut eval_fold = eval_fold;
        eval_fold.sort_unstable();
        let mut preds = Vec::with_capacity(eval_fold.len());
        let mut truths = Vec::with_capacity(eval_fold.len());
        for (i, &row) in eval_fold.iter().enumerate() {
            let mut rng = seeds::rng_for(seeds::derive(member_seed, STREAM_CALIB), i as u64);
            preds.push(predict_samples(
                &model,
                &normalized.rows[row],
                opts.samples,
                &mut rng,
            )?);
            truths.push(normalized.performance[row]);
        }
        let calibration = calibrate_member(&preds, &truths, &opts.levels, opts.grid_size)?;
        members.push(EnsembleMember {
            model,
            calibration,
            train_fold: fold.clone(),
            eval_fold,
        });
    }

    Ok(EnsembleModel {
        schema: train.schema.clone(),
        preprocess: report,
        retained,
        normalizer,
        members,
        k: opts.k,
        seed: opts.seed,
    })
}

impl EnsembleModel {
    /// Validate a raw configuration against the original schema and replay
    /// the recorded preprocessing drops.
    pub fn project_input(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.schema.len() {
            return Err(Error::data(format!(
                "configuration has {} values but the schema has {} options",
                x.len(),
                self.schema.len()
            )));
        }
        Ok(self.retained.iter().map(|&j| x[j]).collect())
    }

    /// One predictive distribution per member for a projected input. The
    /// member stream is derived from the member's own training seed, so
    /// results do not depend on member order.
    fn member_distributions(
        &self,
        x_kept: &[f64],
        opts: &PredictOptions,
    ) -> Result<Vec<PredictiveDistribution>> {
        self.members
            .iter()
            .map(|m| {
                let stream = seeds::derive2(opts.seed, STREAM_PREDICT, m.model.meta.seed);
                predict_samples(&m.model, x_kept, opts.samples, &mut seeds::rng_for(stream, 0))
            })
            .collect()
    }

    /// Scalar prediction in measured units: mean of the member predictive
    /// means, denormalized.
    pub fn predict(&self, x: &[f64], opts: &PredictOptions) -> Result<f64> {
        let x_kept = self.project_input(x)?;
        let pds = self.member_distributions(&x_kept, opts)?;
        let mean = pds.iter().map(|p| p.mean()).sum::<f64>() / pds.len() as f64;
        Ok(self.normalizer.denormalize(mean))
    }

    /// Calibrated confidence interval in measured units.
    pub fn interval(&self, x: &[f64], rho: f64, opts: &PredictOptions) -> Result<(f64, f64)> {
        let x_kept = self.project_input(x)?;
        let pds = self.member_distributions(&x_kept, opts)?;
        self.combine_intervals(&pds, rho, true)
    }

    /// Interval without the calibration scaling (the raw z-score interval).
    pub fn interval_uncalibrated(
        &self,
        x: &[f64],
        rho: f64,
        opts: &PredictOptions,
    ) -> Result<(f64, f64)> {
        let x_kept = self.project_input(x)?;
        let pds = self.member_distributions(&x_kept, opts)?;
        self.combine_intervals(&pds, rho, false)
    }

    /// Prediction plus calibrated and raw intervals at every requested level,
    /// all from a single set of member distributions.
    pub fn evaluate_row(
        &self,
        x: &[f64],
        levels: &[f64],
        opts: &PredictOptions,
    ) -> Result<RowEvaluation> {
        let x_kept = self.project_input(x)?;
        let pds = self.member_distributions(&x_kept, opts)?;
        let mean = pds.iter().map(|p| p.mean()).sum::<f64>() / pds.len() as f64;
        let mut calibrated = Vec::with_capacity(levels.len());
        let mut uncalibrated = Vec::with_capacity(levels.len());
        for &rho in levels {
            calibrated.push(self.combine_intervals(&pds, rho, true)?);
            uncalibrated.push(self.combine_intervals(&pds, rho, false)?);
        }
        let mut per_member = Vec::with_capacity(self.members.len());
        for (member, pd) in self.members.iter().zip(&pds) {
            let mut cal = Vec::with_capacity(levels.len());
            let mut raw = Vec::with_capacity(levels.len());
            for &rho in levels {
                let z = z_score(rho);
                let hw = z * pd.total_sd();
                let zeta = member.calibration.zeta_at(rho)?;
                cal.push(
                    self.normalizer
                        .denormalize_interval(pd.mean() - zeta * hw, pd.mean() + zeta * hw)?,
                );
                raw.push(
                    self.normalizer
                        .denormalize_interval(pd.mean() - hw, pd.mean() + hw)?,
                );
            }
            per_member.push(MemberIntervals { calibrated: cal, uncalibrated: raw });
        }
        Ok(RowEvaluation {
            prediction: self.normalizer.denormalize(mean),
            calibrated,
            uncalibrated,
            per_member,
        })
    }

    fn combine_intervals(
        &self,
        pds: &[PredictiveDistribution],
        rho: f64,
        calibrated: bool,
    ) -> Result<(f64, f64)> {
        if !(rho > 0.0 && rho < 100.0) {
            return Err(Error::config(format!(
                "confidence level must lie in (0, 100); got {rho}"
            )));
        }
        let z = z_score(rho);
        let mut lo_sum = 0.0;
        let mut hi_sum = 0.0;
        for (member, pd) in self.members.iter().zip(pds) {
            let zeta = if calibrated {
                member.calibration.zeta_at(rho)?
            } else {
                1.0
            };
            let hw = zeta * z * pd.total_sd();
            lo_sum += pd.mean() - hw;
            hi_sum += pd.mean() + hw;
        }
        let k = pds.len() as f64;
        self.normalizer.denormalize_interval(lo_sum / k, hi_sum / k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::data(format!("cannot parse model JSON: {e}")))
    }
}
