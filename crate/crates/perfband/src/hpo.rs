//! Hyperparameter tuning: Bayesian optimization with a Gaussian-process
//! surrogate and expected improvement, wrapped in an incremental layer-growth
//! search. Depth grows one layer at a time, each depth getting a fresh
//! 4-random + 12-iteration BO run scored by validation MAPE; growth stops at
//! the first depth whose best score is worse than the previous depth's. The
//! final pass re-tunes the chosen depth for 8 more iterations with a GP over
//! every evaluation gathered so far (depth is an input dimension).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bnn::{predict_samples, train_bnn, DEFAULT_PREDICTIVE_SAMPLES};
use crate::dataset::{normalize_performance, PerformanceDataset};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, chol_solve, forward_sub};
use crate::metrics::mape;
use crate::seeds;
use crate::stats::{normal_cdf, normal_pdf};

pub const EPOCH_CHOICES: [usize; 3] = [500, 1000, 2000];
pub const LR_MIN: f64 = 1e-4;
pub const LR_MAX: f64 = 0.1;
pub const LAPLACE_MIN: f64 = 1e-4;
pub const LAPLACE_MAX: f64 = 1.0;
pub const NEURON_MULTIPLIERS: [usize; 3] = [1, 2, 4];
/// Hard cap on network depth during layer growth (the stopping rule fires
/// long before this in practice).
pub const MAX_DEPTH: usize = 16;

/// Evaluations per depth during layer growth: 4 random + 12 BO iterations.
pub const BO_INIT_POINTS: usize = 4;
pub const BO_GROWTH_ITERS: usize = 12;
/// Extra BO iterations in the final warm-started pass.
pub const BO_FINAL_ITERS: usize = 8;

const PROPOSAL_CANDIDATES: usize = 2048;

const STREAM_SPLIT: u64 = 0x5011;
const STREAM_BO_INIT: u64 = 1;
const STREAM_BO_ITER: u64 = 2;
const STREAM_DEPTH_BASE: u64 = 0xD000;
const STREAM_FINAL: u64 = 0xF1A1;

/// One BNN training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub depth: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub neurons_per_layer: usize,
    pub laplace_scale: f64,
}

/// Search domain, parameterized by the post-preprocessing option count `n`
/// (neurons per layer range over {n, 2n, 4n}).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HpSpace {
    pub n_options: usize,
}

impl HpSpace {
    pub fn new(n_options: usize) -> Self {
        HpSpace { n_options }
    }

    pub fn neuron_choices(&self) -> [usize; 3] {
        [
            self.n_options,
            2 * self.n_options,
            4 * self.n_options,
        ]
    }

    pub fn validate(&self, hp: &Hyperparams) -> Result<()> {
        if hp.depth < 1 || hp.depth > MAX_DEPTH {
            return Err(Error::config(format!(
                "depth must lie in 1..={MAX_DEPTH}; got {}",
                hp.depth
            )));
        }
        if !EPOCH_CHOICES.contains(&hp.epochs) {
            return Err(Error::config(format!(
                "epochs must be one of {EPOCH_CHOICES:?}; got {}",
                hp.epochs
            )));
        }
        let tol = 1e-9;
        if hp.base_lr < LR_MIN * (1.0 - tol) || hp.base_lr > LR_MAX * (1.0 + tol) {
            return Err(Error::config(format!(
                "learning rate must lie in [{LR_MIN}, {LR_MAX}]; got {}",
                hp.base_lr
            )));
        }
        if !self.neuron_choices().contains(&hp.neurons_per_layer) {
            return Err(Error::config(format!(
                "neurons per layer must be one of {:?} (n = {}); got {}",
                self.neuron_choices(),
                self.n_options,
                hp.neurons_per_layer
            )));
        }
        if hp.laplace_scale < LAPLACE_MIN * (1.0 - tol) || hp.laplace_scale > LAPLACE_MAX * (1.0 + tol)
        {
            return Err(Error::config(format!(
                "Laplace scale must lie in [{LAPLACE_MIN}, {LAPLACE_MAX}]; got {}",
                hp.laplace_scale
            )));
        }
        Ok(())
    }

    /// Continuous encoding into [0, 1]^5: depth index, epochs index,
    /// log10 learning rate, neurons index, log10 Laplace scale.
    pub fn encode(&self, hp: &Hyperparams) -> Result<Vec<f64>> {
        self.validate(hp)?;
        let epoch_idx = EPOCH_CHOICES.iter().position(|&e| e == hp.epochs).unwrap();
        let neuron_idx = self
            .neuron_choices()
            .iter()
            .position(|&m| m == hp.neurons_per_layer)
            .unwrap();
        Ok(vec![
            (hp.depth - 1) as f64 / (MAX_DEPTH - 1) as f64,
            epoch_idx as f64 / 2.0,
            (hp.base_lr.log10() - LR_MIN.log10()) / (LR_MAX.log10() - LR_MIN.log10()),
            neuron_idx as f64 / 2.0,
            (hp.laplace_scale.log10() - LAPLACE_MIN.log10())
                / (LAPLACE_MAX.log10() - LAPLACE_MIN.log10()),
        ])
    }

    /// Inverse of `encode`: continuous dims invert exactly, discrete dims map
    /// to the nearest index.
    pub fn decode(&self, v: &[f64]) -> Result<Hyperparams> {
        if v.len() != 5 {
            return Err(Error::config("encoded hyperparameters must have 5 dimensions"));
        }
        let depth = (v[0] * (MAX_DEPTH - 1) as f64).round() as usize + 1;
        let epoch_idx = ((v[1] * 2.0).round() as usize).min(2);
        let neuron_idx = ((v[3] * 2.0).round() as usize).min(2);
        let hp = Hyperparams {
            depth,
            epochs: EPOCH_CHOICES[epoch_idx],
            base_lr: 10f64
                .powf(LR_MIN.log10() + v[2] * (LR_MAX.log10() - LR_MIN.log10()))
                .clamp(LR_MIN, LR_MAX),
            neurons_per_layer: self.neuron_choices()[neuron_idx],
            laplace_scale: 10f64
                .powf(LAPLACE_MIN.log10() + v[4] * (LAPLACE_MAX.log10() - LAPLACE_MIN.log10()))
                .clamp(LAPLACE_MIN, LAPLACE_MAX),
        };
        self.validate(&hp)?;
        Ok(hp)
    }

    /// Uniform random configuration at a fixed depth (log-uniform on the
    /// continuous ranges).
    pub fn random(&self, depth: usize, rng: &mut ChaCha8Rng) -> Hyperparams {
        let lr_exp = rng.gen_range(LR_MIN.log10()..=LR_MAX.log10());
        let b_exp = rng.gen_range(LAPLACE_MIN.log10()..=LAPLACE_MAX.log10());
        Hyperparams {
            depth,
            epochs: EPOCH_CHOICES[rng.gen_range(0..3)],
            base_lr: 10f64.powf(lr_exp).clamp(LR_MIN, LR_MAX),
            neurons_per_layer: self.neuron_choices()[rng.gen_range(0..3)],
            laplace_scale: 10f64.powf(b_exp).clamp(LAPLACE_MIN, LAPLACE_MAX),
        }
    }

    /// Single-field perturbations of a configuration, filtered to the domain.
    pub fn neighbors(&self, hp: &Hyperparams) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        let epoch_idx = EPOCH_CHOICES.iter().position(|&e| e == hp.epochs);
        if let Some(i) = epoch_idx {
            if i > 0 {
                out.push(Hyperparams { epochs: EPOCH_CHOICES[i - 1], ..hp.clone() });
            }
            if i + 1 < EPOCH_CHOICES.len() {
                out.push(Hyperparams { epochs: EPOCH_CHOICES[i + 1], ..hp.clone() });
            }
        }
        let choices = self.neuron_choices();
        if let Some(i) = choices.iter().position(|&m| m == hp.neurons_per_layer) {
            if i > 0 {
                out.push(Hyperparams { neurons_per_layer: choices[i - 1], ..hp.clone() });
            }
            if i + 1 < choices.len() {
                out.push(Hyperparams { neurons_per_layer: choices[i + 1], ..hp.clone() });
            }
        }
        for factor in [0.5, 2.0] {
            let lr = (hp.base_lr * factor).clamp(LR_MIN, LR_MAX);
            if lr != hp.base_lr {
                out.push(Hyperparams { base_lr: lr, ..hp.clone() });
            }
            let b = (hp.laplace_scale * factor).clamp(LAPLACE_MIN, LAPLACE_MAX);
            if b != hp.laplace_scale {
                out.push(Hyperparams { laplace_scale: b, ..hp.clone() });
            }
        }
        out
    }
}

/// One completed training evaluation. `score` is the validation MAPE; failed
/// trainings are recorded with an infinite score (serialized as null) and
/// excluded from surrogate fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub hyperparams: Hyperparams,
    #[serde(with = "score_serde")]
    pub score: f64,
    pub seed: u64,
}

mod score_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(score: &f64, s: S) -> Result<S::Ok, S::Error> {
        if score.is_finite() {
            s.serialize_some(score)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

// ---------------------------------------------------------------------------
// GP surrogate
// ---------------------------------------------------------------------------

/// Gaussian-process surrogate over encoded hyperparameter vectors:
/// squared-exponential kernel with per-dimension length scales, targets
/// standardized internally.
#[derive(Debug, Clone)]
pub struct GpSurrogate {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    t_mean: f64,
    t_sd: f64,
    length_scales: Vec<f64>,
    signal_sd: f64,
    noise_sd: f64,
    chol: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

fn kernel(a: &[f64], b: &[f64], ls: &[f64], signal_sd: f64) -> f64 {
    let mut d2 = 0.0;
    for ((&x, &y), &l) in a.iter().zip(b).zip(ls) {
        let d = (x - y) / l;
        d2 += d * d;
    }
    signal_sd * signal_sd * (-0.5 * d2).exp()
}

impl GpSurrogate {
    /// Fit with fixed kernel hyperparameters; the kernel matrix gets an
    /// escalating jitter (1e-8 to 1e-4) if Cholesky fails.
    pub fn fit_with_params(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        length_scales: Vec<f64>,
        signal_sd: f64,
        noise_sd: f64,
    ) -> Result<Self> {
        if inputs.len() < 2 || inputs.len() != targets.len() {
            return Err(Error::data("GP needs at least 2 aligned observations"));
        }
        let t_mean = crate::stats::mean(&targets);
        let sd = crate::stats::population_variance(&targets).sqrt();
        let t_sd = if sd > 0.0 { sd } else { 1.0 };
        let y_std: Vec<f64> = targets.iter().map(|&t| (t - t_mean) / t_sd).collect();

        let n = inputs.len();
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = kernel(&inputs[i], &inputs[j], &length_scales, signal_sd);
                k[i][j] = v;
                k[j][i] = v;
            }
            k[i][i] += noise_sd * noise_sd;
        }
        let mut jitter = 1e-8;
        let chol = loop {
            let mut kj = k.clone();
            for (i, row) in kj.iter_mut().enumerate() {
                row[i] += jitter;
            }
            if let Some(l) = cholesky(&kj) {
                break l;
            }
            jitter *= 10.0;
            if jitter > 1e-4 {
                return Err(Error::numerical("kernel matrix is singular even after max jitter"));
            }
        };
        let alpha = chol_solve(&chol, &y_std);
        Ok(GpSurrogate {
            inputs,
            targets,
            t_mean,
            t_sd,
            length_scales,
            signal_sd,
            noise_sd,
            chol,
            alpha,
        })
    }

    /// Fit kernel hyperparameters by log-marginal-likelihood maximization
    /// with multi-start coordinate search (16 restarts), then condition on
    /// the finite-score records.
    pub fn fit(records: &[EvaluationRecord], space: &HpSpace) -> Result<Self> {
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for r in records {
            if r.score.is_finite() {
                inputs.push(space.encode(&r.hyperparams)?);
                targets.push(r.score);
            }
        }
        if inputs.len() < 2 {
            return Err(Error::data("GP needs at least 2 finite-score records"));
        }
        let dim = inputs[0].len();
        let t_mean = crate::stats::mean(&targets);
        let sd = crate::stats::population_variance(&targets).sqrt();
        let t_sd = if sd > 0.0 { sd } else { 1.0 };
        let y_std: Vec<f64> = targets.iter().map(|&t| (t - t_mean) / t_sd).collect();

        // theta = [ln l_1..l_dim, ln signal, ln noise]
        let lml = |theta: &[f64]| -> f64 {
            let ls: Vec<f64> = theta[..dim].iter().map(|&t| t.exp()).collect();
            let signal = theta[dim].exp();
            let noise = theta[dim + 1].exp();
            let n = inputs.len();
            let mut k = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let v = kernel(&inputs[i], &inputs[j], &ls, signal);
                    k[i][j] = v;
                    k[j][i] = v;
                }
                k[i][i] += noise * noise + 1e-8;
            }
            match cholesky(&k) {
                Some(l) => {
                    let alpha = chol_solve(&l, &y_std);
                    let quad: f64 = y_std.iter().zip(&alpha).map(|(y, a)| y * a).sum();
                    let logdet: f64 = l.iter().enumerate().map(|(i, r)| r[i].ln()).sum();
                    -0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
                }
                None => f64::NEG_INFINITY,
            }
        };

        let lo = [0.03f64.ln(), 0.2f64.ln(), 1e-4f64.ln()];
        let hi = [10f64.ln(), 5f64.ln(), 2f64.ln()];
        let bound_idx = |d: usize| if d < dim { 0 } else if d == dim { 1 } else { 2 };

        let mut rng = seeds::rng_for(0x6F17, 0);
        let mut best_theta: Option<Vec<f64>> = None;
        let mut best_val = f64::NEG_INFINITY;
        for restart in 0..16 {
            let mut theta: Vec<f64> = if restart == 0 {
                let mut t = vec![0.5f64.ln(); dim];
                t.push(0.0);
                t.push(0.3f64.ln());
                t
            } else {
                (0..dim + 2)
                    .map(|d| {
                        let b = bound_idx(d);
                        rng.gen_range(lo[b]..hi[b])
                    })
                    .collect()
            };
            let mut val = lml(&theta);
            let mut step = 2.0f64.ln();
            for _ in 0..12 {
                let mut improved = false;
                for d in 0..theta.len() {
                    let b = bound_idx(d);
                    for dir in [1.0, -1.0] {
                        let cand = (theta[d] + dir * step).clamp(lo[b], hi[b]);
                        if cand == theta[d] {
                            continue;
                        }
                        let orig = theta[d];
                        theta[d] = cand;
                        let v = lml(&theta);
                        if v > val {
                            val = v;
                            improved = true;
                        } else {
                            theta[d] = orig;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                    if step < 0.05 {
                        break;
                    }
                }
            }
            if val > best_val {
                best_val = val;
                best_theta = Some(theta);
            }
        }
        let theta = best_theta.ok_or_else(|| {
            Error::numerical("kernel hyperparameter search failed on every restart")
        })?;
        let ls: Vec<f64> = theta[..dim].iter().map(|&t| t.exp()).collect();
        Self::fit_with_params(inputs, targets, ls, theta[dim].exp(), theta[dim + 1].exp())
    }

    /// Posterior mean and sd of the latent objective at an encoded point.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let kstar: Vec<f64> = self
            .inputs
            .iter()
            .map(|xi| kernel(xi, x, &self.length_scales, self.signal_sd))
            .collect();
        let mean_std: f64 = kstar.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        let v = forward_sub(&self.chol, &kstar);
        let var_std = self.signal_sd * self.signal_sd - v.iter().map(|x| x * x).sum::<f64>();
        (
            self.t_mean + self.t_sd * mean_std,
            self.t_sd * var_std.max(0.0).sqrt(),
        )
    }

    /// Best (lowest) raw target seen by the surrogate.
    pub fn best_target(&self) -> f64 {
        self.targets.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn incumbent_input(&self) -> &[f64] {
        let idx = self
            .targets
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        &self.inputs[idx]
    }

    pub fn signal_sd(&self) -> f64 {
        self.signal_sd
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    /// Fitted noise sd on the raw target scale.
    pub fn noise_sd_natural(&self) -> f64 {
        self.t_sd * self.noise_sd
    }

    pub fn prior_sd(&self) -> f64 {
        self.t_sd * self.signal_sd
    }
}

/// Expected improvement for minimization; zero when no improvement is
/// possible.
pub fn expected_improvement(mean: f64, sd: f64, best_so_far: f64) -> f64 {
    if sd <= 0.0 {
        return (best_so_far - mean).max(0.0);
    }
    let u = (best_so_far - mean) / sd;
    ((best_so_far - mean) * normal_cdf(u) + sd * normal_pdf(u)).max(0.0)
}

/// Pick the EI-maximizing candidate among 2048 seeded random configurations
/// at the given depth plus the incumbent's neighbors; falls back to a random
/// candidate when every EI is zero.
pub fn propose_next(
    surrogate: &GpSurrogate,
    space: &HpSpace,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Hyperparams> {
    let mut candidates: Vec<Hyperparams> = (0..PROPOSAL_CANDIDATES)
        .map(|_| space.random(depth, rng))
        .collect();
    if let Ok(incumbent) = space.decode(surrogate.incumbent_input()) {
        let pinned = Hyperparams { depth, ..incumbent };
        if space.validate(&pinned).is_ok() {
            candidates.extend(space.neighbors(&pinned));
            candidates.push(pinned);
        }
    }
    let best = surrogate.best_target();
    let mut best_ei = -1.0;
    let mut best_idx = 0;
    for (i, cand) in candidates.iter().enumerate() {
        let enc = space.encode(cand)?;
        let (mean, sd) = surrogate.predict(&enc);
        let ei = expected_improvement(mean, sd, best);
        if ei > best_ei {
            best_ei = ei;
            best_idx = i;
        }
    }
    if best_ei <= 0.0 {
        // flat posterior: explore at random
        best_idx = rng.gen_range(0..PROPOSAL_CANDIDATES);
    }
    Ok(candidates[best_idx].clone())
}

// ---------------------------------------------------------------------------
// BO driver and layer growth
// ---------------------------------------------------------------------------

/// One BO run at a fixed depth: `n_init` seeded random evaluations followed
/// by `n_iters` propose-and-evaluate steps. The objective receives a derived
/// seed per evaluation and returns a score (infinite on failure).
pub fn run_bo<F>(
    space: &HpSpace,
    depth: usize,
    n_init: usize,
    n_iters: usize,
    seed: u64,
    objective: &mut F,
) -> Result<Vec<EvaluationRecord>>
where
    F: FnMut(&Hyperparams, u64) -> f64,
{
    let mut records = Vec::with_capacity(n_init + n_iters);
    let mut rng = seeds::rng_for(seed, STREAM_BO_INIT);
    for i in 0..n_init {
        let hp = space.random(depth, &mut rng);
        let eval_seed = seeds::derive2(seed, STREAM_BO_INIT, i as u64);
        let score = objective(&hp, eval_seed);
        records.push(EvaluationRecord { hyperparams: hp, score, seed: eval_seed });
    }
    let mut rng = seeds::rng_for(seed, STREAM_BO_ITER);
    for i in 0..n_iters {
        let hp = match GpSurrogate::fit(&records, space) {
            Ok(gp) => propose_next(&gp, space, depth, &mut rng)?,
            // not enough finite scores for a surrogate yet
            Err(_) => space.random(depth, &mut rng),
        };
        let eval_seed = seeds::derive2(seed, STREAM_BO_ITER, i as u64);
        let score = objective(&hp, eval_seed);
        records.push(EvaluationRecord { hyperparams: hp, score, seed: eval_seed });
    }
    Ok(records)
}

fn best_score(records: &[EvaluationRecord]) -> f64 {
    records.iter().map(|r| r.score).fold(f64::INFINITY, f64::min)
}

/// Layer-growth search over an arbitrary objective: per depth a fresh
/// 4 + 12 BO run; stops at the first depth whose best score is strictly
/// worse than the previous depth's, then selects the depth with the lowest
/// best score. Returns the chosen depth and every record gathered.
pub fn tune_depth_with<F>(
    space: &HpSpace,
    seed: u64,
    objective: &mut F,
) -> Result<(usize, Vec<EvaluationRecord>)>
where
    F: FnMut(&Hyperparams, u64) -> f64,
{
    let mut all_records = Vec::new();
    let mut best_by_depth: Vec<f64> = Vec::new();
    for depth in 1..=MAX_DEPTH {
        let records = run_bo(
            space,
            depth,
            BO_INIT_POINTS,
            BO_GROWTH_ITERS,
            seeds::derive(seed, STREAM_DEPTH_BASE + depth as u64),
            objective,
        )?;
        let best = best_score(&records);
        all_records.extend(records);
        best_by_depth.push(best);
        if depth >= 2 && best > best_by_depth[depth - 2] {
            break;
        }
    }
    let (best_depth, best) = best_by_depth
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, &v)| (i + 1, v))
        .unwrap();
    if !best.is_finite() {
        return Err(Error::numerical("every tuning evaluation failed"));
    }
    Ok((best_depth, all_records))
}

/// Layer-growth depth tuning on measurement data, scored by validation MAPE
/// over an internal 2/3-train / 1/3-validation split.
pub fn tune_depth(train: &PerformanceDataset, seed: u64) -> Result<(usize, Vec<EvaluationRecord>)> {
    let space = HpSpace::new(train.width());
    let mut objective = tuning_objective(train, seed)?;
    tune_depth_with(&space, seed, &mut objective)
}

/// Warm-started final pass: GP over all prior records (depth is an input
/// dimension), 8 proposals constrained to the chosen depth. Returns the best
/// configuration observed at that depth and the new records.
pub fn final_tune_with<F>(
    space: &HpSpace,
    depth: usize,
    prior_records: &[EvaluationRecord],
    seed: u64,
    objective: &mut F,
) -> Result<(Hyperparams, Vec<EvaluationRecord>)>
where
    F: FnMut(&Hyperparams, u64) -> f64,
{
    if prior_records.is_empty() {
        return Err(Error::config("final tuning needs prior evaluations"));
    }
    let mut records = prior_records.to_vec();
    let mut rng = seeds::rng_for(seed, STREAM_FINAL);
    for i in 0..BO_FINAL_ITERS {
        let hp = match GpSurrogate::fit(&records, space) {
            Ok(gp) => propose_next(&gp, space, depth, &mut rng)?,
            Err(_) => space.random(depth, &mut rng),
        };
        let eval_seed = seeds::derive2(seed, STREAM_FINAL, i as u64);
        let score = objective(&hp, eval_seed);
        records.push(EvaluationRecord { hyperparams: hp, score, seed: eval_seed });
    }
    let best = records
        .iter()
        .filter(|r| r.hyperparams.depth == depth && r.score.is_finite())
        .min_by(|a, b| a.score.partial_cmp(&b.score).unwrap())
        .ok_or_else(|| Error::numerical("no successful evaluation at the chosen depth"))?;
    Ok((best.hyperparams.clone(), records[prior_records.len()..].to_vec()))
}

/// [`final_tune_with`] over the measurement-data objective (same internal
/// split as [`tune_depth`] when given the same seed, so scores stay
/// comparable across both stages).
pub fn final_tune(
    train: &PerformanceDataset,
    depth: usize,
    prior_records: &[EvaluationRecord],
    seed: u64,
) -> Result<(Hyperparams, Vec<EvaluationRecord>)> {
    let space = HpSpace::new(train.width());
    let mut objective = tuning_objective(train, seed)?;
    final_tune_with(&space, depth, prior_records, seed, &mut objective)
}

/// Build the tuning objective: split once (2/3 train, 1/3 validation), then
/// score a configuration by training a BNN on the normalized training part
/// and measuring MAPE of denormalized predictive means on the validation
/// part. Failures score +infinity.
pub fn tuning_objective(
    train: &PerformanceDataset,
    seed: u64,
) -> Result<impl FnMut(&Hyperparams, u64) -> f64> {
    let n = train.len();
    if n < 3 {
        return Err(Error::data(format!(
            "tuning needs at least 3 data points for the internal split; got {n}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    use rand::seq::SliceRandom;
    idx.shuffle(&mut seeds::rng_for(seed, STREAM_SPLIT));
    let n_val = n / 3;
    let val_idx: Vec<usize> = idx[..n_val.max(1)].to_vec();
    let train_idx: Vec<usize> = idx[n_val.max(1)..].to_vec();
    let fit_part = train.subset(&train_idx);
    let val_part = train.subset(&val_idx);

    Ok(move |hp: &Hyperparams, eval_seed: u64| -> f64 {
        let (normalized, nz) = match normalize_performance(&fit_part) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let model = match train_bnn(&normalized, hp, eval_seed) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        let mut preds = Vec::with_capacity(val_part.len());
        for (i, x) in val_part.rows.iter().enumerate() {
            let mut rng = seeds::rng_for(seeds::derive(eval_seed, 0xE7A1), i as u64);
            match predict_samples(&model, x, DEFAULT_PREDICTIVE_SAMPLES, &mut rng) {
                Ok(pd) => preds.push(nz.denormalize(pd.mean())),
                Err(_) => return f64::INFINITY,
            }
        }
        mape(&preds, &val_part.performance).unwrap_or(f64::INFINITY)
    })
}
