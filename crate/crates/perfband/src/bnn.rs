//! Mean-field variational Bayesian neural network.
//!
//! Weights carry independent Gaussian posteriors `N(mean, sd^2)` with
//! `sd = softplus(raw_scale)`. Training minimizes the ELBO: heteroscedastic
//! Gaussian NLL of reparameterized weight draws plus a KL penalty against the
//! prior. The first layer's prior is a Laplace distribution (sparsity); the
//! KL against it has no closed form and is estimated by Monte Carlo with the
//! same weight draws used for the likelihood term. All other layers use a
//! Gaussian prior with closed-form KL.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::PerformanceDataset;
use crate::error::{Error, Result};
use crate::hpo::Hyperparams;
use crate::net::{
    self, adam_step, sigma_from_raw, LossSpec, NetworkTopology, OptimizerState,
};
use crate::seeds;
use crate::stats::{self, sigmoid, softplus, softplus_inv, standard_normal, z_score};

/// Predictive sample count used throughout the pipeline.
pub const DEFAULT_PREDICTIVE_SAMPLES: usize = 300;

/// Initial posterior standard deviation for every parameter.
const INIT_POSTERIOR_SD: f64 = 0.05;

/// Gaussian prior sd for all layers past the first.
const GAUSSIAN_PRIOR_SD: f64 = 1.0;

const STREAM_INIT: u64 = 0x1217;
const STREAM_TRAIN: u64 = 0x7124;

/// Per-parameter Gaussian posterior, laid out like the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalPosterior {
    pub means: Vec<f64>,
    pub raw_scales: Vec<f64>,
}

impl VariationalPosterior {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn sd(&self, i: usize) -> f64 {
        softplus(self.raw_scales[i])
    }

    pub fn sds(&self) -> Vec<f64> {
        self.raw_scales.iter().map(|&r| softplus(r)).collect()
    }
}

/// Prior over network parameters: Laplace(0, b) on the first layer for
/// sparsity, N(0, s0^2) elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub laplace_scale: f64,
    pub gaussian_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs: usize,
    pub base_lr: f64,
    pub seed: u64,
}

/// One trained ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnnModel {
    pub topology: NetworkTopology,
    pub posterior: VariationalPosterior,
    pub prior: PriorSpec,
    pub meta: TrainingMeta,
}

/// Monte-Carlo predictive distribution for one input: paired draws of the
/// mean-head value and the learned noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    samples: Vec<(f64, f64)>,
    mean: f64,
    var_epistemic: f64,
    var_aleatoric: f64,
}

impl PredictiveDistribution {
    pub fn from_samples(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::data("a predictive distribution needs at least 2 samples"));
        }
        if samples.iter().any(|&(f, s)| !f.is_finite() || !(s > 0.0)) {
            return Err(Error::numerical(
                "predictive samples must be finite with positive noise scales",
            ));
        }
        let fs: Vec<f64> = samples.iter().map(|&(f, _)| f).collect();
        let mean = stats::mean(&fs);
        let var_epistemic = stats::population_variance(&fs);
        let var_aleatoric = samples.iter().map(|&(_, s)| s * s).sum::<f64>() / samples.len() as f64;
        Ok(PredictiveDistribution {
            samples,
            mean,
            var_epistemic,
            var_aleatoric,
        })
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Variance of the mean-head draws (model ignorance).
    pub fn epistemic_variance(&self) -> f64 {
        self.var_epistemic
    }

    /// Mean squared noise scale (measurement noise).
    pub fn aleatoric_variance(&self) -> f64 {
        self.var_aleatoric
    }

    pub fn total_sd(&self) -> f64 {
        (self.var_epistemic + self.var_aleatoric).sqrt()
    }

    /// Two-sided confidence interval `mean ± z(rho) * total_sd`.
    pub fn interval(&self, rho: f64) -> Result<(f64, f64)> {
        if !(rho > 0.0 && rho < 100.0) {
            return Err(Error::config(format!(
                "confidence level must lie in (0, 100); got {rho}"
            )));
        }
        let hw = z_score(rho) * self.total_sd();
        Ok((self.mean - hw, self.mean + hw))
    }
}

/// One reparameterized weight draw: `mean + sd * eps`, `eps ~ N(0, I)`.
pub fn sample_weights<R: Rng + ?Sized>(posterior: &VariationalPosterior, rng: &mut R) -> Vec<f64> {
    posterior
        .means
        .iter()
        .zip(&posterior.raw_scales)
        .map(|(&m, &r)| m + softplus(r) * standard_normal(rng))
        .collect()
}

/// Closed-form KL of independent Gaussians against a zero-mean Gaussian
/// prior, summed over the slice:
/// `sum ln(s0/sd) + (sd^2 + mean^2) / (2 s0^2) - 1/2`.
pub fn kl_gaussian(means: &[f64], sds: &[f64], prior_sd: f64) -> f64 {
    debug_assert!(prior_sd > 0.0);
    means
        .iter()
        .zip(sds)
        .map(|(&m, &s)| (prior_sd / s).ln() + (s * s + m * m) / (2.0 * prior_sd * prior_sd) - 0.5)
        .sum()
}

fn laplace_log_density(w: f64, b: f64) -> f64 {
    -(2.0 * b).ln() - w.abs() / b
}

/// Monte-Carlo estimate of `KL(q || Laplace(0, b))` summed over the slice,
/// using `s_samples` reparameterized draws:
/// `E_q[ln q(w) - ln Laplace(w; 0, b)]`.
pub fn kl_laplace_mc<R: Rng + ?Sized>(
    means: &[f64],
    sds: &[f64],
    b: f64,
    s_samples: usize,
    rng: &mut R,
) -> f64 {
    debug_assert!(b > 0.0 && s_samples >= 1);
    let mut total = 0.0;
    for _ in 0..s_samples {
        for (&m, &s) in means.iter().zip(sds) {
            let eps = standard_normal(rng);
            let w = m + s * eps;
            let log_q = -0.5 * (2.0 * std::f64::consts::PI).ln() - s.ln() - 0.5 * eps * eps;
            total += log_q - laplace_log_density(w, b);
        }
    }
    total / s_samples as f64
}

#[derive(Debug, Clone)]
pub struct PosteriorGrad {
    pub d_means: Vec<f64>,
    pub d_raw_scales: Vec<f64>,
}

/// Everything fixed during one ELBO evaluation.
pub struct ElboContext<'a> {
    pub topology: &'a NetworkTopology,
    pub prior: PriorSpec,
    pub xs: &'a [Vec<f64>],
    pub ys: &'a [f64],
    pub kl_weight: f64,
}

impl ElboContext<'_> {
    /// ELBO loss for fixed noise draws (`eps[s]` has one standard normal per
    /// parameter): mean over draws of the batch NLL, plus the weighted KL.
    /// Deterministic in its inputs, which makes finite-difference checks with
    /// common random numbers possible.
    pub fn loss_with_noise(
        &self,
        posterior: &VariationalPosterior,
        eps: &[Vec<f64>],
    ) -> Result<f64> {
        self.evaluate(posterior, eps, false).map(|(l, _)| l)
    }

    /// ELBO loss and its exact gradient with respect to posterior means and
    /// raw scales, for fixed noise draws.
    pub fn loss_and_grad_with_noise(
        &self,
        posterior: &VariationalPosterior,
        eps: &[Vec<f64>],
    ) -> Result<(f64, PosteriorGrad)> {
        self.evaluate(posterior, eps, true)
            .map(|(l, g)| (l, g.expect("gradient requested")))
    }

    /// ELBO loss with `s_train` fresh reparameterized draws.
    pub fn loss<R: Rng + ?Sized>(
        &self,
        posterior: &VariationalPosterior,
        s_train: usize,
        rng: &mut R,
    ) -> Result<f64> {
        let eps = draw_noise(posterior.len(), s_train, rng);
        self.loss_with_noise(posterior, &eps)
    }

    fn evaluate(
        &self,
        posterior: &VariationalPosterior,
        eps: &[Vec<f64>],
        want_grad: bool,
    ) -> Result<(f64, Option<PosteriorGrad>)> {
        if self.xs.is_empty() || self.xs.len() != self.ys.len() {
            return Err(Error::data("batch must be non-empty with matching inputs and targets"));
        }
        if eps.is_empty() {
            return Err(Error::data("need at least one noise draw"));
        }
        let p = posterior.len();
        if p != self.topology.param_count() {
            return Err(Error::data("posterior layout does not match the topology"));
        }
        let s_train = eps.len();
        let inv_s = 1.0 / s_train as f64;
        let first_len = self.topology.layout().first_layer_len();
        let sds = posterior.sds();
        let b = self.prior.laplace_scale;

        let mut loss = 0.0;
        let mut d_means = vec![0.0; p];
        let mut d_raws = vec![0.0; p];

        for e in eps {
            if e.len() != p {
                return Err(Error::data("noise draw length does not match the posterior"));
            }
            let weights: Vec<f64> = (0..p).map(|j| posterior.means[j] + sds[j] * e[j]).collect();
            let (nll, g) =
                net::loss_and_gradient(self.topology, &weights, self.xs, self.ys, LossSpec::GaussianNll)?;
            loss += inv_s * nll;
            // Monte-Carlo part of the first-layer Laplace KL, using the same draw
            for j in 0..first_len {
                let w = weights[j];
                let log_q =
                    -0.5 * (2.0 * std::f64::consts::PI).ln() - sds[j].ln() - 0.5 * e[j] * e[j];
                loss += self.kl_weight * inv_s * (log_q - laplace_log_density(w, b));
            }
            if want_grad {
                for j in 0..p {
                    let sp = sigmoid(posterior.raw_scales[j]);
                    d_means[j] += inv_s * g[j];
                    d_raws[j] += inv_s * g[j] * e[j] * sp;
                    if j < first_len {
                        let sign = if weights[j] >= 0.0 { 1.0 } else { -1.0 };
                        d_means[j] += self.kl_weight * inv_s * sign / b;
                        d_raws[j] += self.kl_weight
                            * inv_s
                            * (-sp / sds[j] + sign * e[j] * sp / b);
                    }
                }
            }
        }

        // closed-form Gaussian KL for the remaining layers
        let s0 = self.prior.gaussian_sd;
        loss += self.kl_weight
            * kl_gaussian(&posterior.means[first_len..], &sds[first_len..], s0);
        if want_grad {
            for j in first_len..p {
                let sp = sigmoid(posterior.raw_scales[j]);
                d_means[j] += self.kl_weight * posterior.means[j] / (s0 * s0);
                d_raws[j] += self.kl_weight * (-1.0 / sds[j] + sds[j] / (s0 * s0)) * sp;
            }
        }

        if !loss.is_finite() {
            return Err(Error::numerical("ELBO loss is not finite"));
        }
        let grad = want_grad.then_some(PosteriorGrad {
            d_means,
            d_raw_scales: d_raws,
        });
        Ok((loss, grad))
    }
}

fn draw_noise<R: Rng + ?Sized>(p: usize, s: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..s)
        .map(|_| (0..p).map(|_| standard_normal(rng)).collect())
        .collect()
}

/// Glorot-uniform weight means, zero hidden biases, and a small uniform
/// initial posterior sd. The output heads start at the target statistics:
/// mean-head bias at mean(y), noise-head bias at sd(y). This keeps early
/// NLL gradients sane instead of letting the noise head absorb the entire
/// initial residual.
fn init_posterior<R: Rng + ?Sized>(
    topo: &NetworkTopology,
    ys: &[f64],
    rng: &mut R,
) -> VariationalPosterior {
    let layout = topo.layout();
    let mut means = vec![0.0; layout.len];
    for span in &layout.layers {
        let limit = (6.0 / (span.in_dim + span.out_dim) as f64).sqrt();
        for w in means
            .iter_mut()
            .skip(span.w_offset)
            .take(span.in_dim * span.out_dim)
        {
            *w = rng.gen_range(-limit..limit);
        }
    }
    let output = layout.layers.last().unwrap();
    let y_mean = crate::stats::mean(ys);
    let y_sd = crate::stats::population_variance(ys).sqrt();
    means[output.b_offset] = y_mean;
    // noise starts well below the marginal sd: at sd(y) the likelihood
    // gradient is too weak to escape the predict-the-mean optimum
    means[output.b_offset + 1] = softplus_inv((0.2 * y_sd).max(INIT_POSTERIOR_SD));
    let raw = softplus_inv(INIT_POSTERIOR_SD);
    VariationalPosterior {
        raw_scales: vec![raw; layout.len],
        means,
    }
}

/// Train one BNN with full-batch Adam on the ELBO (one reparameterized draw
/// per step, KL weighted by 1/N). Deterministic given `seed`.
pub fn train_bnn(subset: &PerformanceDataset, hp: &Hyperparams, seed: u64) -> Result<BnnModel> {
    if subset.is_empty() {
        return Err(Error::data("training subset is empty"));
    }
    let topology = NetworkTopology::new(
        subset.width(),
        vec![hp.neurons_per_layer; hp.depth],
    )?;
    let mut posterior = init_posterior(
        &topology,
        &subset.performance,
        &mut seeds::rng_for(seed, STREAM_INIT),
    );
    let prior = PriorSpec {
        laplace_scale: hp.laplace_scale,
        gaussian_sd: GAUSSIAN_PRIOR_SD,
    };
    let ctx = ElboContext {
        topology: &topology,
        prior,
        xs: &subset.rows,
        ys: &subset.performance,
        kl_weight: 1.0 / subset.len() as f64,
    };

    let p = posterior.len();
    let mut state = OptimizerState::new(2 * p, hp.base_lr);
    let mut rng = seeds::rng_for(seed, STREAM_TRAIN);
    for epoch in 1..=hp.epochs {
        let eps = draw_noise(p, 1, &mut rng);
        let (_, grad) = ctx
            .loss_and_grad_with_noise(&posterior, &eps)
            .map_err(|e| Error::numerical(format!("training diverged at epoch {epoch}: {e}")))?;
        let mut params: Vec<f64> = posterior
            .means
            .iter()
            .chain(&posterior.raw_scales)
            .cloned()
            .collect();
        let grads: Vec<f64> = grad
            .d_means
            .iter()
            .chain(&grad.d_raw_scales)
            .cloned()
            .collect();
        adam_step(&mut state, &mut params, &grads);
        posterior.means.copy_from_slice(&params[..p]);
        posterior.raw_scales.copy_from_slice(&params[p..]);
    }

    Ok(BnnModel {
        topology,
        posterior,
        prior,
        meta: TrainingMeta {
            epochs: hp.epochs,
            base_lr: hp.base_lr,
            seed,
        },
    })
}

/// Draw `s` predictive samples for one input: each samples weights and
/// records the mean-head value and learned noise scale.
pub fn predict_samples<R: Rng + ?Sized>(
    model: &BnnModel,
    x: &[f64],
    s: usize,
    rng: &mut R,
) -> Result<PredictiveDistribution> {
    if s < 2 {
        return Err(Error::config("need at least 2 predictive samples"));
    }
    let sds = model.posterior.sds();
    let mut normals = crate::stats::NormalSource::new();
    let mut samples = Vec::with_capacity(s);
    let mut weights = vec![0.0; model.posterior.len()];
    for _ in 0..s {
        for (w, (&m, &sd)) in weights.iter_mut().zip(model.posterior.means.iter().zip(&sds)) {
            *w = m + sd * normals.next(rng);
        }
        let (mu, raw) = net::forward(&model.topology, &weights, x)?;
        samples.push((mu, sigma_from_raw(raw)));
    }
    PredictiveDistribution::from_samples(samples)
}
