//! Dense feedforward substrate: relu hidden layers, a two-unit output head
//! (mean and raw noise scale), reverse-mode gradients, and an Adam optimizer
//! with a flat-then-exponential learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{sigmoid, softplus};

/// Additive floor on the learned noise scale, in normalized-output units.
pub const SIGMA_FLOOR: f64 = 1e-3;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-7;

/// Epochs after which the learning rate starts decaying.
pub const LR_DECAY_START: usize = 1000;
/// Exponential decay rate applied per epoch past the start.
pub const LR_DECAY_RATE: f64 = 0.001;

/// Feedforward topology: relu hidden layers and a linear two-unit output
/// layer (unit 0 = predictive mean, unit 1 = raw noise-scale pre-activation).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
}

impl NetworkTopology {
    pub fn new(input_dim: usize, hidden_layers: Vec<usize>) -> Result<Self> {
        if input_dim < 1 {
            return Err(Error::config("input dimension must be at least 1"));
        }
        if hidden_layers.is_empty() || hidden_layers.iter().any(|&w| w < 1) {
            return Err(Error::config("need at least one hidden layer, all widths >= 1"));
        }
        Ok(NetworkTopology {
            input_dim,
            hidden_layers,
        })
    }

    /// (in, out) dimensions of every weight layer, output layer included.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 1);
        let mut prev = self.input_dim;
        for &w in &self.hidden_layers {
            dims.push((prev, w));
            prev = w;
        }
        dims.push((prev, 2));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|&(i, o)| i * o + o).sum()
    }

    pub fn layout(&self) -> ParamLayout {
        let mut layers = Vec::new();
        let mut offset = 0;
        for (in_dim, out_dim) in self.layer_dims() {
            let w_offset = offset;
            let b_offset = offset + in_dim * out_dim;
            offset = b_offset + out_dim;
            layers.push(LayerSpan {
                in_dim,
                out_dim,
                w_offset,
                b_offset,
            });
        }
        ParamLayout { layers, len: offset }
    }
}

/// Span of one layer inside the flat parameter vector: weights are row-major
/// `[out][in]` at `w_offset`, biases follow at `b_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpan {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w_offset: usize,
    pub b_offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub layers: Vec<LayerSpan>,
    pub len: usize,
}

impl ParamLayout {
    /// Number of parameters in the first layer (weights + biases), which is
    /// the slice the sparsity-inducing prior applies to.
    pub fn first_layer_len(&self) -> usize {
        let l = &self.layers[0];
        l.in_dim * l.out_dim + l.out_dim
    }
}

/// Learned noise scale from the raw head output.
pub fn sigma_from_raw(raw: f64) -> f64 {
    softplus(raw) + SIGMA_FLOOR
}

/// Evaluate the network: returns `(mu, raw)` where `mu` is the mean head and
/// `raw` the noise head pre-activation (`sigma = softplus(raw) + floor`).
pub fn forward(topo: &NetworkTopology, params: &[f64], x: &[f64]) -> Result<(f64, f64)> {
    if x.len() != topo.input_dim {
        return Err(Error::data(format!(
            "input has {} values but the network expects {}",
            x.len(),
            topo.input_dim
        )));
    }
    if params.len() != topo.param_count() {
        return Err(Error::data(format!(
            "parameter vector has length {} but the topology needs {}",
            params.len(),
            topo.param_count()
        )));
    }
    let trace = forward_trace(topo, params, x);
    let out = trace.activations.last().unwrap();
    Ok((out[0], out[1]))
}

pub(crate) struct ForwardTrace {
    /// activations[0] = input, activations[l+1] = output of layer l
    pub activations: Vec<Vec<f64>>,
}

pub(crate) fn forward_trace(topo: &NetworkTopology, params: &[f64], x: &[f64]) -> ForwardTrace {
    let layout = topo.layout();
    let n_layers = layout.layers.len();
    let mut activations = Vec::with_capacity(n_layers + 1);
    activations.push(x.to_vec());
    for (l, span) in layout.layers.iter().enumerate() {
        let prev = &activations[l];
        let mut out = Vec::with_capacity(span.out_dim);
        for o in 0..span.out_dim {
            let mut z = params[span.b_offset + o];
            let w = &params[span.w_offset + o * span.in_dim..span.w_offset + (o + 1) * span.in_dim];
            for (wi, ai) in w.iter().zip(prev) {
                z += wi * ai;
            }
            out.push(if l + 1 < n_layers { z.max(0.0) } else { z });
        }
        activations.push(out);
    }
    ForwardTrace { activations }
}

/// Loss to differentiate through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSpec {
    /// `sum_i (mu_i - y_i)^2`; the noise head is ignored.
    SquaredError,
    /// Heteroscedastic Gaussian negative log-likelihood,
    /// `sum_i (y-mu)^2/(2 sigma^2) + ln sigma + ln(2 pi)/2`.
    GaussianNll,
}

/// Loss and its exact gradient with respect to all weights and biases over a
/// full batch.
pub fn loss_and_gradient(
    topo: &NetworkTopology,
    params: &[f64],
    xs: &[Vec<f64>],
    ys: &[f64],
    loss_spec: LossSpec,
) -> Result<(f64, Vec<f64>)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::data("batch must be non-empty with matching inputs and targets"));
    }
    let layout = topo.layout();
    let mut grad = vec![0.0; layout.len];
    let mut loss = 0.0;
    for (i, (x, &y)) in xs.iter().zip(ys).enumerate() {
        if x.len() != topo.input_dim {
            return Err(Error::data(format!(
                "batch point {} has width {} but the network expects {}",
                i,
                x.len(),
                topo.input_dim
            )));
        }
        let trace = forward_trace(topo, params, x);
        let out = trace.activations.last().unwrap();
        let (mu, raw) = (out[0], out[1]);
        let (point_loss, d_mu, d_raw) = match loss_spec {
            LossSpec::SquaredError => {
                let e = mu - y;
                (e * e, 2.0 * e, 0.0)
            }
            LossSpec::GaussianNll => {
                let sigma = sigma_from_raw(raw);
                let e = y - mu;
                let nll = e * e / (2.0 * sigma * sigma)
                    + sigma.ln()
                    + 0.5 * (2.0 * std::f64::consts::PI).ln();
                let d_mu = -e / (sigma * sigma);
                let d_sigma = -e * e / (sigma * sigma * sigma) + 1.0 / sigma;
                (nll, d_mu, d_sigma * sigmoid(raw))
            }
        };
        if !point_loss.is_finite() {
            return Err(Error::numerical(format!(
                "loss is not finite at batch point {i} (mu = {mu}, raw noise = {raw}, y = {y})"
            )));
        }
        loss += point_loss;
        backprop_into(&layout, params, &trace, &[d_mu, d_raw], &mut grad);
    }
    Ok((loss, grad))
}

/// Accumulate the gradient of one point into `grad`, given the output-layer
/// deltas.
fn backprop_into(
    layout: &ParamLayout,
    params: &[f64],
    trace: &ForwardTrace,
    output_delta: &[f64],
    grad: &mut [f64],
) {
    let n_layers = layout.layers.len();
    let mut delta = output_delta.to_vec();
    for l in (0..n_layers).rev() {
        let span = &layout.layers[l];
        let below = &trace.activations[l];
        for o in 0..span.out_dim {
            let d = delta[o];
            grad[span.b_offset + o] += d;
            let w_row = span.w_offset + o * span.in_dim;
            for (i, ai) in below.iter().enumerate() {
                grad[w_row + i] += d * ai;
            }
        }
        if l > 0 {
            // propagate through relu: activation is zero exactly where the
            // pre-activation was clipped
            let mut prev = vec![0.0; span.in_dim];
            for (i, p) in prev.iter_mut().enumerate() {
                if below[i] > 0.0 {
                    let mut s = 0.0;
                    for (o, d) in delta.iter().enumerate() {
                        s += params[span.w_offset + o * span.in_dim + i] * d;
                    }
                    *p = s;
                }
            }
            delta = prev;
        }
    }
}

/// Scheduled learning rate: flat until `LR_DECAY_START`, then exponential
/// decay `base * exp(-0.001 (epoch - 1000))`.
pub fn lr_at_epoch(base_lr: f64, epoch: usize) -> f64 {
    if epoch <= LR_DECAY_START {
        base_lr
    } else {
        base_lr * (-LR_DECAY_RATE * (epoch - LR_DECAY_START) as f64).exp()
    }
}

/// Adam state over a flat parameter vector. One full-batch step is one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: usize,
    pub base_lr: f64,
}

impl OptimizerState {
    pub fn new(dim: usize, base_lr: f64) -> Self {
        OptimizerState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            step: 0,
            base_lr,
        }
    }
}

/// One bias-corrected Adam update in place; the step size follows
/// `lr_at_epoch` with the step counter as the epoch.
pub fn adam_step(state: &mut OptimizerState, params: &mut [f64], grads: &[f64]) {
    debug_assert_eq!(params.len(), state.m.len());
    debug_assert_eq!(grads.len(), state.m.len());
    state.step += 1;
    let t = state.step;
    let lr = lr_at_epoch(state.base_lr, t);
    let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use rand::Rng;

    fn topo(input: usize, hidden: &[usize]) -> NetworkTopology {
        NetworkTopology::new(input, hidden.to_vec()).unwrap()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let t = topo(3, &[4, 4]);
        let params = vec![0.0; t.param_count()];
        let (mu, raw) = forward(&t, &params, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(mu, 0.0);
        assert_eq!(raw, 0.0);
    }

    #[test]
    fn hand_computed_one_one_net() {
        // 1 input -> 1 hidden -> (mu, raw); w0 = 2, b0 = -1, mean row w = 3, b = 0.5
        let t = topo(1, &[1]);
        let layout = t.layout();
        let mut params = vec![0.0; t.param_count()];
        params[layout.layers[0].w_offset] = 2.0;
        params[layout.layers[0].b_offset] = -1.0;
        params[layout.layers[1].w_offset] = 3.0; // mean head weight
        params[layout.layers[1].b_offset] = 0.5; // mean head bias
        params[layout.layers[1].w_offset + 1] = -1.0; // noise head weight
        let x = 2.0;
        let h = (2.0 * x - 1.0f64).max(0.0); // 3
        let (mu, raw) = forward(&t, &params, &[x]).unwrap();
        assert!((mu - (3.0 * h + 0.5)).abs() < 1e-12);
        assert!((raw - (-h)).abs() < 1e-12);
        // dead relu region: output is independent of the input scale
        let (mu_a, _) = forward(&t, &params, &[-1.0]).unwrap();
        let (mu_b, _) = forward(&t, &params, &[-10.0]).unwrap();
        assert_eq!(mu_a, mu_b);
        assert!((mu_a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn linear_unit_gradient_closed_form() {
        // single hidden unit kept positive, squared loss on one point:
        // with the mean head as identity, loss = (w x + b - y)^2
        let t = topo(1, &[1]);
        let layout = t.layout();
        let mut params = vec![0.0; t.param_count()];
        let (w, b) = (1.5, 0.25);
        params[layout.layers[0].w_offset] = w;
        params[layout.layers[0].b_offset] = b;
        params[layout.layers[1].w_offset] = 1.0;
        let (x, y) = (2.0, 1.0);
        let (loss, grad) = loss_and_gradient(
            &t,
            &params,
            &[vec![x]],
            &[y],
            LossSpec::SquaredError,
        )
        .unwrap();
        let e = w * x + b - y;
        assert!((loss - e * e).abs() < 1e-12);
        assert!((grad[layout.layers[0].w_offset] - 2.0 * e * x).abs() < 1e-12);
        assert!((grad[layout.layers[0].b_offset] - 2.0 * e).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_at_interpolating_minimum() {
        // mean head reproduces y exactly => squared-error gradient vanishes
        let t = topo(1, &[1]);
        let layout = t.layout();
        let mut params = vec![0.0; t.param_count()];
        params[layout.layers[0].w_offset] = 1.0;
        params[layout.layers[1].w_offset] = 1.0;
        let (_, grad) =
            loss_and_gradient(&t, &params, &[vec![3.0]], &[3.0], LossSpec::SquaredError).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-12));
    }

    fn finite_difference_check(seed: u64, loss_spec: LossSpec) {
        let mut rng = seeds::rng_for(seed, 0);
        let input = rng.gen_range(1..=4);
        let depth = rng.gen_range(1..=3);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=8)).collect();
        let t = topo(input, &hidden);
        let mut params: Vec<f64> =
            (0..t.param_count()).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let batch = rng.gen_range(1..=8);
        let xs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..input).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect();
        let ys: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, grad) = loss_and_gradient(&t, &params, &xs, &ys, loss_spec).unwrap();
        let h = 1e-5;
        for i in 0..params.len() {
            let orig = params[i];
            params[i] = orig + h;
            let (lp, _) = loss_and_gradient(&t, &params, &xs, &ys, loss_spec).unwrap();
            params[i] = orig - h;
            let (lm, _) = loss_and_gradient(&t, &params, &xs, &ys, loss_spec).unwrap();
            params[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let tol = 1e-4 * grad[i].abs().max(fd.abs()) + 1e-7;
            assert!(
                (grad[i] - fd).abs() <= tol,
                "seed {seed} param {i}: grad {} vs fd {}",
                grad[i],
                fd
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..20 {
            finite_difference_check(seed, LossSpec::GaussianNll);
            finite_difference_check(1000 + seed, LossSpec::SquaredError);
        }
    }

    #[test]
    fn relu_positive_homogeneity() {
        // doubling first-layer weights and biases (zero later biases) doubles
        // the outputs of this all-linear-head net
        let mut rng = seeds::rng_for(77, 0);
        let t = topo(3, &[5, 4]);
        let layout = t.layout();
        let mut params: Vec<f64> =
            (0..t.param_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for span in &layout.layers[1..] {
            for o in 0..span.out_dim {
                params[span.b_offset + o] = 0.0;
            }
        }
        let x = vec![0.3, -0.7, 1.1];
        let (mu1, raw1) = forward(&t, &params, &x).unwrap();
        let first = layout.layers[0];
        for i in first.w_offset..first.b_offset + first.out_dim {
            params[i] *= 2.0;
        }
        let (mu2, raw2) = forward(&t, &params, &x).unwrap();
        assert!((mu2 - 2.0 * mu1).abs() < 1e-10);
        assert!((raw2 - 2.0 * raw1).abs() < 1e-10);
    }

    #[test]
    fn lr_schedule_values() {
        assert_eq!(lr_at_epoch(0.01, 500), 0.01);
        assert_eq!(lr_at_epoch(0.01, 1000), 0.01);
        let want = 0.01 * (-1.0f64).exp();
        assert!((lr_at_epoch(0.01, 2000) - want).abs() < 1e-15);
        // non-increasing in epoch
        let mut prev = f64::INFINITY;
        for e in 0..3000 {
            let lr = lr_at_epoch(0.01, e);
            assert!(lr <= prev + 1e-18);
            prev = lr;
        }
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let dim = 3;
        let mut state = OptimizerState::new(dim, 0.01);
        let mut params = vec![1.0, -2.0, 0.5];
        let grads = vec![0.3, -0.7, 40.0];
        adam_step(&mut state, &mut params, &grads);
        for (i, &g) in grads.iter().enumerate() {
            // one-step recurrences: m_hat = g, v_hat = g^2
            let want = [1.0, -2.0, 0.5][i] - 0.01 * g / (g.abs() + ADAM_EPS);
            assert!((params[i] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params_and_decays_moments() {
        // zero gradient from a fresh state: update is exactly zero
        let mut state = OptimizerState::new(2, 0.01);
        let mut params = vec![1.0, 2.0];
        adam_step(&mut state, &mut params, &[0.0, 0.0]);
        assert_eq!(params, vec![1.0, 2.0]);
        assert_eq!(state.m, vec![0.0, 0.0]);
        // accumulated moments decay under zero gradients
        adam_step(&mut state, &mut params, &[1.0, -1.0]);
        let m_before = state.m.clone();
        adam_step(&mut state, &mut params, &[0.0, 0.0]);
        assert!(state.m.iter().zip(&m_before).all(|(a, b)| a.abs() < b.abs()));
    }

    #[test]
    fn adam_is_deterministic() {
        let mut s1 = OptimizerState::new(2, 0.01);
        let mut s2 = OptimizerState::new(2, 0.01);
        let mut p1 = vec![0.5, -0.5];
        let mut p2 = p1.clone();
        for i in 0..10 {
            let g = vec![0.1 * i as f64, -0.2];
            adam_step(&mut s1, &mut p1, &g);
            adam_step(&mut s2, &mut p2, &g);
        }
        assert_eq!(p1, p2);
        assert_eq!(s1, s2);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let t = topo(3, &[2]);
        let params = vec![0.0; t.param_count()];
        assert!(forward(&t, &params, &[1.0, 2.0]).is_err());
        assert!(forward(&t, &params[1..], &[1.0, 2.0, 3.0]).is_err());
    }
}
