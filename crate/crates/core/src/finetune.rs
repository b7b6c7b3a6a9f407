//! Supervised fine-tuning under the regularized objective
//!
//! ```text
//! F_W = alpha * P + beta * E_W
//! P   = (1/T) sum_t (O_t - O_r)^2          (prediction error)
//! E_W = (1/N_w) sum w^2                    (all weights, biases excluded)
//! ```
//!
//! minimized by plain full-batch gradient descent. `alpha` and `beta` are either
//! fixed or periodically re-estimated with the evidence approximation (see
//! [`reestimate_hyperparams`]).
//!
//! Flat parameter layout, used by [`FeedforwardNet::params`] and by every
//! gradient: for each hidden layer its `n_in x n_out` weights (row-major) then
//! its bias; then the output weights; then the output bias.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::numerics::{RngStream, RowMatrix};
use crate::par::Parallelism;
use crate::rbm::ActivationParams;

/// Rows per reduction chunk. Fixed so that sequential and parallel runs sum
/// in the same order.
const CHUNK_ROWS: usize = 64;

/// Stream that initializes the output unit of a fine-tuned net. Shared by the
/// DBN and the randomly initialized baseline so both start from the same
/// output weights for a given seed.
pub fn output_init_stream(seed: u64) -> RngStream {
    RngStream::new(seed).child(&[0x6f75_7470_7574])
}

/// Stream for randomly initialized hidden layers.
pub fn hidden_init_stream(seed: u64) -> RngStream {
    RngStream::new(seed).child(&[0x6869_6464_656e])
}

/// One hidden layer: `weights` is `n_in x n_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: RowMatrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn n_in(&self) -> usize {
        self.weights.nrows()
    }

    fn n_out(&self) -> usize {
        self.weights.ncols()
    }

    /// `phi(bias + sum_i x_i w_ij)`, summed in the same order as the RBM.
    fn forward_into(&self, x: &[f64], act: &ActivationParams, out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        for (xi, row) in x.iter().zip(self.weights.rows_iter()) {
            if *xi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += xi * w;
                }
            }
        }
        for o in out.iter_mut() {
            *o = act.apply(*o);
        }
    }
}

/// Feedforward regressor: sigmoid hidden layers and one linear output unit.
/// Noise is always off.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedforwardNet {
    hidden: Vec<DenseLayer>,
    output_weights: Vec<f64>,
    output_bias: f64,
    activation: ActivationParams,
}

impl FeedforwardNet {
    pub fn from_parts(
        hidden: Vec<DenseLayer>,
        output_weights: Vec<f64>,
        output_bias: f64,
        activation: ActivationParams,
    ) -> Result<Self> {
        activation.validate()?;
        for layer in &hidden {
            check_len("dense layer bias", layer.n_out(), layer.bias.len())?;
        }
        for pair in hidden.windows(2) {
            check_len("dense layer chaining", pair[0].n_out(), pair[1].n_in())?;
        }
        if let Some(last) = hidden.last() {
            check_len("output weights", last.n_out(), output_weights.len())?;
        }
        if output_weights.is_empty() {
            return Err(Error::invalid("the output unit needs at least one input"));
        }
        let net = FeedforwardNet {
            hidden,
            output_weights,
            output_bias,
            activation: activation.without_noise(),
        };
        if !net.params().iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(net)
    }

    /// Net with Gaussian weights: hidden layer `k` uses `hidden_std(fan_in)`,
    /// the output unit std 0.01; all biases zero. `sizes = [input, h1, ..., hk]`.
    pub fn random(
        sizes: &[usize],
        activation: ActivationParams,
        hidden_std: impl Fn(usize) -> f64,
        hidden_stream: &mut RngStream,
        output_stream: &mut RngStream,
    ) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("network needs an input size"));
        }
        let hidden = sizes
            .windows(2)
            .map(|w| {
                let std = hidden_std(w[0]);
                DenseLayer {
                    weights: RowMatrix::from_fn(w[0], w[1], |_, _| std * hidden_stream.gaussian()),
                    bias: vec![0.0; w[1]],
                }
            })
            .collect();
        let top = *sizes.last().unwrap();
        let output_weights = (0..top)
            .map(|_| crate::rbm::INIT_WEIGHT_STD * output_stream.gaussian())
            .collect();
        Self::from_parts(hidden, output_weights, 0.0, activation)
    }

    pub fn hidden_layers(&self) -> &[DenseLayer] {
        &self.hidden
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.output_weights
    }

    pub fn output_bias(&self) -> f64 {
        self.output_bias
    }

    pub fn activation(&self) -> ActivationParams {
        self.activation
    }

    pub fn input_width(&self) -> usize {
        self.hidden.first().map_or(self.output_weights.len(), |l| l.n_in())
    }

    /// `[input, h1, ..., hk]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_width()];
        sizes.extend(self.hidden.iter().map(|l| l.n_out()));
        sizes
    }

    pub fn n_params(&self) -> usize {
        self.hidden.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum::<usize>()
            + self.output_weights.len()
            + 1
    }

    /// Number of weights (biases excluded), the `N_w` of `E_W`.
    pub fn n_weights(&self) -> usize {
        self.hidden.iter().map(|l| l.weights.as_slice().len()).sum::<usize>() + self.output_weights.len()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.hidden {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(&self.output_weights);
        out.push(self.output_bias);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("flat network parameters", self.n_params(), params.len())?;
        let mut at = 0;
        for layer in &mut self.hidden {
            let nw = layer.weights.as_slice().len();
            layer.weights.as_mut_slice().copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        let no = self.output_weights.len();
        self.output_weights.copy_from_slice(&params[at..at + no]);
        self.output_bias = params[at + no];
        Ok(())
    }

    /// `true` for flat positions holding weights, `false` for biases.
    pub fn weight_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.n_params());
        for layer in &self.hidden {
            mask.extend(std::iter::repeat_n(true, layer.weights.as_slice().len()));
            mask.extend(std::iter::repeat_n(false, layer.bias.len()));
        }
        mask.extend(std::iter::repeat_n(true, self.output_weights.len()));
        mask.push(false);
        mask
    }

    fn sum_squared_weights(&self) -> f64 {
        self.hidden
            .iter()
            .flat_map(|l| l.weights.as_slice())
            .chain(&self.output_weights)
            .map(|w| w * w)
            .sum()
    }

    fn workspace(&self) -> Workspace {
        let mut acts = vec![vec![0.0; self.input_width()]];
        acts.extend(self.hidden.iter().map(|l| vec![0.0; l.n_out()]));
        let widest = acts.iter().map(Vec::len).max().unwrap_or(0);
        Workspace {
            acts,
            delta: vec![0.0; widest],
            delta_next: vec![0.0; widest],
        }
    }

    fn forward_ws(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        ws.acts[0].copy_from_slice(x);
        for (k, layer) in self.hidden.iter().enumerate() {
            let (below, above) = ws.acts.split_at_mut(k + 1);
            layer.forward_into(&below[k], &self.activation, &mut above[0]);
        }
        let top = ws.acts.last().unwrap();
        self.output_bias + self.output_weights.iter().zip(top).map(|(w, a)| w * a).sum::<f64>()
    }

    /// Output of the last hidden layer (the input itself when there is none).
    pub fn hidden_forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_width(), x.len())?;
        let mut ws = self.workspace();
        self.forward_ws(x, &mut ws);
        Ok(ws.acts.pop().unwrap())
    }

    /// Deterministic prediction.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        check_len("network input", self.input_width(), x.len())?;
        let mut ws = self.workspace();
        Ok(self.forward_ws(x, &mut ws))
    }

    pub fn predict_batch(&self, features: &RowMatrix) -> Result<Vec<f64>> {
        check_len("network input", self.input_width(), features.ncols())?;
        let mut ws = self.workspace();
        Ok(features.rows_iter().map(|r| self.forward_ws(r, &mut ws)).collect())
    }

    /// Backpropagate `upstream = dLoss/dprediction` for the sample last passed
    /// through `forward_ws`, accumulating into `grad` (flat layout).
    fn backward_ws(&self, upstream: f64, ws: &mut Workspace, grad: &mut [f64]) {
        let out_at = grad.len() - self.output_weights.len() - 1;
        let top = ws.acts.last().unwrap();
        for (g, a) in grad[out_at..].iter_mut().zip(top) {
            *g += upstream * a;
        }
        grad[out_at + self.output_weights.len()] += upstream;
        if self.hidden.is_empty() {
            return;
        }

        let last = self.hidden.len() - 1;
        let n_top = self.hidden[last].n_out();
        for j in 0..n_top {
            ws.delta[j] = upstream * self.output_weights[j] * self.activation.derivative_from_output(top[j]);
        }

        let mut end = out_at;
        for k in (0..self.hidden.len()).rev() {
            let layer = &self.hidden[k];
            let (n_in, n_out) = (layer.n_in(), layer.n_out());
            let bias_at = end - n_out;
            let w_at = bias_at - n_in * n_out;
            for j in 0..n_out {
                grad[bias_at + j] += ws.delta[j];
            }
            let input = &ws.acts[k];
            for i in 0..n_in {
                let xi = input[i];
                if xi != 0.0 {
                    let g = &mut grad[w_at + i * n_out..w_at + (i + 1) * n_out];
                    for (gij, d) in g.iter_mut().zip(&ws.delta[..n_out]) {
                        *gij += xi * d;
                    }
                }
            }
            if k > 0 {
                for i in 0..n_in {
                    let row = layer.weights.row(i);
                    let back: f64 = row.iter().zip(&ws.delta[..n_out]).map(|(w, d)| w * d).sum();
                    ws.delta_next[i] = back * self.activation.derivative_from_output(input[i]);
                }
                std::mem::swap(&mut ws.delta, &mut ws.delta_next);
            }
            end = w_at;
        }
    }

    /// `d prediction / d params` at `x`.
    pub fn jacobian_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", self.input_width(), x.len())?;
        let mut ws = self.workspace();
        let mut row = vec![0.0; self.n_params()];
        self.forward_ws(x, &mut ws);
        self.backward_ws(1.0, &mut ws, &mut row);
        Ok(row)
    }

    /// `(sum_t 2 (O_t - O_r) dO_t/dtheta, sum_t (O_t - O_r)^2)` over all rows,
    /// reduced chunk by chunk in row order.
    fn squared_error_gradient(
        &self,
        features: &RowMatrix,
        targets: &[f64],
        parallelism: Parallelism,
    ) -> (Vec<f64>, f64) {
        let n = features.nrows();
        let chunks = n.div_ceil(CHUNK_ROWS);
        let partials = parallelism.map(chunks, |c| {
            let mut ws = self.workspace();
            let mut grad = vec![0.0; self.n_params()];
            let mut sse = 0.0;
            for t in c * CHUNK_ROWS..((c + 1) * CHUNK_ROWS).min(n) {
                let err = self.forward_ws(features.row(t), &mut ws) - targets[t];
                sse += err * err;
                self.backward_ws(2.0 * err, &mut ws, &mut grad);
            }
            (grad, sse)
        });
        let mut total = vec![0.0; self.n_params()];
        let mut sse = 0.0;
        for (grad, s) in partials {
            for (t, g) in total.iter_mut().zip(&grad) {
                *t += g;
            }
            sse += s;
        }
        (total, sse)
    }
}

struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

/// Value of the objective and its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub f_w: f64,
    pub p: f64,
    pub e_w: f64,
}

fn check_data(net: &FeedforwardNet, features: &RowMatrix, targets: &[f64]) -> Result<()> {
    if features.nrows() == 0 {
        return Err(Error::invalid("objective needs at least one sample"));
    }
    check_len("target count", features.nrows(), targets.len())?;
    check_len("feature width", net.input_width(), features.ncols())?;
    Ok(())
}

/// `(F_W, P, E_W)` on the given samples.
pub fn objective(
    net: &FeedforwardNet,
    features: &RowMatrix,
    targets: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<ObjectiveValue> {
    check_data(net, features, targets)?;
    let mut ws = net.workspace();
    let sse: f64 = features
        .rows_iter()
        .zip(targets)
        .map(|(x, y)| {
            let e = net.forward_ws(x, &mut ws) - y;
            e * e
        })
        .sum();
    Ok(combine(net, sse, features.nrows(), alpha, beta))
}

fn combine(net: &FeedforwardNet, sse: f64, rows: usize, alpha: f64, beta: f64) -> ObjectiveValue {
    let p = sse / rows as f64;
    let e_w = net.sum_squared_weights() / net.n_weights() as f64;
    ObjectiveValue {
        f_w: alpha * p + beta * e_w,
        p,
        e_w,
    }
}

/// Objective and its exact gradient (flat layout).
pub fn objective_and_gradient(
    net: &FeedforwardNet,
    features: &RowMatrix,
    targets: &[f64],
    alpha: f64,
    beta: f64,
    parallelism: Parallelism,
) -> Result<(ObjectiveValue, Vec<f64>)> {
    check_data(net, features, targets)?;
    let (mut grad, sse) = net.squared_error_gradient(features, targets, parallelism);
    let value = combine(net, sse, features.nrows(), alpha, beta);
    let data_scale = alpha / features.nrows() as f64;
    for g in grad.iter_mut() {
        *g *= data_scale;
    }
    if beta != 0.0 {
        let weight_scale = beta * 2.0 / net.n_weights() as f64;
        for ((g, p), is_weight) in grad.iter_mut().zip(net.params()).zip(net.weight_mask()) {
            if is_weight {
                *g += weight_scale * p;
            }
        }
    }
    if !grad.iter().all(|g| g.is_finite()) {
        return Err(Error::Divergence {
            epoch: 0,
            learning_rate: f64::NAN,
            detail: "non-finite gradient".into(),
        });
    }
    Ok((value, grad))
}

/// Exact gradient of `F_W`.
pub fn gradient(
    net: &FeedforwardNet,
    features: &RowMatrix,
    targets: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    Ok(objective_and_gradient(net, features, targets, alpha, beta, Parallelism::default())?.1)
}

/// Gradient of the plain mean squared error `P`, without any weighting.
pub fn mse_gradient(
    net: &FeedforwardNet,
    features: &RowMatrix,
    targets: &[f64],
    parallelism: Parallelism,
) -> Result<(f64, Vec<f64>)> {
    check_data(net, features, targets)?;
    let (mut grad, sse) = net.squared_error_gradient(features, targets, parallelism);
    let t = features.nrows() as f64;
    for g in grad.iter_mut() {
        *g *= 1.0 / t;
    }
    Ok((sse / t, grad))
}

/// Fine-tuning settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FineTuneConfig {
    /// Weight of the error term `P`.
    pub alpha: f64,
    /// Weight of the weight-decay term `E_W`.
    pub beta: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub reestimate: bool,
    pub reestimate_interval: usize,
    /// Seed for any random initialization done on behalf of the trainer.
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        FineTuneConfig {
            alpha: 1.0,
            beta: 0.01,
            learning_rate: 0.5,
            epochs: 1000,
            reestimate: false,
            reestimate_interval: 50,
            seed: 0,
            parallelism: Parallelism::default(),
        }
    }
}

impl FineTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return Err(Error::Config(format!(
                "need alpha, beta >= 0 with alpha + beta > 0, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("fine-tuning learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("fine-tuning needs at least one epoch".into()));
        }
        if self.reestimate && self.reestimate_interval == 0 {
            return Err(Error::Config("re-estimation interval must be positive".into()));
        }
        Ok(())
    }
}

/// One history record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainerState {
    pub epoch: usize,
    pub f_w: f64,
    pub p: f64,
    pub e_w: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Effective number of parameters from the latest re-estimation.
    pub gamma: Option<f64>,
    /// The latest re-estimation hit a singular Hessian and kept the old values.
    pub evidence_fallback: bool,
}

/// Full-batch gradient descent on `F_W` for `config.epochs` steps.
///
/// Each history entry holds the objective at the start of its epoch. With
/// re-estimation on, `alpha` and `beta` are refreshed before every epoch
/// `e > 1` with `(e - 1) % interval == 0`; the evidence estimates are rescaled
/// so `alpha + beta` keeps its configured value.
pub fn train(
    net: &FeedforwardNet,
    features: &RowMatrix,
    targets: &[f64],
    config: &FineTuneConfig,
) -> Result<(FeedforwardNet, Vec<TrainerState>)> {
    config.validate()?;
    check_data(net, features, targets)?;
    let mut net = net.clone();
    let mut params = net.params();
    let (mut alpha, mut beta) = (config.alpha, config.beta);
    let budget = config.alpha + config.beta;
    let mut gamma = None;
    let mut fallback = false;
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.reestimate && epoch > 1 && (epoch - 1) % config.reestimate_interval == 0 {
            let ev = reestimate_hyperparams(&net, features, targets, alpha, beta)?;
            fallback = ev.fallback;
            if !ev.fallback {
                let scale = budget / (ev.alpha + ev.beta);
                alpha = ev.alpha * scale;
                beta = ev.beta * scale;
                gamma = Some(ev.gamma);
            }
        }
        let (value, grad) =
            objective_and_gradient(&net, features, targets, alpha, beta, config.parallelism).map_err(|e| match e {
                Error::Divergence { detail, .. } => Error::Divergence {
                    epoch,
                    learning_rate: config.learning_rate,
                    detail,
                },
                other => other,
            })?;
        if !value.f_w.is_finite() {
            return Err(Error::Divergence {
                epoch,
                learning_rate: config.learning_rate,
                detail: "objective is not finite".into(),
            });
        }
        history.push(TrainerState {
            epoch,
            f_w: value.f_w,
            p: value.p,
            e_w: value.e_w,
            alpha,
            beta,
            gamma,
            evidence_fallback: fallback,
        });
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                learning_rate: config.learning_rate,
                detail: "parameters became non-finite".into(),
            });
        }
        net.set_params(&params)?;
    }
    Ok((net, history))
}

/// Plain mean-squared-error gradient descent (ordinary back propagation).
/// Returns the parameter vector after every step.
pub fn train_mse(
    net: &FeedforwardNet,
    features: &RowMatrix,
    targets: &[f64],
    learning_rate: f64,
    epochs: usize,
    parallelism: Parallelism,
) -> Result<(FeedforwardNet, Vec<Vec<f64>>)> {
    let mut net = net.clone();
    let mut params = net.params();
    let mut trajectory = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let (_, grad) = mse_gradient(&net, features, targets, parallelism)?;
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= learning_rate * g;
        }
        if !params.iter().all(|p| p.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                learning_rate,
                detail: "parameters became non-finite".into(),
            });
        }
        net.set_params(&params)?;
        trajectory.push(params.clone());
    }
    Ok((net, trajectory))
}

/// Result of one evidence update, in the `F_W = alpha P + beta E_W` convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub alpha: f64,
    pub beta: f64,
    /// Effective number of well-determined weights, in `[0, N_w]`.
    pub gamma: f64,
    /// `true` when the update failed and `(alpha, beta)` are the inputs.
    pub fallback: bool,
}

/// Evidence (MacKay / Foresee–Hagan) update of `alpha` and `beta`.
///
/// The framework works on sum forms `F = b E_D + a E_S` with
/// `E_D = sum_t e_t^2` and `E_S = sum w^2`, so `b = alpha / T` and
/// `a = beta / N_w`. With the Gauss–Newton Hessian `H = 2b J^T J + 2a D`
/// (`D` selects weights), the update is
///
/// ```text
/// gamma = N_w - 2a tr_w(H^-1)
/// a'    = gamma / (2 E_S)
/// b'    = (T - gamma) / (2 E_D)
/// ```
///
/// mapped back as `alpha' = b' T`, `beta' = a' N_w`. A singular Hessian, or a
/// degenerate update, returns the inputs with `fallback = true`.
pub fn reestimate_hyperparams(
    net: &FeedforwardNet,
    features: &RowMatrix,
    targets: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<Evidence> {
    check_data(net, features, targets)?;
    let rows = features.nrows();
    let (t, n_w, n_p) = (rows as f64, net.n_weights() as f64, net.n_params());
    let keep = Evidence {
        alpha,
        beta,
        gamma: f64::NAN,
        fallback: true,
    };

    let mut jtj = DMatrix::<f64>::zeros(n_p, n_p);
    let mut sse = 0.0;
    let mut ws = net.workspace();
    for start in (0..rows).step_by(256) {
        let end = (start + 256).min(rows);
        let mut jac = DMatrix::<f64>::zeros(end - start, n_p);
        for r in start..end {
            let mut row = vec![0.0; n_p];
            let e = net.forward_ws(features.row(r), &mut ws) - targets[r];
            sse += e * e;
            net.backward_ws(1.0, &mut ws, &mut row);
            for (c, v) in row.iter().enumerate() {
                jac[(r - start, c)] = *v;
            }
        }
        jtj += jac.tr_mul(&jac);
    }
    let e_s = net.sum_squared_weights();
    if !(sse > 0.0 && e_s > 0.0) {
        return Ok(keep);
    }

    let (a, b) = (beta / n_w, alpha / t);
    let mask = net.weight_mask();
    let mut hessian = jtj * (2.0 * b);
    for (k, &is_weight) in mask.iter().enumerate() {
        if is_weight {
            hessian[(k, k)] += 2.0 * a;
        }
    }
    let Some(chol) = hessian.cholesky() else {
        return Ok(keep);
    };
    let inverse = chol.inverse();
    let trace_w: f64 = mask.iter().enumerate().filter(|(_, w)| **w).map(|(k, _)| inverse[(k, k)]).sum();
    let gamma = (n_w - 2.0 * a * trace_w).clamp(0.0, n_w);

    let a_new = gamma / (2.0 * e_s);
    let b_new = (t - gamma) / (2.0 * sse);
    let (alpha_new, beta_new) = (b_new * t, a_new * n_w);
    if !(alpha_new > 0.0 && beta_new > 0.0 && alpha_new.is_finite() && beta_new.is_finite()) {
        return Ok(Evidence { gamma, ..keep });
    }
    Ok(Evidence {
        alpha: alpha_new,
        beta: beta_new,
        gamma,
        fallback: false,
    })
}

/// Header of the training-history CSV.
pub const HISTORY_HEADER: &str = "epoch,F_W,P,E_W,alpha,beta";

/// One CSV row per epoch: `epoch,F_W,P,E_W,alpha,beta`.
pub fn write_history_csv(history: &[TrainerState], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for s in history {
        writeln!(out, "{},{},{},{},{},{}", s.epoch, s.f_w, s.p, s.e_w, s.alpha, s.beta)?;
    }
    Ok(())
}
