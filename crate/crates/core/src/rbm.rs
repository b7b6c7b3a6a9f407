//! Restricted Boltzmann machine with a binary (Bernoulli) formulation and a
//! continuous formulation, trained by one-step contrastive divergence.
//!
//! Continuous units compute `phi(b_j + sum_i w_ij s_i + sigma * N(0,1))` with
//!
//! ```text
//! phi(x) = theta_low + (theta_high - theta_low) / (1 + exp(-a x))
//! ```
//!
//! where `a` is the noise-control (gain) parameter shared by every unit.

use crate::error::{check_len, Error, Result};
use crate::numerics::{logistic, NoiseSource, RngStream, RowMatrix};

/// Largest `n_visible + n_hidden` accepted by the exact enumeration routines.
pub const MAX_ENUMERATED_UNITS: usize = 12;

/// Standard deviation of the Gaussian weight initialization.
pub const INIT_WEIGHT_STD: f64 = 0.01;

/// Parameters of the continuous sigmoid transfer function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationParams {
    /// Lower asymptote.
    pub theta_low: f64,
    /// Upper asymptote.
    pub theta_high: f64,
    /// Scale of the Gaussian noise added to the pre-activation.
    pub sigma: f64,
    /// Gain `a` of the sigmoid.
    pub noise_control: f64,
}

impl Default for ActivationParams {
    fn default() -> Self {
        ActivationParams {
            theta_low: 0.0,
            theta_high: 1.0,
            sigma: 0.2,
            noise_control: 1.0,
        }
    }
}

impl ActivationParams {
    pub fn new(theta_low: f64, theta_high: f64, sigma: f64, noise_control: f64) -> Result<Self> {
        let p = ActivationParams {
            theta_low,
            theta_high,
            sigma,
            noise_control,
        };
        p.validate()?;
        Ok(p)
    }

    /// Plain logistic function: asymptotes 0 and 1, unit gain, no noise.
    pub fn logistic() -> Self {
        ActivationParams {
            theta_low: 0.0,
            theta_high: 1.0,
            sigma: 0.0,
            noise_control: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.theta_low, self.theta_high, self.sigma, self.noise_control]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("activation parameters must be finite"));
        }
        if self.theta_low >= self.theta_high {
            return Err(Error::invalid(format!(
                "theta_low ({}) must be below theta_high ({})",
                self.theta_low, self.theta_high
            )));
        }
        if self.sigma < 0.0 {
            return Err(Error::invalid("sigma must be non-negative"));
        }
        if self.noise_control <= 0.0 {
            return Err(Error::invalid("noise control must be positive"));
        }
        Ok(())
    }

    /// Same parameters with the noise switched off.
    pub fn without_noise(mut self) -> Self {
        self.sigma = 0.0;
        self
    }

    /// `phi(x)`.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.theta_low + (self.theta_high - self.theta_low) * logistic(self.noise_control * x)
    }

    /// Derivative of `phi` expressed through its output `y = phi(x)`.
    #[inline]
    pub fn derivative_from_output(&self, y: f64) -> f64 {
        let span = self.theta_high - self.theta_low;
        let s = (y - self.theta_low) / span;
        span * self.noise_control * s * (1.0 - s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RbmMode {
    /// Bernoulli units (logistic probabilities, sampled states).
    Binary,
    /// Continuous noisy sigmoid units.
    Continuous,
}

/// How hidden states drive the reconstruction during continuous CD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChainSampling {
    /// Hidden values stay continuous.
    #[default]
    Continuous,
    /// Hidden values are turned into Bernoulli states before reconstruction,
    /// with probability `(s - theta_low) / (theta_high - theta_low)`.
    BernoulliHidden,
}

/// Batch statistics of one CD-1 step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdStats {
    /// Reconstruction error of the batch before the update.
    pub reconstruction_error: f64,
    pub rows: usize,
}

/// Gradient (or update) with the same shape as an RBM's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGradient {
    pub weights: RowMatrix,
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
}

impl RbmGradient {
    /// Weights (row-major), then visible bias, then hidden bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.weights.as_slice().to_vec();
        out.extend_from_slice(&self.visible_bias);
        out.extend_from_slice(&self.hidden_bias);
        out
    }
}

/// One two-layer RBM. Weights are stored `n_visible x n_hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRbm {
    weights: RowMatrix,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
    activation: ActivationParams,
    mode: RbmMode,
    chain_sampling: ChainSampling,
}

impl ContinuousRbm {
    /// Gaussian weights (std 0.01), zero biases.
    pub fn new_random(
        n_visible: usize,
        n_hidden: usize,
        activation: ActivationParams,
        mode: RbmMode,
        stream: &mut RngStream,
    ) -> Result<Self> {
        let weights = RowMatrix::from_fn(n_visible, n_hidden, |_, _| {
            INIT_WEIGHT_STD * stream.gaussian()
        });
        Self::from_parts(
            weights,
            vec![0.0; n_visible],
            vec![0.0; n_hidden],
            activation,
            mode,
        )
    }

    pub fn zeros(n_visible: usize, n_hidden: usize, activation: ActivationParams, mode: RbmMode) -> Result<Self> {
        Self::from_parts(
            RowMatrix::zeros(n_visible, n_hidden),
            vec![0.0; n_visible],
            vec![0.0; n_hidden],
            activation,
            mode,
        )
    }

    pub fn from_parts(
        weights: RowMatrix,
        visible_bias: Vec<f64>,
        hidden_bias: Vec<f64>,
        activation: ActivationParams,
        mode: RbmMode,
    ) -> Result<Self> {
        check_len("rbm visible bias", weights.nrows(), visible_bias.len())?;
        check_len("rbm hidden bias", weights.ncols(), hidden_bias.len())?;
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::invalid("an RBM needs at least one visible and one hidden unit"));
        }
        activation.validate()?;
        let rbm = ContinuousRbm {
            weights,
            visible_bias,
            hidden_bias,
            activation,
            mode,
            chain_sampling: ChainSampling::default(),
        };
        if !rbm.all_finite() {
            return Err(Error::invalid("RBM parameters must be finite"));
        }
        Ok(rbm)
    }

    pub fn with_chain_sampling(mut self, chain_sampling: ChainSampling) -> Self {
        self.chain_sampling = chain_sampling;
        self
    }

    pub fn with_mode(mut self, mode: RbmMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &RowMatrix {
        &self.weights
    }

    pub fn visible_bias(&self) -> &[f64] {
        &self.visible_bias
    }

    pub fn hidden_bias(&self) -> &[f64] {
        &self.hidden_bias
    }

    pub fn activation(&self) -> ActivationParams {
        self.activation
    }

    pub fn mode(&self) -> RbmMode {
        self.mode
    }

    pub fn chain_sampling(&self) -> ChainSampling {
        self.chain_sampling
    }

    /// The mirrored machine: visible and hidden layers swapped.
    pub fn mirrored(&self) -> ContinuousRbm {
        ContinuousRbm {
            weights: self.weights.transpose(),
            visible_bias: self.hidden_bias.clone(),
            hidden_bias: self.visible_bias.clone(),
            ..self.clone()
        }
    }

    /// Weights (row-major), visible bias, hidden bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = self.weights.as_slice().to_vec();
        out.extend_from_slice(&self.visible_bias);
        out.extend_from_slice(&self.hidden_bias);
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        let nw = self.weights.as_slice().len();
        check_len("rbm flat parameters", nw + self.n_visible() + self.n_hidden(), params.len())?;
        self.weights.as_mut_slice().copy_from_slice(&params[..nw]);
        let nv = self.n_visible();
        self.visible_bias.copy_from_slice(&params[nw..nw + nv]);
        self.hidden_bias.copy_from_slice(&params[nw + nv..]);
        Ok(())
    }

    fn all_finite(&self) -> bool {
        self.weights.all_finite()
            && self.visible_bias.iter().all(|x| x.is_finite())
            && self.hidden_bias.iter().all(|x| x.is_finite())
    }

    /// `b_j + sum_i v_i w_ij`.
    pub fn hidden_preactivation(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("hidden pre-activation input", self.n_visible(), v.len())?;
        let mut out = self.hidden_bias.clone();
        for (vi, row) in v.iter().zip(self.weights.rows_iter()) {
            if *vi != 0.0 {
                for (o, w) in out.iter_mut().zip(row) {
                    *o += vi * w;
                }
            }
        }
        Ok(out)
    }

    /// `c_i + sum_j w_ij h_j`.
    pub fn visible_preactivation(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len("visible pre-activation input", self.n_hidden(), h.len())?;
        Ok(self
            .weights
            .rows_iter()
            .zip(&self.visible_bias)
            .map(|(row, c)| c + row.iter().zip(h).map(|(w, hj)| w * hj).sum::<f64>())
            .collect())
    }

    /// `p(h_j = 1 | v) = logistic(b_j + sum_i v_i w_ij)`.
    pub fn hidden_prob(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.hidden_preactivation(v)?.into_iter().map(logistic).collect())
    }

    /// `p(v_i = 1 | h) = logistic(c_i + sum_j h_j w_ij)`.
    pub fn visible_prob(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.visible_preactivation(h)?.into_iter().map(logistic).collect())
    }

    /// Continuous hidden values. `noise = None` gives the deterministic pass.
    pub fn hidden_activation(&self, v: &[f64], noise: Option<&mut dyn NoiseSource>) -> Result<Vec<f64>> {
        let pre = self.hidden_preactivation(v)?;
        Ok(self.continuous_units(pre, noise))
    }

    /// Continuous visible values. `noise = None` gives the deterministic pass.
    pub fn visible_activation(&self, h: &[f64], noise: Option<&mut dyn NoiseSource>) -> Result<Vec<f64>> {
        let pre = self.visible_preactivation(h)?;
        Ok(self.continuous_units(pre, noise))
    }

    fn continuous_units(&self, mut pre: Vec<f64>, noise: Option<&mut dyn NoiseSource>) -> Vec<f64> {
        let act = self.activation;
        match noise {
            Some(src) if act.sigma != 0.0 => {
                for x in pre.iter_mut() {
                    *x = act.apply(*x + act.sigma * src.standard_normal());
                }
            }
            _ => {
                for x in pre.iter_mut() {
                    *x = act.apply(*x);
                }
            }
        }
        pre
    }

    /// Deterministic hidden layer output for the machine's mode.
    pub fn mean_hidden(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            RbmMode::Binary => self.hidden_prob(v),
            RbmMode::Continuous => self.hidden_activation(v, None),
        }
    }

    /// Deterministic visible layer output for the machine's mode.
    pub fn mean_visible(&self, h: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            RbmMode::Binary => self.visible_prob(h),
            RbmMode::Continuous => self.visible_activation(h, None),
        }
    }

    /// Deterministic one-step reconstruction `v -> h -> v'`.
    pub fn reconstruct(&self, v: &[f64]) -> Result<Vec<f64>> {
        let h = self.mean_hidden(v)?;
        self.mean_visible(&h)
    }

    /// Mean squared difference between the batch and its reconstruction.
    pub fn reconstruction_error(&self, batch: &RowMatrix) -> Result<f64> {
        if batch.nrows() == 0 {
            return Err(Error::invalid("reconstruction error of an empty batch"));
        }
        check_len("reconstruction batch width", self.n_visible(), batch.ncols())?;
        let mut total = 0.0;
        for row in batch.rows_iter() {
            let rec = self.reconstruct(row)?;
            total += squared_distance(row, &rec);
        }
        Ok(total / (batch.nrows() * batch.ncols()) as f64)
    }

    fn validate_batch(&self, batch: &RowMatrix) -> Result<()> {
        if batch.nrows() == 0 {
            return Err(Error::invalid("empty training batch"));
        }
        check_len("training batch width", self.n_visible(), batch.ncols())?;
        match self.mode {
            RbmMode::Binary => {
                if let Some(x) = batch.as_slice().iter().find(|&&x| x != 0.0 && x != 1.0) {
                    return Err(Error::invalid(format!(
                        "binary RBM expects entries in {{0, 1}}, found {x}"
                    )));
                }
            }
            RbmMode::Continuous => {
                let lo = self.activation.theta_low.min(0.0);
                let hi = self.activation.theta_high.max(1.0);
                if let Some(x) = batch.as_slice().iter().find(|&&x| !(lo..=hi).contains(&x)) {
                    return Err(Error::invalid(format!(
                        "continuous RBM expects entries in [{lo}, {hi}], found {x}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// One CD-1 step on a copy of `self`; returns the updated machine.
    pub fn cd1_update(
        &self,
        batch: &RowMatrix,
        learning_rate: f64,
        noise: &mut dyn NoiseSource,
    ) -> Result<(ContinuousRbm, CdStats)> {
        let mut next = self.clone();
        let stats = next.cd1_step(batch, learning_rate, noise)?;
        Ok((next, stats))
    }

    /// One CD-1 step in place.
    ///
    /// For each row: `h0` from `v0`, `v1` from `h0`, `h1` from `v1`, then
    /// `dW = lr (<v0 h0> - <v1 h1>)`, `db = lr (<h0> - <h1>)`,
    /// `dc = lr (<v0> - <v1>)` with averages over the batch. On a non-finite
    /// result the parameters are left untouched and a divergence error is
    /// returned (epoch 0; callers re-tag it).
    pub fn cd1_step(
        &mut self,
        batch: &RowMatrix,
        learning_rate: f64,
        noise: &mut dyn NoiseSource,
    ) -> Result<CdStats> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {learning_rate}")));
        }
        self.validate_batch(batch)?;
        let reconstruction_error = self.reconstruction_error(batch)?;

        let (nv, nh) = (self.n_visible(), self.n_hidden());
        let mut dw = RowMatrix::zeros(nv, nh);
        let mut dc = vec![0.0; nv];
        let mut db = vec![0.0; nh];

        for v0 in batch.rows_iter() {
            let (h0, v1, h1) = self.gibbs_chain(v0, noise)?;
            for i in 0..nv {
                let row = dw.row_mut(i);
                for j in 0..nh {
                    row[j] += v0[i] * h0[j] - v1[i] * h1[j];
                }
                dc[i] += v0[i] - v1[i];
            }
            for j in 0..nh {
                db[j] += h0[j] - h1[j];
            }
        }

        let scale = learning_rate / batch.nrows() as f64;
        let mut weights = self.weights.clone();
        for (w, d) in weights.as_mut_slice().iter_mut().zip(dw.as_slice()) {
            *w += scale * d;
        }
        let visible_bias: Vec<f64> = self.visible_bias.iter().zip(&dc).map(|(c, d)| c + scale * d).collect();
        let hidden_bias: Vec<f64> = self.hidden_bias.iter().zip(&db).map(|(b, d)| b + scale * d).collect();

        let finite = weights.all_finite()
            && visible_bias.iter().all(|x| x.is_finite())
            && hidden_bias.iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::Divergence {
                epoch: 0,
                learning_rate,
                detail: "contrastive divergence produced non-finite parameters".into(),
            });
        }
        self.weights = weights;
        self.visible_bias = visible_bias;
        self.hidden_bias = hidden_bias;
        Ok(CdStats {
            reconstruction_error,
            rows: batch.nrows(),
        })
    }

    /// `(h0, v1, h1)` for one data row.
    fn gibbs_chain(&self, v0: &[f64], noise: &mut dyn NoiseSource) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        match self.mode {
            RbmMode::Binary => {
                let h0 = sample_bernoulli(&self.hidden_prob(v0)?, noise);
                let v1 = sample_bernoulli(&self.visible_prob(&h0)?, noise);
                let h1 = sample_bernoulli(&self.hidden_prob(&v1)?, noise);
                Ok((h0, v1, h1))
            }
            RbmMode::Continuous => {
                let h0 = self.hidden_activation(v0, Some(&mut *noise))?;
                let v1 = match self.chain_sampling {
                    ChainSampling::Continuous => self.visible_activation(&h0, Some(&mut *noise))?,
                    ChainSampling::BernoulliHidden => {
                        let span = self.activation.theta_high - self.activation.theta_low;
                        let probs: Vec<f64> =
                            h0.iter().map(|s| (s - self.activation.theta_low) / span).collect();
                        let states = sample_bernoulli(&probs, noise);
                        self.visible_activation(&states, Some(&mut *noise))?
                    }
                };
                let h1 = self.hidden_activation(&v1, Some(&mut *noise))?;
                Ok((h0, v1, h1))
            }
        }
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.mode != RbmMode::Binary {
            return Err(Error::invalid("exact enumeration needs a binary RBM"));
        }
        let units = self.n_visible() + self.n_hidden();
        if units > MAX_ENUMERATED_UNITS {
            return Err(Error::invalid(format!(
                "exact enumeration limited to {MAX_ENUMERATED_UNITS} units, RBM has {units}"
            )));
        }
        Ok(())
    }

    fn validate_binary_data(&self, batch: &RowMatrix) -> Result<()> {
        if batch.nrows() == 0 {
            return Err(Error::invalid("empty batch"));
        }
        check_len("batch width", self.n_visible(), batch.ncols())?;
        if batch.as_slice().iter().any(|&x| x != 0.0 && x != 1.0) {
            return Err(Error::invalid("exact likelihood needs binary data"));
        }
        Ok(())
    }

    /// `-E(v, h) = v^T W h + c^T v + b^T h`.
    fn neg_energy(&self, v: &[f64], h: &[f64]) -> f64 {
        let mut e = 0.0;
        for (i, vi) in v.iter().enumerate() {
            if *vi != 0.0 {
                let row = self.weights.row(i);
                e += vi * (self.visible_bias[i] + row.iter().zip(h).map(|(w, hj)| w * hj).sum::<f64>());
            }
        }
        e + self.hidden_bias.iter().zip(h).map(|(b, hj)| b * hj).sum::<f64>()
    }

    /// All joint states with their unnormalized log-weights, and `log Z`.
    fn enumerate_joint(&self) -> (Vec<(Vec<f64>, Vec<f64>, f64)>, f64) {
        let (nv, nh) = (self.n_visible(), self.n_hidden());
        let mut states = Vec::with_capacity(1 << (nv + nh));
        for vbits in 0..(1usize << nv) {
            let v = bits_to_state(vbits, nv);
            for hbits in 0..(1usize << nh) {
                let h = bits_to_state(hbits, nh);
                let le = self.neg_energy(&v, &h);
                states.push((v.clone(), h, le));
            }
        }
        let max = states.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + states.iter().map(|s| (s.2 - max).exp()).sum::<f64>().ln();
        (states, log_z)
    }

    /// Mean log-likelihood of binary data under the exact Boltzmann distribution.
    pub fn mean_log_likelihood(&self, batch: &RowMatrix) -> Result<f64> {
        self.check_enumerable()?;
        self.validate_binary_data(batch)?;
        let (_, log_z) = self.enumerate_joint();
        let mut total = 0.0;
        for v in batch.rows_iter() {
            // log sum_h exp(-E) = c^T v + sum_j softplus(b_j + sum_i v_i w_ij)
            let pre = self.hidden_preactivation(v)?;
            let vis: f64 = self.visible_bias.iter().zip(v).map(|(c, x)| c * x).sum();
            total += vis + pre.iter().map(|&x| softplus(x)).sum::<f64>() - log_z;
        }
        Ok(total / batch.nrows() as f64)
    }

    /// Exact gradient of the mean log-likelihood: data expectations minus
    /// model expectations, the latter by enumerating all joint states.
    pub fn exact_loglik_gradient(&self, batch: &RowMatrix) -> Result<RbmGradient> {
        self.check_enumerable()?;
        self.validate_binary_data(batch)?;
        let (nv, nh) = (self.n_visible(), self.n_hidden());

        let mut data_vh = RowMatrix::zeros(nv, nh);
        let mut data_v = vec![0.0; nv];
        let mut data_h = vec![0.0; nh];
        for v in batch.rows_iter() {
            let ph = self.hidden_prob(v)?;
            for i in 0..nv {
                data_v[i] += v[i];
                for j in 0..nh {
                    data_vh.row_mut(i)[j] += v[i] * ph[j];
                }
            }
            for j in 0..nh {
                data_h[j] += ph[j];
            }
        }
        let n = batch.nrows() as f64;

        let (states, log_z) = self.enumerate_joint();
        let mut model_vh = RowMatrix::zeros(nv, nh);
        let mut model_v = vec![0.0; nv];
        let mut model_h = vec![0.0; nh];
        for (v, h, le) in &states {
            let p = (le - log_z).exp();
            for i in 0..nv {
                model_v[i] += p * v[i];
                for j in 0..nh {
                    model_vh.row_mut(i)[j] += p * v[i] * h[j];
                }
            }
            for j in 0..nh {
                model_h[j] += p * h[j];
            }
        }

        let weights = RowMatrix::from_fn(nv, nh, |i, j| data_vh.get(i, j) / n - model_vh.get(i, j));
        Ok(RbmGradient {
            weights,
            visible_bias: data_v.iter().zip(&model_v).map(|(d, m)| d / n - m).collect(),
            hidden_bias: data_h.iter().zip(&model_h).map(|(d, m)| d / n - m).collect(),
        })
    }
}

fn sample_bernoulli(probs: &[f64], noise: &mut dyn NoiseSource) -> Vec<f64> {
    probs
        .iter()
        .map(|&p| if noise.uniform() < p { 1.0 } else { 0.0 })
        .collect()
}

fn bits_to_state(bits: usize, n: usize) -> Vec<f64> {
    (0..n).map(|k| ((bits >> k) & 1) as f64).collect()
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Free-function forms of the RBM operations.
pub fn hidden_prob(rbm: &ContinuousRbm, v: &[f64]) -> Result<Vec<f64>> {
    rbm.hidden_prob(v)
}

pub fn visible_prob(rbm: &ContinuousRbm, h: &[f64]) -> Result<Vec<f64>> {
    rbm.visible_prob(h)
}

pub fn cd1_update(
    rbm: &ContinuousRbm,
    batch: &RowMatrix,
    learning_rate: f64,
    stream: &mut RngStream,
) -> Result<(ContinuousRbm, CdStats)> {
    rbm.cd1_update(batch, learning_rate, stream)
}

pub fn reconstruction_error(rbm: &ContinuousRbm, batch: &RowMatrix) -> Result<f64> {
    rbm.reconstruction_error(batch)
}

pub fn exact_loglik_gradient(rbm: &ContinuousRbm, batch: &RowMatrix) -> Result<RbmGradient> {
    rbm.exact_loglik_gradient(batch)
}

/// Scripted draws, for tests that pin the chain.
#[derive(Debug, Clone, Default)]
pub struct ScriptedNoise {
    pub normals: std::collections::VecDeque<f64>,
    pub uniforms: std::collections::VecDeque<f64>,
}

impl ScriptedNoise {
    pub fn new(normals: &[f64], uniforms: &[f64]) -> Self {
        ScriptedNoise {
            normals: normals.iter().copied().collect(),
            uniforms: uniforms.iter().copied().collect(),
        }
    }
}

impl NoiseSource for ScriptedNoise {
    fn standard_normal(&mut self) -> f64 {
        self.normals.pop_front().expect("scripted normal draws exhausted")
    }

    fn uniform(&mut self) -> f64 {
        self.uniforms.pop_front().expect("scripted uniform draws exhausted")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_by_one(w: f64, c: f64, b: f64, act: ActivationParams, mode: RbmMode) -> ContinuousRbm {
        ContinuousRbm::from_parts(RowMatrix::from_vec(1, 1, vec![w]).unwrap(), vec![c], vec![b], act, mode)
            .unwrap()
    }

    fn random_rbm(nv: usize, nh: usize, scale: f64, mode: RbmMode, seed: u64) -> ContinuousRbm {
        let mut s = RngStream::new(seed);
        let w = RowMatrix::from_fn(nv, nh, |_, _| scale * s.gaussian());
        let c = (0..nv).map(|_| scale * s.gaussian()).collect();
        let b = (0..nh).map(|_| scale * s.gaussian()).collect();
        ContinuousRbm::from_parts(w, c, b, ActivationParams::default(), mode).unwrap()
    }

    #[test]
    fn zero_rbm_probabilities_are_half() {
        let rbm = ContinuousRbm::zeros(3, 2, ActivationParams::default(), RbmMode::Binary).unwrap();
        assert_eq!(rbm.hidden_prob(&[0.3, 1.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(rbm.visible_prob(&[1.0, 0.0]).unwrap(), vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn logistic_of_log_three() {
        let rbm = one_by_one(3f64.ln(), 0.0, 0.0, ActivationParams::default(), RbmMode::Binary);
        assert!((rbm.hidden_prob(&[1.0]).unwrap()[0] - 0.75).abs() < 1e-15);
        let rbm = one_by_one(-(3f64.ln()), 0.0, 0.0, ActivationParams::default(), RbmMode::Binary);
        assert!((rbm.visible_prob(&[1.0]).unwrap()[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn visible_prob_is_hidden_prob_of_mirror() {
        let rbm = random_rbm(4, 3, 1.0, RbmMode::Binary, 11);
        let h = [0.2, 0.9, 0.4];
        assert_eq!(rbm.visible_prob(&h).unwrap(), rbm.mirrored().hidden_prob(&h).unwrap());
    }

    #[test]
    fn dimension_errors() {
        let rbm = random_rbm(4, 3, 1.0, RbmMode::Binary, 1);
        assert!(matches!(rbm.hidden_prob(&[1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(rbm.visible_prob(&[1.0; 4]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn activation_examples() {
        let plain = ActivationParams::new(0.0, 1.0, 0.0, 1.0).unwrap();
        let rbm = ContinuousRbm::zeros(2, 3, plain, RbmMode::Continuous).unwrap();
        assert_eq!(rbm.hidden_activation(&[0.4, 0.7], None).unwrap(), vec![0.5; 3]);
        assert_eq!(rbm.visible_activation(&[0.4, 0.7, 0.1], None).unwrap(), vec![0.5; 2]);

        let sym = ActivationParams::new(-1.0, 1.0, 0.0, 1.0).unwrap();
        let rbm = ContinuousRbm::zeros(2, 3, sym, RbmMode::Continuous).unwrap();
        assert_eq!(rbm.hidden_activation(&[0.4, 0.7], None).unwrap(), vec![0.0; 3]);
        assert_eq!(rbm.visible_activation(&[0.4, 0.7, 0.1], None).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn stubbed_noise_enters_pre_activation() {
        let act = ActivationParams::new(0.0, 1.0, 0.5, 1.0).unwrap();
        let rbm = one_by_one(0.8, -0.1, 0.3, act, RbmMode::Continuous);
        let z = 1.3;
        // oracle: phi(b + w v + sigma z) evaluated directly
        let expected_h = 1.0 / (1.0 + (-(0.3f64 + 0.8 * 0.6 + 0.5 * z)).exp());
        let mut stub = ScriptedNoise::new(&[z], &[]);
        let h = rbm.hidden_activation(&[0.6], Some(&mut stub)).unwrap();
        assert!((h[0] - expected_h).abs() < 1e-15);

        let expected_v = 1.0 / (1.0 + (-(-0.1 + 0.8 * 0.6 + 0.5 * z)).exp());
        let mut stub = ScriptedNoise::new(&[z], &[]);
        let v = rbm.visible_activation(&[0.6], Some(&mut stub)).unwrap();
        assert!((v[0] - expected_v).abs() < 1e-15);

        let quiet = one_by_one(0.8, -0.1, 0.3, act.without_noise(), RbmMode::Continuous);
        let mut stub = ScriptedNoise::new(&[z], &[]);
        let h0 = quiet.hidden_activation(&[0.6], Some(&mut stub)).unwrap();
        assert!((h0[0] - 1.0 / (1.0 + (-(0.3 + 0.48f64)).exp())).abs() < 1e-15);
    }

    #[test]
    fn continuous_with_logistic_params_matches_binary_prob() {
        let rbm = random_rbm(5, 4, 1.0, RbmMode::Continuous, 3);
        let mut plain = rbm.clone();
        plain.activation = ActivationParams::logistic();
        let v = [0.1, 0.5, 0.9, 0.0, 1.0];
        let a = plain.hidden_activation(&v, None).unwrap();
        let b = plain.clone().with_mode(RbmMode::Binary).hidden_prob(&v).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cd1_zero_update_when_chain_returns_to_data() {
        let rbm = ContinuousRbm::zeros(1, 1, ActivationParams::default(), RbmMode::Binary).unwrap();
        let batch = RowMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        // h0 = 1, v1 = 1 = v0, h1 = 1 = h0
        let mut stub = ScriptedNoise::new(&[], &[0.1, 0.1, 0.1]);
        let (next, _) = rbm.cd1_update(&batch, 0.1, &mut stub).unwrap();
        assert_eq!(next, rbm);
    }

    #[test]
    fn cd1_hand_executed_step() {
        let rbm = ContinuousRbm::zeros(1, 1, ActivationParams::default(), RbmMode::Binary).unwrap();
        let batch = RowMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        // all probabilities are 0.5: draws 0.1 -> 1, 0.9 -> 0
        // v0 = 1, h0 = 1, v1 = 0, h1 = 1
        let mut stub = ScriptedNoise::new(&[], &[0.1, 0.9, 0.1]);
        let (next, stats) = rbm.cd1_update(&batch, 0.1, &mut stub).unwrap();
        assert!((next.weights().get(0, 0) - 0.1).abs() < 1e-15);
        assert!((next.visible_bias()[0] - 0.1).abs() < 1e-15);
        assert_eq!(next.hidden_bias()[0], 0.0);
        assert!((stats.reconstruction_error - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cd1_rejects_bad_batches() {
        let rbm = ContinuousRbm::zeros(2, 2, ActivationParams::default(), RbmMode::Binary).unwrap();
        let mut s = RngStream::new(0);
        let empty = RowMatrix::zeros(0, 2);
        assert!(matches!(rbm.cd1_update(&empty, 0.1, &mut s), Err(Error::InvalidInput(_))));
        let half = RowMatrix::from_rows(&[[0.5, 1.0]]).unwrap();
        assert!(matches!(rbm.cd1_update(&half, 0.1, &mut s), Err(Error::InvalidInput(_))));
        let cont = rbm.clone().with_mode(RbmMode::Continuous);
        assert!(cont.cd1_update(&half, 0.1, &mut s).is_ok());
        let out = RowMatrix::from_rows(&[[1.5, 0.0]]).unwrap();
        assert!(matches!(cont.cd1_update(&out, 0.1, &mut s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cd1_divergence_is_reported() {
        let rbm = random_rbm(2, 2, 1.0, RbmMode::Continuous, 5);
        let batch = RowMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let mut s = RngStream::new(0);
        let err = rbm.cd1_update(&batch, 1e308 * 10.0, &mut s).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
        // asymptotes at +-1e200 make v * h overflow
        let wide = ActivationParams::new(-1e200, 1e200, 0.2, 1.0).unwrap();
        let mut rbm = ContinuousRbm::new_random(2, 2, wide, RbmMode::Continuous, &mut s).unwrap();
        let before = rbm.clone();
        let huge = RowMatrix::from_rows(&[[1e200, -1e200]]).unwrap();
        let err = rbm.cd1_step(&huge, 1.0, &mut s).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
        assert_eq!(rbm, before);
    }

    #[test]
    fn cd1_lowers_reconstruction_error() {
        let mut s = RngStream::new(99);
        let batch = RowMatrix::from_fn(200, 4, |i, j| {
            let base = if i % 2 == 0 { 0.8 } else { 0.2 };
            (base + 0.1 * ((i * 7 + j * 3) % 5) as f64 / 5.0).clamp(0.0, 1.0)
        });
        let mut rbm =
            ContinuousRbm::new_random(4, 3, ActivationParams::default(), RbmMode::Continuous, &mut s).unwrap();
        let initial = rbm.reconstruction_error(&batch).unwrap();
        for _ in 0..20 {
            for start in (0..200).step_by(50) {
                rbm.cd1_step(&batch.slice_rows(start, start + 50), 1.0, &mut s).unwrap();
            }
        }
        let last = rbm.reconstruction_error(&batch).unwrap();
        assert!(last < initial, "{last} >= {initial}");
    }

    #[test]
    fn reconstruction_error_examples() {
        let rbm = ContinuousRbm::zeros(1, 1, ActivationParams::default(), RbmMode::Binary).unwrap();
        let batch = RowMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        assert_eq!(rbm.reconstruction_error(&batch).unwrap(), 0.25);
        assert_eq!(squared_distance(&[0.3, 0.7], &[0.3, 0.7]), 0.0);
        assert!(matches!(
            rbm.reconstruction_error(&RowMatrix::zeros(0, 1)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn exact_gradient_one_by_one() {
        let rbm = ContinuousRbm::zeros(1, 1, ActivationParams::default(), RbmMode::Binary).unwrap();
        let batch = RowMatrix::from_vec(1, 1, vec![1.0]).unwrap();
        let g = rbm.exact_loglik_gradient(&batch).unwrap();
        assert!((g.weights.get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn exact_gradient_vanishes_at_model_distribution() {
        // zero-parameter model is uniform over v; data = every visible state once
        let rbm = ContinuousRbm::zeros(2, 3, ActivationParams::default(), RbmMode::Binary).unwrap();
        let batch = RowMatrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]).unwrap();
        let g = rbm.exact_loglik_gradient(&batch).unwrap();
        assert!(g.flatten().iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn exact_gradient_size_limit() {
        let rbm = ContinuousRbm::zeros(7, 6, ActivationParams::default(), RbmMode::Binary).unwrap();
        let batch = RowMatrix::zeros(1, 7);
        assert!(matches!(rbm.exact_loglik_gradient(&batch), Err(Error::InvalidInput(_))));
        let cont = ContinuousRbm::zeros(2, 2, ActivationParams::default(), RbmMode::Continuous).unwrap();
        assert!(cont.exact_loglik_gradient(&RowMatrix::zeros(1, 2)).is_err());
    }

    proptest! {
        #[test]
        fn activations_stay_inside_asymptotes(
            seed in any::<u64>(),
            lo in -3.0f64..0.5,
            span in 0.1f64..4.0,
            v in prop::collection::vec(0.0f64..1.0, 3),
        ) {
            let act = ActivationParams::new(lo, lo + span, 0.3, 1.0).unwrap();
            let mut s = RngStream::new(seed);
            let w = RowMatrix::from_fn(3, 2, |_, _| s.gaussian());
            let rbm = ContinuousRbm::from_parts(w, vec![0.1; 3], vec![-0.2; 2], act, RbmMode::Continuous).unwrap();
            let h = rbm.hidden_activation(&v, Some(&mut s)).unwrap();
            prop_assert!(h.iter().all(|&x| x > lo && x < lo + span));
            let back = rbm.visible_activation(&h, Some(&mut s)).unwrap();
            prop_assert!(back.iter().all(|&x| x > lo && x < lo + span));
        }

        #[test]
        fn probabilities_inside_unit_interval(seed in any::<u64>(), v in prop::collection::vec(0.0f64..1.0, 4)) {
            let rbm = random_rbm(4, 3, 1.0, RbmMode::Binary, seed);
            prop_assert!(rbm.hidden_prob(&v).unwrap().iter().all(|&p| p > 0.0 && p < 1.0));
        }

        #[test]
        fn reconstruction_error_non_negative(seed in any::<u64>()) {
            let rbm = random_rbm(3, 2, 2.0, RbmMode::Continuous, seed);
            let mut s = RngStream::new(seed ^ 1);
            let batch = RowMatrix::from_fn(5, 3, |_, _| s.uniform());
            prop_assert!(rbm.reconstruction_error(&batch).unwrap() >= 0.0);
        }
    }
}
