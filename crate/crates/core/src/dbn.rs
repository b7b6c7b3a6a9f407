//! Deep belief network: a stack of RBMs trained greedily, bottom layer first,
//! then unfolded into a feedforward regressor with one linear output unit.

use crate::error::{check_len, Error, Result};
use crate::finetune::{DenseLayer, FeedforwardNet};
use crate::numerics::{RngStream, RowMatrix};
use crate::rbm::{ActivationParams, ChainSampling, ContinuousRbm, RbmMode, INIT_WEIGHT_STD};

/// Default mini-batch size for pretraining.
pub const DEFAULT_BATCH_SIZE: usize = 100;

/// Unsupervised pretraining settings. One epoch is one full pass over the
/// training rows in mini-batches of `batch_size`, in row order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("pretraining needs at least one epoch".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 10.0) {
            return Err(Error::Config(format!(
                "pretraining learning rate must lie in (0, 10], got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

/// Reconstruction error of one layer before training and after each epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerHistory {
    pub initial: f64,
    pub per_epoch: Vec<f64>,
}

impl LayerHistory {
    pub fn last(&self) -> f64 {
        *self.per_epoch.last().unwrap_or(&self.initial)
    }
}

/// Ordered stack of RBMs; layer `k`'s hidden units feed layer `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DbnModel {
    layers: Vec<ContinuousRbm>,
}

impl DbnModel {
    /// Freshly initialized stack for `layer_sizes = [input, hidden1, hidden2, ...]`.
    pub fn new(
        layer_sizes: &[usize],
        activation: ActivationParams,
        mode: RbmMode,
        stream: &mut RngStream,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::invalid("a DBN needs an input size and at least one hidden size"));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| ContinuousRbm::new_random(w[0], w[1], activation, mode, stream))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<ContinuousRbm>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::invalid("a DBN needs at least one RBM"))?;
        for pair in layers.windows(2) {
            check_len("DBN layer chaining", pair[0].n_hidden(), pair[1].n_visible())?;
        }
        let (act, mode) = (first.activation(), first.mode());
        if layers.iter().any(|l| l.activation() != act || l.mode() != mode) {
            return Err(Error::invalid("all DBN layers must share activation parameters and mode"));
        }
        Ok(DbnModel { layers })
    }

    pub fn with_chain_sampling(self, chain: ChainSampling) -> Self {
        DbnModel {
            layers: self.layers.into_iter().map(|l| l.with_chain_sampling(chain)).collect(),
        }
    }

    pub fn layers(&self) -> &[ContinuousRbm] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].n_visible()];
        sizes.extend(self.layers.iter().map(|l| l.n_hidden()));
        sizes
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].n_visible()
    }

    pub fn activation(&self) -> ActivationParams {
        self.layers[0].activation()
    }

    pub fn mode(&self) -> RbmMode {
        self.layers[0].mode()
    }

    /// Deterministic pass through every layer.
    pub fn propagate_up(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.propagate_through(self.layers.len(), v)
    }

    /// Deterministic pass through the first `depth` layers.
    pub fn propagate_through(&self, depth: usize, v: &[f64]) -> Result<Vec<f64>> {
        check_len("DBN input", self.input_width(), v.len())?;
        let mut x = v.to_vec();
        for layer in &self.layers[..depth] {
            x = layer.mean_hidden(&x)?;
        }
        Ok(x)
    }

    /// Outputs of the first `depth` layers for every row.
    pub fn propagate_batch(&self, depth: usize, data: &RowMatrix) -> Result<RowMatrix> {
        if depth == 0 {
            return Ok(data.clone());
        }
        let width = self.layers[depth - 1].n_hidden();
        let mut out = RowMatrix::zeros(data.nrows(), width);
        for (i, row) in data.rows_iter().enumerate() {
            out.row_mut(i).copy_from_slice(&self.propagate_through(depth, row)?);
        }
        Ok(out)
    }

    /// Greedy layer-wise CD-1 pretraining.
    ///
    /// Layer 1 sees the raw features; layer `k` sees the deterministic output of
    /// the already-trained layers below it. Layer `k` draws its noise from
    /// `RngStream::new(config.seed).child(&[k])`.
    pub fn pretrain(&self, features: &RowMatrix, config: &PretrainConfig) -> Result<(DbnModel, Vec<LayerHistory>)> {
        config.validate()?;
        check_len("pretraining feature width", self.input_width(), features.ncols())?;
        if features.nrows() == 0 {
            return Err(Error::invalid("pretraining needs at least one row"));
        }
        if let Some(x) = features.as_slice().iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::invalid(format!("pretraining features must lie in [0, 1], found {x}")));
        }

        let root = RngStream::new(config.seed);
        let mut trained = self.clone();
        let mut histories = Vec::with_capacity(self.layers.len());
        for k in 0..trained.layers.len() {
            let data = trained.propagate_batch(k, features)?;
            let mut stream = root.child(&[k as u64]);
            let layer = &mut trained.layers[k];
            let initial = layer.reconstruction_error(&data)?;
            let mut per_epoch = Vec::with_capacity(config.epochs);
            for epoch in 0..config.epochs {
                let mut start = 0;
                while start < data.nrows() {
                    let end = (start + config.batch_size).min(data.nrows());
                    layer
                        .cd1_step(&data.slice_rows(start, end), config.learning_rate, &mut stream)
                        .map_err(|e| e.at_epoch(epoch + 1))?;
                    start = end;
                }
                per_epoch.push(layer.reconstruction_error(&data)?);
            }
            histories.push(LayerHistory { initial, per_epoch });
        }
        Ok((trained, histories))
    }

    /// Feedforward net whose hidden layers copy this stack exactly, topped by
    /// a single linear output unit with Gaussian (std 0.01) weights and zero bias.
    pub fn unfold(&self, stream: &mut RngStream) -> FeedforwardNet {
        let hidden = self
            .layers
            .iter()
            .map(|l| DenseLayer {
                weights: l.weights().clone(),
                bias: l.hidden_bias().to_vec(),
            })
            .collect::<Vec<_>>();
        let top = self.layers.last().map_or(0, |l| l.n_hidden());
        let output_weights = (0..top).map(|_| INIT_WEIGHT_STD * stream.gaussian()).collect();
        let activation = match self.mode() {
            RbmMode::Binary => ActivationParams::logistic(),
            RbmMode::Continuous => self.activation().without_noise(),
        };
        FeedforwardNet::from_parts(hidden, output_weights, 0.0, activation)
            .expect("DBN layers always unfold into a consistent net")
    }
}
