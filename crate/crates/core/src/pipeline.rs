//! End-to-end model fitting on a [`Dataset`]: scaling, training and
//! prediction in original target units for every supported model kind.
//!
//! Nets see features and targets min-max scaled on the training rows and
//! report denormalized predictions. NB sees scaled features and raw counts;
//! kernel regression sees scaled features and raw targets.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{self, fit_kr, fit_nb, predict_nb, BandwidthRule, KernelModel, NbModel};
use crate::data::Dataset;
use crate::dbn::{DbnModel, LayerHistory, PretrainConfig, DEFAULT_BATCH_SIZE};
use crate::error::{check_len, Error, Result};
use crate::eval::ModelBuilder;
use crate::finetune::{self, output_init_stream, FeedforwardNet, FineTuneConfig, TrainerState};
use crate::numerics::{RngStream, RowMatrix, Scaler};
use crate::rbm::{ActivationParams, RbmMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    RegDbn,
    BayesNn,
    Nb,
    Kr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Nb, ModelKind::Kr, ModelKind::BayesNn, ModelKind::RegDbn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::RegDbn => "regdbn",
            ModelKind::BayesNn => "bayesnn",
            ModelKind::Nb => "nb",
            ModelKind::Kr => "kr",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model '{s}' (expected regdbn, bayesnn, nb or kr)")))
    }
}

/// Everything needed to train any model kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    /// `[input, hidden..., 1]`.
    pub structure: Vec<usize>,
    pub activation: ActivationParams,
    pub mode: RbmMode,
    pub pretrain_epochs: usize,
    pub pretrain_learning_rate: f64,
    pub batch_size: usize,
    /// The seed is replaced by the per-fit seed.
    pub finetune: FineTuneConfig,
    pub bandwidth: BandwidthRule,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            structure: vec![6, 10, 10, 1],
            activation: ActivationParams::default(),
            mode: RbmMode::Continuous,
            pretrain_epochs: 20,
            pretrain_learning_rate: 1.0,
            batch_size: DEFAULT_BATCH_SIZE,
            finetune: FineTuneConfig::default(),
            bandwidth: BandwidthRule::Silverman,
        }
    }
}

/// A fitted model together with the scaling it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Net {
        kind: ModelKind,
        net: FeedforwardNet,
        x_scaler: Scaler,
        y_scaler: Scaler,
    },
    Nb {
        model: NbModel,
        x_scaler: Scaler,
    },
    Kr {
        model: KernelModel,
        x_scaler: Scaler,
    },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Net { kind, .. } => *kind,
            TrainedModel::Nb { .. } => ModelKind::Nb,
            TrainedModel::Kr { .. } => ModelKind::Kr,
        }
    }

    fn x_scaler(&self) -> &Scaler {
        match self {
            TrainedModel::Net { x_scaler, .. } | TrainedModel::Nb { x_scaler, .. } | TrainedModel::Kr { x_scaler, .. } => {
                x_scaler
            }
        }
    }

    /// Predictions in original target units.
    pub fn predict(&self, features: &RowMatrix) -> Result<Vec<f64>> {
        let x = self.x_scaler().apply(features)?;
        match self {
            TrainedModel::Net { net, y_scaler, .. } => {
                Ok(net.predict_batch(&x)?.into_iter().map(|p| y_scaler.invert_value(0, p)).collect())
            }
            TrainedModel::Nb { model, .. } => x.rows_iter().map(|r| predict_nb(model, r)).collect(),
            TrainedModel::Kr { model, .. } => x.rows_iter().map(|r| baselines::predict_kr(model, r)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub model: TrainedModel,
    pub pretrain_history: Vec<LayerHistory>,
    pub finetune_history: Vec<TrainerState>,
}

const DBN_INIT_LABEL: u64 = 0x6462_6e69;

/// Train `kind` from scratch on `train`.
pub fn fit_model(kind: ModelKind, settings: &ModelSettings, train: &Dataset, seed: u64) -> Result<FitOutcome> {
    let x_scaler = Scaler::fit(train.features())?;
    let x = x_scaler.apply(train.features())?;
    match kind {
        ModelKind::Nb => Ok(FitOutcome {
            model: TrainedModel::Nb {
                model: fit_nb(&x, train.targets())?,
                x_scaler,
            },
            pretrain_history: vec![],
            finetune_history: vec![],
        }),
        ModelKind::Kr => Ok(FitOutcome {
            model: TrainedModel::Kr {
                model: fit_kr(&x, train.targets(), settings.bandwidth)?,
                x_scaler,
            },
            pretrain_history: vec![],
            finetune_history: vec![],
        }),
        ModelKind::RegDbn | ModelKind::BayesNn => {
            let hidden = baselines::hidden_sizes(&settings.structure)?;
            check_len("structure input width", hidden[0], train.n_features())?;
            let y_scaler = Scaler::fit_column(train.targets())?;
            let y: Vec<f64> = train.targets().iter().map(|&v| y_scaler.apply_value(0, v)).collect();
            let config = FineTuneConfig {
                seed,
                ..settings.finetune
            };
            let (net, pretrain_history, finetune_history) = if kind == ModelKind::RegDbn {
                let dbn = DbnModel::new(
                    hidden,
                    settings.activation,
                    settings.mode,
                    &mut RngStream::new(seed).child(&[DBN_INIT_LABEL]),
                )?;
                let pretrain = PretrainConfig {
                    epochs: settings.pretrain_epochs,
                    learning_rate: settings.pretrain_learning_rate,
                    batch_size: settings.batch_size,
                    seed,
                };
                let (dbn, layers) = dbn.pretrain(&x, &pretrain)?;
                let unfolded = dbn.unfold(&mut output_init_stream(seed));
                let (net, history) = finetune::train(&unfolded, &x, &y, &config)?;
                (net, layers, history)
            } else {
                let activation = match settings.mode {
                    RbmMode::Binary => ActivationParams::logistic(),
                    RbmMode::Continuous => settings.activation.without_noise(),
                };
                let (net, history) = baselines::train_bayesian_nn(&x, &y, &settings.structure, activation, &config)?;
                (net, vec![], history)
            };
            Ok(FitOutcome {
                model: TrainedModel::Net {
                    kind,
                    net,
                    x_scaler,
                    y_scaler,
                },
                pretrain_history,
                finetune_history,
            })
        }
    }
}

/// A model kind bound to its settings, usable in the benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub kind: ModelKind,
    pub settings: ModelSettings,
}

impl ModelBuilder for Candidate {
    fn name(&self) -> String {
        self.kind.name().to_owned()
    }

    fn fit_predict(&self, train: &Dataset, test: &Dataset, seed: u64) -> Result<Vec<f64>> {
        fit_model(self.kind, &self.settings, train, seed)?.model.predict(test.features())
    }
}
