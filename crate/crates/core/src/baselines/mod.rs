//! Comparison models: negative binomial regression, Nadaraya–Watson kernel
//! regression and a randomly initialized Bayesian neural network.

pub mod kernel;
pub mod nb;

pub use kernel::{fit_kr, predict_kr, BandwidthRule, KernelModel, KrPrediction};
pub use nb::{fit_nb, fit_nb_traced, nb_log_likelihood, predict_nb, NbModel};

use crate::error::{check_len, Error, Result};
use crate::finetune::{self, hidden_init_stream, output_init_stream, FeedforwardNet, FineTuneConfig, TrainerState};
use crate::numerics::RowMatrix;
use crate::rbm::ActivationParams;

/// Net with the given structure (`[input, hidden..., 1]`) and no pretraining.
/// Hidden weights are Gaussian with std `1/sqrt(fan_in)`; the output unit is
/// drawn exactly as in [`crate::dbn::DbnModel::unfold`] with the same seed.
pub fn random_net(structure: &[usize], activation: ActivationParams, seed: u64) -> Result<FeedforwardNet> {
    let sizes = hidden_sizes(structure)?;
    FeedforwardNet::random(
        sizes,
        activation,
        |fan_in| 1.0 / (fan_in as f64).sqrt(),
        &mut hidden_init_stream(seed),
        &mut output_init_stream(seed),
    )
}

/// `[input, h1, ..., hk, 1]` -> `[input, h1, ..., hk]`.
pub fn hidden_sizes(structure: &[usize]) -> Result<&[usize]> {
    match structure {
        [rest @ .., 1] if !rest.is_empty() && rest.iter().all(|s| *s > 0) => Ok(rest),
        _ => Err(Error::invalid(format!(
            "structure must be input-hidden...-1 with positive sizes, got {structure:?}"
        ))),
    }
}

/// Randomly initialized net trained by the same fine-tuning code as the DBN.
pub fn train_bayesian_nn(
    features: &RowMatrix,
    targets: &[f64],
    structure: &[usize],
    activation: ActivationParams,
    config: &FineTuneConfig,
) -> Result<(FeedforwardNet, Vec<TrainerState>)> {
    check_len("structure input width", structure.first().copied().unwrap_or(0), features.ncols())?;
    let net = random_net(structure, activation, config.seed)?;
    finetune::train(&net, features, targets, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbn::DbnModel;
    use crate::numerics::{finite_diff_gradient, RngStream};
    use crate::rbm::RbmMode;

    fn data(seed: u64) -> (RowMatrix, Vec<f64>) {
        let mut s = RngStream::new(seed);
        let x = RowMatrix::from_fn(30, 4, |_, _| s.uniform());
        let y = (0..30).map(|i| 0.5 * x.get(i, 0) + 0.2 * x.get(i, 3)).collect();
        (x, y)
    }

    #[test]
    fn differs_from_unfolded_dbn_only_in_hidden_weights() {
        let seed = 17;
        let dbn = DbnModel::new(&[4, 5, 3], ActivationParams::default(), RbmMode::Continuous, &mut RngStream::new(1))
            .unwrap();
        let unfolded = dbn.unfold(&mut output_init_stream(seed));
        let bnn = random_net(&[4, 5, 3, 1], ActivationParams::default(), seed).unwrap();
        assert_eq!(unfolded.output_weights(), bnn.output_weights());
        assert_eq!(unfolded.output_bias(), bnn.output_bias());
        assert_eq!(unfolded.layer_sizes(), bnn.layer_sizes());
        assert_ne!(unfolded.hidden_layers()[0].weights, bnn.hidden_layers()[0].weights);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (x, y) = data(2);
        let config = FineTuneConfig {
            epochs: 20,
            seed: 5,
            ..FineTuneConfig::default()
        };
        let a = train_bayesian_nn(&x, &y, &[4, 6, 1], ActivationParams::default(), &config).unwrap();
        let b = train_bayesian_nn(&x, &y, &[4, 6, 1], ActivationParams::default(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shared_trainer_gradient_check() {
        let (x, y) = data(3);
        let net = random_net(&[4, 6, 5, 1], ActivationParams::default(), 9).unwrap();
        let g = finetune::gradient(&net, &x, &y, 1.0, 0.01).unwrap();
        let fd = finite_diff_gradient(
            |p| {
                let mut n = net.clone();
                n.set_params(p).unwrap();
                finetune::objective(&n, &x, &y, 1.0, 0.01).unwrap().f_w
            },
            &net.params(),
            1e-6,
        );
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = g.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err / scale < 1e-5);
    }

    #[test]
    fn structure_validation() {
        assert!(hidden_sizes(&[6, 10, 10, 1]).is_ok());
        assert!(hidden_sizes(&[6, 10, 10, 2]).is_err());
        assert!(hidden_sizes(&[1]).is_err());
        let (x, y) = data(4);
        let config = FineTuneConfig::default();
        assert!(train_bayesian_nn(&x, &y, &[5, 3, 1], ActivationParams::default(), &config).is_err());
    }
}
