//! Regularized deep belief networks for crash-frequency regression.
//!
//! A stack of continuous restricted Boltzmann machines is pretrained greedily
//! with one-step contrastive divergence, unfolded into a feedforward regressor
//! and fine-tuned under `alpha * P + beta * E_W`. Negative binomial, kernel
//! regression and Bayesian neural network baselines share the same
//! bootstrap protocol.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod dbn;
pub mod error;
pub mod eval;
pub mod finetune;
pub mod numerics;
pub mod par;
pub mod pipeline;
pub mod rbm;
pub mod serialize;

pub use error::{Error, Result};
