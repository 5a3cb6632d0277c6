//! Fully connected networks trained with plain mini-batch SGD.
//!
//! The same kernel backs the client classifiers (softmax output,
//! cross-entropy loss) and the server autoencoder (identity output,
//! squared-error loss).

mod matrix;
mod network;
mod train;

pub use matrix::Matrix;
pub use network::{forward, mse_loss, Activation, LayerSpec, Network};
pub use train::{
    evaluate, sgd_epoch, step_delta, train, Direction, Evaluation, Targets, TrainConfig,
};
