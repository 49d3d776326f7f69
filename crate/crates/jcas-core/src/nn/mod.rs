//! Minimal neural network engine with explicit forward and backward passes.
//!
//! Every layer computes its own analytic gradient; there is no autograd
//! graph. Parameters live in a [`ParamStore`] keyed by hierarchical names so
//! optimizer updates can be restricted to arbitrary sub-networks. The whole
//! engine is generic over the element type: `f32` for training, `f64` for
//! finite-difference gradient verification.

mod blocks;
mod checkpoint;
mod gradcheck;
mod init;
mod layers;
mod loss;
pub mod ops;
mod params;
mod tensor;

pub use blocks::{AttentionA, AttentionB, MbConv, SeBlock, Sequential};
pub use checkpoint::{load_checkpoint, load_checkpoint_into, save_checkpoint};
pub use gradcheck::{gradcheck, GradCheckReport, GradCheckSpec};
pub use init::Init;
pub use layers::{Activation, BatchNorm, Cache, Conv2d, Dense, DepthwiseConv2d, Layer, Mode};
pub use loss::{mse_loss, softmax_cross_entropy, LOG_CLAMP};
pub use params::{adam_step, AdamConfig, Grads, Param, ParamStore};
pub use tensor::{Scalar, Tensor4};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("residual shape mismatch: {0}")]
    ResidualShape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}
