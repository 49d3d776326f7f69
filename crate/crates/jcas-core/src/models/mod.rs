//! Model zoo for Doppler-frame activity recognition. Three families share
//! one convolutional backbone (inverted-bottleneck stages with
//! squeeze-excitation, channel count doubling per stage) and a ReLU MLP
//! classifier:
//!
//! * standard: backbone and classifier only;
//! * domain independent: adds a gating module on the raw input and another
//!   on the backbone output;
//! * domain adaptation: adds a decoder that mirrors the stem and is trained
//!   to reconstruct both the labeled source flow and an unlabeled target
//!   flow.
//!
//! [`SearchSpace`] holds the tuning intervals, [`ModelConfig`] one concrete
//! draw, [`Model`] the built network. [`train_step_standard`] and
//! [`train_step_adaptation`] perform single optimizer updates.

mod build;
mod config;
mod input;
mod train;

pub use build::{build_backbone, build_classifier, build_decoder, Backbone, Model};
pub use config::{ModelConfig, ModelFamily, SearchSpace};
pub use input::{frames_to_batch, labels_to_onehot};
pub use train::{train_step_adaptation, train_step_standard};
