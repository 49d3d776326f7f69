//! Core library for a millimeter-wave sensing pipeline that reuses a
//! communication link's beam-formed channel estimates as a radar-like input.
//!
//! The crate is organized as a pipeline:
//!
//! * [`csi`] simulates multi-antenna channel snapshots for a person moving in
//!   a room between a transmit and a receive array.
//! * [`preprocess`] turns channel snapshots into Doppler spectrograms and
//!   assembles labeled datasets.
//! * [`nn`] is a small self-contained neural network engine (explicit forward
//!   and backward passes, no autograd) built for full numerical control.
//! * [`models`] assembles the three recognition network families from a
//!   shared architecture vocabulary.
//! * [`experiments`] holds dataset splits, training loops, metrics and the
//!   hypothesis drivers behind the cross-beam generalization study.
//! * [`tuning`] implements successive-halving hyperparameter search.
//! * [`viz`] renders spectrogram grids to portable pixmaps.

pub mod csi;
pub mod experiments;
pub mod models;
pub mod nn;
pub mod preprocess;
pub mod tuning;
pub mod viz;
