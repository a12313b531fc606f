//! Numerical core for labeled trip-signal synthesis and evaluation.
//!
//! The crate builds, from the ground up, everything needed to synthesize
//! five-channel inertial trip signals with a recurrent conditional GAN and to
//! score the synthetic data extrinsically with a semi-supervised classifier:
//!
//! * [`numerics`] — dense matrices, activations, optimizers, and a
//!   finite-difference gradient oracle,
//! * [`rnn`] — vanilla-RNN and peephole-LSTM cells with full
//!   backpropagation through time,
//! * [`rcgan`] — the conditional GAN (LSTM generator + discriminator),
//! * [`preprocess`] — downsampling, moving-average filtering, MinMax scaling,
//! * [`features`] — the 45-dimensional statistical feature vector,
//! * [`semisup`] — autoencoder pretraining, weight transfer, grid-searched
//!   fine-tuning, and AUROC scoring,
//! * [`simulator`] — a parametric stand-in for the raw trip recordings,
//! * [`harness`] — the train/validation combination grid, repeated runs, and
//!   report aggregation.
//!
//! Everything here is pure computation over owned data; file formats, the
//! CLI, and parallel run scheduling live in the companion `drivegen` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod error;
pub mod features;
pub mod fmath;
pub mod harness;
pub mod label;
pub mod numerics;
pub mod preprocess;
pub mod rcgan;
pub mod rng;
pub mod rnn;
pub mod semisup;
pub mod simulator;

pub use error::{Error, Result};
pub use label::DrivingClass;
