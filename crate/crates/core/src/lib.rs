//! Discriminative correlation filter tracking with group feature selection.
//!
//! The crate is split along the processing chain:
//!
//! * [`tensor`] holds the `N x N x C` real/complex tensors and the per-channel 2D DFT.
//! * [`features`] turns image crops into feature tensors (intensity, gradient
//!   histograms, colour names) and reads/writes `FTEN` feature files.
//! * [`solver`] learns filters: the ridge closed form and the ADMM solver for the
//!   group-sparse, temporally smoothed objective.
//! * [`tracker`] runs the detect/learn loop over a frame sequence.
//! * [`eval`] loads sequences, generates synthetic ones and computes metrics and
//!   diagnostics.
//! * [`config`] parses the flat `key = value` configuration files used by the CLI.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod image;
pub mod solver;
pub mod tensor;
pub mod tracker;

pub use error::{Error, Result};
