//! Adversarial-robustness evaluation engine.
//!
//! Self-contained: hand-written forward/backward passes for a fixed layer
//! set, two small classifier families, a deterministic synthetic shape
//! dataset with parametric corruptions, a gradient-based attack suite,
//! robustness-curve and corruption-error metrics, normal and adversarial
//! training with the usual trick set, frequency-bias analysis, and
//! cross-model transfer matrices.
//!
//! Everything is seeded and bit-reproducible; per-sample work draws from
//! RNG streams keyed by (seed, sample index) so thread count never changes
//! results.

pub mod attack;
pub mod corruption;
pub mod curve;
pub mod data;
pub mod digest;
pub mod error;
pub mod fileio;
pub mod freq;
pub mod layers;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod transfer;

pub use error::{AresError, Result};
pub use tensor::Tensor;
