//! Fisher information and Cramér–Rao bounds for additive-noise models.
//!
//! The crate estimates Fisher information matrices, differential entropy,
//! entropy power, and additive-noise mutual information for a family of
//! colored, possibly non-Gaussian noise models; verifies numerically that
//! Gaussian noise minimizes the Fisher information (equivalently maximizes
//! the CRLB) at fixed covariance; and applies that min-max principle to
//! training-sequence design for frequency-selective channel estimation
//! with a frequency offset.
//!
//! Modules:
//! * [`noise`] — noise distributions with exact scores and samplers.
//! * [`info`] — FIM / entropy / mutual-information estimators.
//! * [`knn`] — Kozachenko–Leonenko nearest-neighbor entropy machinery.
//! * [`inequalities`] — numeric verification of the inequality chain.
//! * [`channel`] — the training model `y = X_ω S h + w` and its CRLB.
//! * [`design`] — training-sequence ranking under noise-knowledge levels.
//! * [`estimator`] — separable NLS estimator and MSE-vs-CRLB harness.
//! * [`config`] / [`harness`] — the config-driven CLI front end.
//!
//! Everything stochastic is keyed by `(seed, domain, index)` substreams
//! (see [`rng`]), so results are bit-reproducible for any worker count.

pub mod channel;
pub mod config;
pub mod design;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod inequalities;
pub mod info;
pub mod knn;
pub mod linalg;
pub mod noise;
pub mod rng;

pub use error::{Error, Result};
pub use noise::{BaseFamily, NoiseModel, SampleBatch};
