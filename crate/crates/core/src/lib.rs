//! Calibrated crowd-belief time series from sparse expert probability
//! forecasts.
//!
//! The hidden aggregate logit probability of each question follows a
//! first-order autoregression, and every expertise group reports a
//! multiplicatively biased, noisy view of it. Estimation runs in two steps:
//! a Gibbs sampler fits the model with one group's bias pinned to 1
//! ([`gibbs`]), then a one-dimensional scale is chosen by maximizing a
//! proper scoring rule against resolved outcomes ([`calibrate`]).
//! Exponentially weighted baselines, a synthetic benchmark and a
//! cross-validation harness live alongside.

// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod calibrate;
pub mod dlm;
pub mod domain;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod io;
pub mod optim;
pub mod partition;
pub mod rng;
pub mod special;
pub mod synth;

pub use error::{Error, Result};
