//! Monte Carlo laboratory for the stochastic heat equation
//! `du = (1/2) Laplace u dt + sigma(u) dW` driven by noise that is white in time
//! and Riesz-correlated in space, together with the statistics used to check
//! Gaussian fluctuations of its spatial averages.

pub mod engine;
pub mod error;
pub mod fft;
pub mod harness;
pub mod noise;
pub mod observables;
pub mod stats;
pub mod rng;

pub use error::{Error, Result};
