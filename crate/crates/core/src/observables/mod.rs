//! Spatial averages and the constants of their Gaussian limit.

mod constants;
mod region;

pub use constants::{
    estimate_eta, k_beta, limit_covariance, predicted_variance, EtaCurve, KBetaMethod, LimitConstants,
};
pub use region::{region_average, Region, RegionKind, RegionMask};
