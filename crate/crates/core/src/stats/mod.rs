//! Statistical checks on replica samples of spatial averages.

mod decay;
mod functional;
mod ks;
mod lemma31;
mod moments;
mod regression;
mod report;
mod samples;
mod tightness;

pub use decay::{correlation_decay_check, default_decay_lags, DecayEntry, DecayReport, DECAY_RATIO_LIMIT};
pub use functional::{functional_cov_check, FunctionalCovReport};
pub use ks::{ks_distance, ks_floor, KS_FLOOR_01PCT, KS_FLOOR_1PCT};
pub use lemma31::{log_grid, riesz_gaussian_moment, lemma31_check, Lemma31Report};
pub use moments::{mean, mean_and_stderr, sample_variance};
pub use regression::{linear_fit, rate_fit, scaling_fit, LinearFit, RateFit};
pub use report::{Rule, StatsReport};
pub use samples::{standardize, variance_limit_check, SampleSet, Standardization, VarianceLimitReport};
pub use tightness::{increment_moment_fit, moment_ratio_check, IncrementFit};
