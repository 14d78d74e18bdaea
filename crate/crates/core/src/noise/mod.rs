//! Spatially correlated Gaussian noise with Riesz covariance `|x-y|^{-beta}`
//! on a periodic lattice.

mod diagnostic;
mod embedding;
mod field;
mod kernel;
mod lattice;
mod quadrature;

pub use diagnostic::{covariance_diagnostic, CovarianceReport, LagCovariance};
pub use embedding::{build_embedding, NoiseWorkspace, SpectralCovariance};
pub use field::SpatialField;
pub use kernel::{cell_self_energy, riesz_kernel_eval, RieszSpec};
pub use lattice::Lattice;
pub use quadrature::{ball_volume, riesz_pair_integral, sphere_area, Estimate, PairDomain};
