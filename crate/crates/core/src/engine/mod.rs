//! Exponential-Euler integration of the mild stochastic heat equation on the
//! periodic lattice.

mod comparison;
mod initial;
mod nonlinearity;
mod semigroup;
mod simulate;
mod snapshot;

pub use comparison::{coupled_comparison, ComparisonReport, COMPARISON_SLACK};
pub use initial::InitialCondition;
pub use nonlinearity::{Nonlinearity, NonlinearitySpec};
pub use semigroup::{heat_semigroup, mean_field, HeatSemigroup};
pub use simulate::{collar_width, grid_index, step, FieldState, SimulationPlan, Simulator, Stepper, Trajectory};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};
