use serde::Serialize;

use super::nonlinearity::NonlinearitySpec;
use super::simulate::Stepper;
use crate::error::{Error, Result};
use crate::noise::SpectralCovariance;
use crate::rng::{domain, StreamKey};

/// Allowed violation of `u_lo <= u_hi`.
pub const COMPARISON_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub replicas: usize,
    pub steps: usize,
    /// `max (u_lo - u_hi)` over every cell, step and replica.
    pub max_violation: f64,
    pub violating_cells: usize,
}

impl ComparisonReport {
    pub fn holds(&self) -> bool {
        self.violating_cells == 0
    }
}

/// Runs `u0 = lower` and `u0 = upper` on identical noise slices and checks the
/// cellwise ordering after every step.
pub fn coupled_comparison(
    noise: &SpectralCovariance,
    sigma: &NonlinearitySpec,
    (lower, upper): (f64, f64),
    steps: usize,
    dt: f64,
    seed: u64,
    replicas: std::ops::Range<u64>,
) -> Result<ComparisonReport> {
    if lower.is_nan() || upper.is_nan() || lower > upper {
        return Err(Error::InvalidParameter(format!("need lower <= upper, got {lower} > {upper}")));
    }
    let lattice = *noise.lattice();
    let stepper = Stepper::new(lattice, dt)?;
    let mut noise_work = noise.workspace();
    let mut heat_work = stepper.workspace();
    let mut slice = vec![0.0; lattice.cells()];
    let mut report = ComparisonReport {
        replicas: 0,
        steps,
        max_violation: f64::NEG_INFINITY,
        violating_cells: 0,
    };
    for replica in replicas {
        let key = StreamKey::new(seed, domain::DYNAMICS, replica);
        let mut lo = vec![lower; lattice.cells()];
        let mut hi = vec![upper; lattice.cells()];
        for n in 0..steps {
            let mut rng = key.at_step(n as u64);
            noise.sample_into(dt, &mut rng, &mut slice, &mut noise_work);
            let ok = stepper.advance(&mut lo, &slice, sigma, &mut heat_work)
                && stepper.advance(&mut hi, &slice, sigma, &mut heat_work);
            if !ok {
                return Err(Error::Instability { replica, step: n + 1 });
            }
            for (a, b) in lo.iter().zip(&hi) {
                let gap = a - b;
                report.max_violation = report.max_violation.max(gap);
                if gap > COMPARISON_SLACK {
                    report.violating_cells += 1;
                }
            }
        }
        report.replicas += 1;
    }
    Ok(report)
}
