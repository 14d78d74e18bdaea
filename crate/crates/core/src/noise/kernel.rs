use serde::{Deserialize, Serialize};

use super::quadrature::{riesz_pair_integral, Estimate, PairDomain};
use crate::error::{Error, Result};

/// Samples used for Monte Carlo self-energies (d >= 2).
pub const SELF_ENERGY_SAMPLES: usize = 1 << 20;
const SELF_ENERGY_SEED: u64 = 0x5e1f_e4e6;

/// Dimension and exponent of the Riesz covariance. Requires `0 < beta < min(d, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszSpec {
    d: usize,
    beta: f64,
}

impl RieszSpec {
    pub fn new(d: usize, beta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        let cap = (d as f64).min(2.0);
        if !(beta > 0.0 && beta < cap) {
            return Err(Error::InvalidParameter(format!(
                "beta must be < min(d,2)={cap} and > 0, got beta={beta}"
            )));
        }
        Ok(Self { d, beta })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `2d - beta`, the growth exponent of the limit variance in R.
    pub fn variance_exponent(&self) -> f64 {
        2.0 * self.d as f64 - self.beta
    }
}

pub fn riesz_kernel_eval(x: &[f64], spec: &RieszSpec) -> Result<f64> {
    if x.len() != spec.d {
        return Err(Error::InvalidParameter(format!(
            "point has dimension {}, expected {}",
            x.len(),
            spec.d
        )));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::SingularPoint);
    }
    Ok(norm.powf(-spec.beta))
}

/// Cell-averaged self interaction `h^{-2d} \int\int_{cell^2} |x-y|^{-beta}`.
///
/// Exact in `d = 1`; Monte Carlo (chord estimator, fixed seed) otherwise, so the
/// result is reproducible. Scales as `h^{-beta}`.
pub fn cell_self_energy(h: f64, spec: &RieszSpec) -> Result<Estimate> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("cell size must be positive, got {h}")));
    }
    let (d, beta) = (spec.d, spec.beta);
    if beta >= d as f64 {
        return Err(Error::Divergent { d, beta });
    }
    let unit = if d == 1 {
        Estimate::exact(2.0 / ((1.0 - beta) * (2.0 - beta)))
    } else {
        riesz_pair_integral(PairDomain::UnitCube, spec, SELF_ENERGY_SAMPLES, SELF_ENERGY_SEED)
    };
    Ok(unit.scaled(h.powf(-beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_beta_outside_range() {
        assert!(RieszSpec::new(1, 1.0).is_err());
        assert!(RieszSpec::new(1, 0.0).is_err());
        assert!(RieszSpec::new(3, 2.0).is_err());
        assert!(RieszSpec::new(3, 1.9).is_ok());
        let msg = RieszSpec::new(1, 1.5).unwrap_err().to_string();
        assert!(msg.contains("beta must be < min(d,2)=1"), "{msg}");
    }

    #[test]
    fn kernel_values() {
        let s1 = RieszSpec::new(1, 0.5).unwrap();
        assert_eq!(riesz_kernel_eval(&[1.0], &s1).unwrap(), 1.0);
        assert_relative_eq!(riesz_kernel_eval(&[2.0], &s1).unwrap(), std::f64::consts::FRAC_1_SQRT_2);
        assert_relative_eq!(riesz_kernel_eval(&[-2.0], &s1).unwrap(), std::f64::consts::FRAC_1_SQRT_2);
        let s2 = RieszSpec::new(2, 1.0).unwrap();
        assert_relative_eq!(riesz_kernel_eval(&[3.0, 4.0], &s2).unwrap(), 0.2);
        assert!(matches!(riesz_kernel_eval(&[0.0], &s1), Err(Error::SingularPoint)));
        assert!(riesz_kernel_eval(&[1.0, 0.0], &s1).is_err());
    }

    #[test]
    fn self_energy_closed_form_in_one_dimension() {
        let s = RieszSpec::new(1, 0.5).unwrap();
        let e = cell_self_energy(1.0, &s).unwrap();
        assert_relative_eq!(e.value, 2.0 / 0.75, max_relative = 1e-14);
        assert_eq!(e.stderr, 0.0);
        let e = cell_self_energy(0.25, &s).unwrap();
        assert_relative_eq!(e.value, 2.0 / 0.75 * 2.0, max_relative = 1e-14);
    }

    // Brute-force point-pair Monte Carlo, independent of the chord estimator.
    fn brute_pairs_unit_square(beta: f64, pairs: usize) -> (f64, f64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..pairs {
            let dx: f64 = rng.random::<f64>() - rng.random::<f64>();
            let dy: f64 = rng.random::<f64>() - rng.random::<f64>();
            let v = (dx * dx + dy * dy).sqrt().powf(-beta);
            s += v;
            s2 += v * v;
        }
        let m = s / pairs as f64;
        (m, ((s2 / pairs as f64 - m * m) / pairs as f64).sqrt())
    }

    #[test]
    fn self_energy_two_dimensions_matches_frozen_reference() {
        // Frozen from 2^22 brute-force point pairs (see brute_pairs_unit_square)
        // and adaptive cubature of the difference density: 2.9732096.
        const REFERENCE: f64 = 2.973_209_598_247_4;
        let s = RieszSpec::new(2, 1.0).unwrap();
        let e = cell_self_energy(1.0, &s).unwrap();
        assert!(e.stderr > 0.0 && e.stderr < 2e-3, "stderr {}", e.stderr);
        assert!((e.value - REFERENCE).abs() < 4.0 * e.stderr, "{e:?}");
        let (bf, bf_se) = brute_pairs_unit_square(1.0, 1 << 20);
        assert!((bf - REFERENCE).abs() < 4.0 * bf_se + 1e-2, "brute force {bf} +- {bf_se}");
        let half = cell_self_energy(0.5, &s).unwrap();
        assert_relative_eq!(half.value, e.value * 2.0, max_relative = 1e-12);
    }

    #[test]
    fn self_energy_rejects_bad_input() {
        let s = RieszSpec::new(1, 0.5).unwrap();
        assert!(cell_self_energy(0.0, &s).is_err());
        assert!(cell_self_energy(-1.0, &s).is_err());
    }
}
