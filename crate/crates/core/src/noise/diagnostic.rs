use serde::Serialize;

use super::embedding::SpectralCovariance;
use super::field::SpatialField;
use crate::error::{Error, Result};

pub const MIN_SLICES: usize = 100;
pub const RATIO_BAND: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagCovariance {
    pub lag: Vec<isize>,
    pub distance: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub theoretical: f64,
    pub ratio: f64,
    /// Ratio outside [`RATIO_BAND`].
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceReport {
    pub dt: f64,
    pub slices: usize,
    pub entries: Vec<LagCovariance>,
}

impl CovarianceReport {
    pub fn all_within_band(&self) -> bool {
        self.entries.iter().all(|e| !e.flagged)
    }
}

/// Compares empirical lag covariances of sampled slices with `dt * kernel`.
///
/// Each slice contributes the spatial average of `X_i X_{i+lag}`; slices are the
/// independent unit for the standard error.
pub fn covariance_diagnostic(
    slices: &[SpatialField],
    lags: &[Vec<isize>],
    cov: &SpectralCovariance,
    dt: f64,
) -> Result<CovarianceReport> {
    if lags.is_empty() {
        return Err(Error::InvalidParameter("lag list is empty".into()));
    }
    if slices.len() < MIN_SLICES {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SLICES} slices, got {}",
            slices.len()
        )));
    }
    let lattice = *cov.lattice();
    for lag in lags {
        if lag.len() != lattice.d() {
            return Err(Error::InvalidParameter(format!("lag {lag:?} has wrong dimension")));
        }
    }
    let cells = lattice.cells();
    let mut scratch = vec![0usize; lattice.d()];
    let partners: Vec<Vec<usize>> = lags
        .iter()
        .map(|lag| (0..cells).map(|i| lattice.shifted(i, lag, &mut scratch)).collect())
        .collect();

    let entries = lags
        .iter()
        .zip(&partners)
        .map(|(lag, partner)| {
            let per_slice: Vec<f64> = slices
                .iter()
                .map(|s| {
                    let v = s.values();
                    v.iter().zip(partner).map(|(a, &j)| a * v[j]).sum::<f64>() / cells as f64
                })
                .collect();
            let m = per_slice.len() as f64;
            let mean = per_slice.iter().sum::<f64>() / m;
            let var = per_slice.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let distance = lattice.offset_length(lag);
            let kernel = if distance == 0.0 {
                cov.self_energy().value
            } else {
                distance.powf(-cov.spec().beta())
            };
            let theoretical = dt * kernel;
            let ratio = mean / theoretical;
            LagCovariance {
                lag: lag.clone(),
                distance,
                empirical: mean,
                stderr: (var / m).sqrt(),
                theoretical,
                ratio,
                flagged: !(RATIO_BAND.0..=RATIO_BAND.1).contains(&ratio),
            }
        })
        .collect();
    Ok(CovarianceReport {
        dt,
        slices: slices.len(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{build_embedding, Lattice, RieszSpec};
    use crate::rng::{domain, StreamKey};

    fn draw(cov: &SpectralCovariance, dt: f64, count: usize, seed: u64) -> Vec<SpatialField> {
        (0..count)
            .map(|k| {
                let mut rng = StreamKey::new(seed, domain::NOISE_CHECK, k as u64).at_step(0);
                cov.sample_slice(dt, &mut rng)
            })
            .collect()
    }

    #[test]
    fn errors_on_empty_lags_and_few_slices() {
        let cov = build_embedding(Lattice::new(1, 64, 8.0).unwrap(), RieszSpec::new(1, 0.5).unwrap()).unwrap();
        let slices = draw(&cov, 0.01, 100, 1);
        assert!(covariance_diagnostic(&slices, &[], &cov, 0.01).is_err());
        assert!(covariance_diagnostic(&slices[..50], &[vec![0]], &cov, 0.01).is_err());
    }

    #[test]
    fn ratios_within_band_and_deterministic() {
        let cov = build_embedding(Lattice::new(1, 128, 16.0).unwrap(), RieszSpec::new(1, 0.5).unwrap()).unwrap();
        let dt = 0.01;
        let lags: Vec<Vec<isize>> = [0, 1, 4, 8, 16, 32].iter().map(|&k| vec![k]).collect();
        let slices = draw(&cov, dt, 10_000, 5);
        let report = covariance_diagnostic(&slices, &lags, &cov, dt).unwrap();
        assert!(report.all_within_band(), "{report:#?}");
        assert!((report.entries[0].ratio - 1.0).abs() < 0.05);
        let again = covariance_diagnostic(&draw(&cov, dt, 10_000, 5), &lags, &cov, dt).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn covariance_scales_linearly_in_dt() {
        let cov = build_embedding(Lattice::new(1, 128, 16.0).unwrap(), RieszSpec::new(1, 0.5).unwrap()).unwrap();
        let lags = vec![vec![0], vec![2]];
        let a = covariance_diagnostic(&draw(&cov, 0.01, 4000, 9), &lags, &cov, 0.01).unwrap();
        let b = covariance_diagnostic(&draw(&cov, 0.02, 4000, 10), &lags, &cov, 0.02).unwrap();
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((y.empirical / x.empirical / 2.0 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn isotropic_in_two_dimensions() {
        let cov = build_embedding(Lattice::new(2, 32, 8.0).unwrap(), RieszSpec::new(2, 1.0).unwrap()).unwrap();
        let dt = 0.01;
        // (3,4) and (5,0) share Euclidean length 5 cells.
        let lags = vec![vec![3, 4], vec![5, 0], vec![0, 5]];
        let report = covariance_diagnostic(&draw(&cov, dt, 2000, 3), &lags, &cov, dt).unwrap();
        let e = &report.entries;
        assert_eq!(e[0].distance, e[1].distance);
        for other in &e[1..] {
            let se = (e[0].stderr.powi(2) + other.stderr.powi(2)).sqrt();
            assert!((e[0].empirical - other.empirical).abs() < 4.0 * se, "{e:#?}");
        }
    }
}
