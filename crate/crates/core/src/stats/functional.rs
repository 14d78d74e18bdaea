use serde::{Deserialize, Serialize};

use super::moments::{mean, sample_covariance};
use super::report::{Rule, StatsReport};
use super::samples::DEGENERATE_VARIANCE;
use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::observables::{limit_covariance, LimitConstants};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalCovReport {
    pub times: Vec<f64>,
    pub radius: f64,
    /// Covariance of `R^{beta/2 - d} G_R(t_i)` across replicas.
    pub empirical: Vec<Vec<f64>>,
    pub limit: Vec<Vec<f64>>,
    pub empirical_correlation: Vec<Vec<f64>>,
    pub limit_correlation: Vec<Vec<f64>>,
    pub reports: Vec<StatsReport>,
}

pub(crate) fn find_time(traj: &Trajectory, t: f64) -> Result<usize> {
    traj.record_times
        .iter()
        .position(|&r| (r - t).abs() <= 1e-9 * t.abs().max(1e-12))
        .ok_or_else(|| Error::InsufficientData(format!("time {t} was not recorded")))
}

fn correlation(cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = cov.len();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| if i == j { 1.0 } else { cov[i][j] / (cov[i][i] * cov[j][j]).sqrt() })
                .collect()
        })
        .collect()
}

/// Empirical covariance and correlation of the normalized averages at `times`
/// against the limit `k_beta \int_0^{t_i ^ t_j} eta^2`.
///
/// Covariance entries must lie within `covariance_tolerance` (relative) and
/// correlations within `correlation_tolerance` (absolute).
pub fn functional_cov_check(
    trajectories: &[Trajectory],
    region_index: usize,
    times: &[f64],
    radius: f64,
    constants: &LimitConstants,
    covariance_tolerance: f64,
    correlation_tolerance: f64,
) -> Result<FunctionalCovReport> {
    if times.is_empty() {
        return Err(Error::InvalidParameter("functional check needs at least one time".into()));
    }
    if trajectories.len() < 2 {
        return Err(Error::InsufficientData("functional check needs replicas".into()));
    }
    let scale = radius.powf(-0.5 * constants.spec.variance_exponent());
    let indices = times
        .iter()
        .map(|&t| find_time(&trajectories[0], t))
        .collect::<Result<Vec<_>>>()?;
    let columns: Vec<Vec<f64>> = indices
        .iter()
        .map(|&k| trajectories.iter().map(|tr| scale * tr.average(k, region_index)).collect())
        .collect();
    let m = times.len();
    let empirical: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..m).map(|j| sample_covariance(&columns[i], &columns[j])).collect())
        .collect();
    if (0..m).any(|i| empirical[i][i] < DEGENERATE_VARIANCE) {
        return Err(Error::Degenerate("singular empirical covariance; sigma(1)=0?".into()));
    }
    let limit = limit_covariance(times, constants)?;
    let empirical_correlation = correlation(&empirical);
    let limit_correlation = correlation(&limit);

    let n = trajectories.len() as f64;
    let mut reports = Vec::new();
    for i in 0..m {
        for j in i..m {
            let (a, b) = (&columns[i], &columns[j]);
            let (ma, mb) = (mean(a), mean(b));
            let products: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
            let se = (super::moments::sample_variance(&products) / n).sqrt();
            let params = format!("R={radius};t_i={};t_j={}", times[i], times[j]);
            reports.push(StatsReport::new(
                "fclt-covariance",
                params.clone(),
                empirical[i][j],
                se,
                limit[i][j],
                covariance_tolerance * limit[i][j].abs(),
                Rule::Within,
            ));
            if i != j {
                // Fisher-z delta method: se(r) ~ (1 - r^2) / sqrt(N - 3).
                let r = empirical_correlation[i][j];
                reports.push(StatsReport::new(
                    "fclt-correlation",
                    params,
                    r,
                    (1.0 - r * r) / (n - 3.0).max(1.0).sqrt(),
                    limit_correlation[i][j],
                    correlation_tolerance,
                    Rule::Within,
                ));
            }
        }
    }
    Ok(FunctionalCovReport {
        times: times.to_vec(),
        radius,
        empirical,
        limit,
        empirical_correlation,
        limit_correlation,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{Estimate, RieszSpec};
    use crate::observables::EtaCurve;
    use crate::rng::{domain, StreamKey};
    use rand_distr::{Distribution, StandardNormal};
    use std::collections::BTreeMap;

    fn constants() -> LimitConstants {
        LimitConstants {
            spec: RieszSpec::new(1, 0.5).unwrap(),
            k_beta: Estimate::exact(3.0),
            eta: EtaCurve::constant(1.0, vec![0.0, 0.1, 0.2]),
        }
    }

    /// Brownian paths `sqrt(k) B(t)` scaled by `R^{d - beta/2}` at t = 0.1, 0.2.
    fn brownian_trajectories(n: usize, radius: f64, k: f64) -> Vec<Trajectory> {
        let up = radius.powf(0.75);
        (0..n as u64)
            .map(|id| {
                let mut rng = StreamKey::new(5, domain::NOISE_CHECK, id).at_step(0);
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let b1 = (k * 0.1).sqrt() * z1;
                let b2 = b1 + (k * 0.1).sqrt() * z2;
                Trajectory {
                    replica_id: id,
                    record_times: vec![0.1, 0.2],
                    region_averages: vec![vec![up * b1], vec![up * b2]],
                    window_sigma_means: Vec::new(),
                    fields: BTreeMap::new(),
                }
            })
            .collect()
    }

    #[test]
    fn brownian_paths_pass() {
        let trajs = brownian_trajectories(20_000, 16.0, 3.0);
        let r = functional_cov_check(&trajs, 0, &[0.1, 0.2], 16.0, &constants(), 0.05, 0.02).unwrap();
        assert!((r.limit_correlation[0][1] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!(r.reports.iter().all(|x| x.pass), "{:?}", r.reports);
    }

    #[test]
    fn equal_times_correlate_exactly() {
        let trajs = brownian_trajectories(200, 4.0, 3.0);
        let r = functional_cov_check(&trajs, 0, &[0.2, 0.2], 4.0, &constants(), 1.0, 0.05).unwrap();
        assert_eq!(r.empirical_correlation[0][1], 1.0);
        assert_eq!(r.limit_correlation[0][1], 1.0);
    }

    #[test]
    fn single_time_is_a_variance_check() {
        let trajs = brownian_trajectories(200, 4.0, 3.0);
        let r = functional_cov_check(&trajs, 0, &[0.2], 4.0, &constants(), 1.0, 0.05).unwrap();
        assert_eq!(r.reports.len(), 1);
        assert!((r.limit[0][0] - 0.6).abs() < 1e-14);
    }

    #[test]
    fn zero_paths_are_degenerate() {
        let mut trajs = brownian_trajectories(200, 4.0, 3.0);
        for t in &mut trajs {
            t.region_averages = vec![vec![0.0], vec![0.0]];
        }
        let r = functional_cov_check(&trajs, 0, &[0.1, 0.2], 4.0, &constants(), 1.0, 0.05);
        assert!(matches!(r, Err(Error::Degenerate(_))));
    }
}
