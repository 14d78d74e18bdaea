use serde::{Deserialize, Serialize};

use super::functional::find_time;
use super::regression::linear_fit;
use super::report::{Rule, StatsReport};
use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::noise::RieszSpec;

/// Moments at or below this fraction of the largest moment are treated as noise.
pub const MOMENT_FLOOR: f64 = 1e-12;
/// Admissible Hoelder exponent used as the one-sided slope target `alpha * p / 2`.
pub const TIGHTNESS_ALPHA: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementFit {
    pub radius: f64,
    pub p: u32,
    pub lags: Vec<f64>,
    pub moments: Vec<f64>,
    pub slope: f64,
    pub stderr: f64,
    pub warnings: Vec<String>,
    pub report: StatsReport,
}

fn check_p(p: u32) -> Result<()> {
    if p == 2 || p == 4 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must be 2 or 4, got {p}")))
    }
}

fn increment_moment(trajectories: &[Trajectory], region_index: usize, s: f64, t: f64, p: u32) -> Result<f64> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InsufficientData("no trajectories".into()))?;
    let (ks, kt) = (find_time(first, s)?, find_time(first, t)?);
    let total: f64 = trajectories
        .iter()
        .map(|tr| (tr.average(kt, region_index) - tr.average(ks, region_index)).powi(p as i32))
        .sum();
    Ok(total / trajectories.len() as f64)
}

/// Log-log slope of `E|G_R(t) - G_R(s)|^p` against `t - s`.
pub fn increment_moment_fit(
    trajectories: &[Trajectory],
    region_index: usize,
    radius: f64,
    pairs: &[(f64, f64)],
    p: u32,
) -> Result<IncrementFit> {
    check_p(p)?;
    let mut lags = Vec::with_capacity(pairs.len());
    let mut moments = Vec::with_capacity(pairs.len());
    for &(s, t) in pairs {
        if t < s {
            return Err(Error::InvalidParameter(format!("time pair ({s}, {t}) is reversed")));
        }
        lags.push(t - s);
        moments.push(increment_moment(trajectories, region_index, s, t, p)?);
    }
    let top = moments.iter().cloned().fold(0.0, f64::max);
    let mut warnings = Vec::new();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (&lag, &m) in lags.iter().zip(&moments) {
        if lag <= 0.0 || m <= MOMENT_FLOOR * top {
            warnings.push(format!("lag {lag}: moment {m:e} at noise floor; excluded"));
        } else {
            x.push(lag.ln());
            y.push(m.ln());
        }
    }
    let mut distinct = x.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "increment fit needs four distinct usable lags, got {}",
            distinct.len()
        )));
    }
    if distinct[distinct.len() - 1] - distinct[0] < 10f64.ln() * (1.0 - 1e-9) {
        return Err(Error::InsufficientData("increment lags must span a decade".into()));
    }
    let fit = linear_fit(&x, &y)?;
    let target = TIGHTNESS_ALPHA * p as f64 / 2.0;
    let report = StatsReport::new(
        "tightness-slope",
        format!("R={radius};p={p}"),
        fit.slope,
        fit.stderr,
        target,
        0.0,
        Rule::AtLeast,
    );
    Ok(IncrementFit {
        radius,
        p,
        lags,
        moments,
        slope: fit.slope,
        stderr: fit.stderr,
        warnings,
        report,
    })
}

/// Ratio of increment moments at two radii against `(R_b / R_a)^{p (d - beta/2)}`.
pub fn moment_ratio_check(
    trajectories: &[Trajectory],
    (region_a, radius_a): (usize, f64),
    (region_b, radius_b): (usize, f64),
    (s, t): (f64, f64),
    p: u32,
    spec: &RieszSpec,
    relative_tolerance: f64,
) -> Result<StatsReport> {
    check_p(p)?;
    let ma = increment_moment(trajectories, region_a, s, t, p)?;
    let mb = increment_moment(trajectories, region_b, s, t, p)?;
    if ma <= 0.0 {
        return Err(Error::Degenerate("zero increments; sigma(1)=0?".into()));
    }
    let target = (radius_b / radius_a).powf(p as f64 * 0.5 * spec.variance_exponent());
    Ok(StatsReport::new(
        "tightness-radius-ratio",
        format!("R={radius_a}->{radius_b};s={s};t={t};p={p}"),
        mb / ma,
        0.0,
        target,
        relative_tolerance * target,
        Rule::Within,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// Deterministic paths with `|G(t) - G(s)|^2 = c (t - s)` for every replica.
    fn sqrt_paths(times: &[f64], scales: &[f64]) -> Vec<Trajectory> {
        (0..10u64)
            .map(|id| {
                let sign = if id % 2 == 0 { 1.0 } else { -1.0 };
                Trajectory {
                    replica_id: id,
                    record_times: times.to_vec(),
                    region_averages: times
                        .iter()
                        .map(|&t| scales.iter().map(|c| sign * c * t.sqrt()).collect())
                        .collect(),
                    window_sigma_means: Vec::new(),
                    fields: BTreeMap::new(),
                }
            })
            .collect()
    }

    #[test]
    fn square_root_paths_have_slope_one() {
        let times = [0.0, 0.01, 0.02, 0.04, 0.1];
        let trajs = sqrt_paths(&times, &[1.0]);
        let pairs: Vec<(f64, f64)> = times[1..].iter().map(|&t| (0.0, t)).chain([(0.02, 0.02)]).collect();
        let fit = increment_moment_fit(&trajs, 0, 4.0, &pairs, 2).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!(fit.report.pass);
        assert_eq!(fit.moments[4], 0.0);
        assert_eq!(fit.warnings.len(), 1);
        let fit4 = increment_moment_fit(&trajs, 0, 4.0, &pairs, 4).unwrap();
        assert!((fit4.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn preconditions() {
        let times = [0.0, 0.01, 0.02, 0.04, 0.05];
        let trajs = sqrt_paths(&times, &[1.0]);
        let pairs: Vec<(f64, f64)> = times[1..].iter().map(|&t| (0.0, t)).collect();
        assert!(increment_moment_fit(&trajs, 0, 4.0, &pairs, 2).is_err());
        assert!(increment_moment_fit(&trajs, 0, 4.0, &pairs, 3).is_err());
    }

    #[test]
    fn radius_ratio() {
        let times = [0.0, 0.1];
        let spec = RieszSpec::new(1, 0.5).unwrap();
        let trajs = sqrt_paths(&times, &[8f64.powf(0.75), 16f64.powf(0.75)]);
        let r = moment_ratio_check(&trajs, (0, 8.0), (1, 16.0), (0.0, 0.1), 2, &spec, 0.2).unwrap();
        assert!((r.estimate - 2f64.powf(1.5)).abs() < 1e-12);
        assert!(r.pass);
    }
}
