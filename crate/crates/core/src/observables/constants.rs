use serde::{Deserialize, Serialize};

use super::region::{RegionKind, RegionMask};
use crate::engine::{NonlinearitySpec, Trajectory};
use crate::error::{Error, Result};
use crate::noise::{riesz_pair_integral, Estimate, PairDomain, RieszSpec};
use crate::stats::mean_and_stderr;

pub const MIN_KBETA_SAMPLES: usize = 1_000_000;
pub const MIN_ETA_REPLICAS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KBetaMethod {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

impl KBetaMethod {
    pub fn name(&self) -> &'static str {
        match self {
            KBetaMethod::ClosedForm => "closed-form",
            KBetaMethod::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

/// `\int\int_{D_1^2} |x-y|^{-beta}` for the unit ball or the cube `[-1, 1]^d`.
pub fn k_beta(kind: RegionKind, spec: &RieszSpec, method: KBetaMethod) -> Result<Estimate> {
    let (d, beta) = (spec.d(), spec.beta());
    match method {
        KBetaMethod::ClosedForm => {
            if d != 1 {
                return Err(Error::InvalidParameter(format!(
                    "closed-form k_beta is only available for d=1, got d={d}"
                )));
            }
            // Both regions are [-1, 1] in one dimension.
            Ok(Estimate::exact(2f64.powf(3.0 - beta) / ((1.0 - beta) * (2.0 - beta))))
        }
        KBetaMethod::MonteCarlo { samples, seed } => {
            if samples < MIN_KBETA_SAMPLES {
                return Err(Error::InvalidParameter(format!(
                    "k_beta Monte Carlo needs at least {MIN_KBETA_SAMPLES} samples, got {samples}"
                )));
            }
            Ok(match kind {
                RegionKind::Ball => riesz_pair_integral(PairDomain::UnitBall, spec, samples, seed),
                RegionKind::Box => riesz_pair_integral(PairDomain::UnitCube, spec, samples, seed)
                    .scaled(2f64.powf(spec.variance_exponent())),
            })
        }
    }
}

/// Tabulated `eta(s) = E sigma(u(s, y))` with replica-level standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
}

impl EtaCurve {
    pub fn constant(value: f64, times: Vec<f64>) -> Self {
        let n = times.len();
        Self {
            times,
            values: vec![value; n],
            stderrs: vec![0.0; n],
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Trapezoidal `\int_0^t eta^2`, interpolating `eta^2` linearly inside a panel.
    pub fn integrated_square(&self, t: f64) -> Result<f64> {
        let (ts, vs) = (&self.times, &self.values);
        if ts.first() != Some(&0.0) {
            return Err(Error::InvalidParameter("eta curve must start at s=0".into()));
        }
        let last = *ts.last().unwrap();
        if t > last * (1.0 + 1e-12) || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "eta tabulated on [0, {last}], cannot integrate to {t}"
            )));
        }
        let mut total = 0.0;
        for i in 1..ts.len() {
            let (a, b) = (ts[i - 1], ts[i]);
            let (fa, fb) = (vs[i - 1].powi(2), vs[i].powi(2));
            if t >= b {
                total += 0.5 * (b - a) * (fa + fb);
            } else {
                if t > a {
                    let ft = fa + (fb - fa) * (t - a) / (b - a);
                    total += 0.5 * (t - a) * (fa + ft);
                }
                break;
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub spec: RieszSpec,
    pub k_beta: Estimate,
    pub eta: EtaCurve,
}

/// `eta(s)` from the window average of `sigma(u(s, .))` in each replica.
///
/// Uses stored fields where present and falls back to the window summaries
/// recorded during simulation.
pub fn estimate_eta(
    trajectories: &[Trajectory],
    sigma: &NonlinearitySpec,
    window: &RegionMask,
    times: &[f64],
) -> Result<EtaCurve> {
    if trajectories.len() < MIN_ETA_REPLICAS {
        return Err(Error::InsufficientData(format!(
            "eta needs at least {MIN_ETA_REPLICAS} replicas, got {}",
            trajectories.len()
        )));
    }
    let mut values = Vec::with_capacity(times.len());
    let mut stderrs = Vec::with_capacity(times.len());
    for &t in times {
        let per_replica = trajectories
            .iter()
            .map(|traj| {
                let idx = traj
                    .record_times
                    .iter()
                    .position(|&r| (r - t).abs() <= 1e-9 * t.max(1e-300))
                    .ok_or_else(|| Error::InsufficientData(format!("time {t} was not recorded")))?;
                if let Some(field) = traj.fields.get(&idx) {
                    Ok(window.mean_of(field.values(), |v| sigma.eval(v)))
                } else if let Some(&m) = traj.window_sigma_means.get(idx) {
                    Ok(m)
                } else {
                    Err(Error::InsufficientData(format!(
                        "missing stored fields at t={t} for replica {}",
                        traj.replica_id
                    )))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let (m, se) = mean_and_stderr(&per_replica);
        values.push(m);
        stderrs.push(se);
    }
    Ok(EtaCurve {
        times: times.to_vec(),
        values,
        stderrs,
    })
}

/// `k_beta * \int_0^t eta^2 * R^{2d - beta}`, the limit variance of the average over `B_R`.
pub fn predicted_variance(t: f64, radius: f64, constants: &LimitConstants) -> Result<f64> {
    if constants.eta.is_identically_zero() {
        return Err(Error::Degenerate(
            "sigma(1)=0 regime; no CLT normalization exists".into(),
        ));
    }
    let integral = constants.eta.integrated_square(t)?;
    Ok(constants.k_beta.value * integral * radius.powf(constants.spec.variance_exponent()))
}

/// `C_ij = k_beta \int_0^{t_i ^ t_j} eta^2`.
pub fn limit_covariance(times: &[f64], constants: &LimitConstants) -> Result<Vec<Vec<f64>>> {
    let integrals = times
        .iter()
        .map(|&t| constants.eta.integrated_square(t))
        .collect::<Result<Vec<f64>>>()?;
    Ok((0..times.len())
        .map(|i| {
            (0..times.len())
                .map(|j| {
                    let k = if times[i] <= times[j] { i } else { j };
                    constants.k_beta.value * integrals[k]
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_constants(t_max: f64) -> LimitConstants {
        let spec = RieszSpec::new(1, 0.5).unwrap();
        LimitConstants {
            spec,
            k_beta: k_beta(RegionKind::Ball, &spec, KBetaMethod::ClosedForm).unwrap(),
            eta: EtaCurve::constant(1.0, vec![0.0, t_max / 2.0, t_max]),
        }
    }

    #[test]
    fn closed_form_reference_value() {
        let spec = RieszSpec::new(1, 0.5).unwrap();
        let k = k_beta(RegionKind::Ball, &spec, KBetaMethod::ClosedForm).unwrap();
        assert_relative_eq!(k.value, 2f64.powf(2.5) / 0.75, max_relative = 1e-15);
        assert!((k.value - 7.54247).abs() < 1e-5);
        let d2 = RieszSpec::new(2, 1.0).unwrap();
        assert!(k_beta(RegionKind::Ball, &d2, KBetaMethod::ClosedForm).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        for beta in [0.25, 0.5, 0.75] {
            let spec = RieszSpec::new(1, beta).unwrap();
            let exact = k_beta(RegionKind::Ball, &spec, KBetaMethod::ClosedForm).unwrap().value;
            for kind in [RegionKind::Ball, RegionKind::Box] {
                let mc = k_beta(kind, &spec, KBetaMethod::MonteCarlo { samples: 1_000_000, seed: 1 }).unwrap();
                assert!((mc.value - exact).abs() < 3.0 * mc.stderr, "beta={beta} {kind:?}: {mc:?} vs {exact}");
            }
        }
        let spec = RieszSpec::new(1, 0.5).unwrap();
        assert!(k_beta(RegionKind::Ball, &spec, KBetaMethod::MonteCarlo { samples: 10, seed: 1 }).is_err());
    }

    #[test]
    fn two_dimensional_ball_reference() {
        // Frozen from a 10^7-sample run: 16.7552 +- 0.0012; exact value is 16 pi / 3.
        const FROZEN: f64 = 16.755;
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let mc = k_beta(RegionKind::Ball, &spec, KBetaMethod::MonteCarlo { samples: 10_000_000, seed: 2 }).unwrap();
        assert!(mc.stderr < 5e-3, "{mc:?}");
        assert!((mc.value - FROZEN).abs() < 4.0 * mc.stderr + 1e-3, "{mc:?}");
        assert!((mc.value - 16.0 * std::f64::consts::PI / 3.0).abs() < 4.0 * mc.stderr);
    }

    #[test]
    fn predicted_variance_linear_reference() {
        let c = linear_constants(0.25);
        let v = predicted_variance(0.25, 16.0, &c).unwrap();
        assert_relative_eq!(v, 0.25 * 2f64.powf(2.5) / 0.75 * 64.0, max_relative = 1e-14);
        assert!((v - 120.68).abs() < 0.01);
        assert_eq!(predicted_variance(0.0, 16.0, &c).unwrap(), 0.0);
        let doubled = predicted_variance(0.25, 32.0, &c).unwrap();
        assert_relative_eq!(doubled / v, 2f64.powf(1.5), max_relative = 1e-14);
    }

    #[test]
    fn degenerate_eta_has_no_normalization() {
        let mut c = linear_constants(0.25);
        c.eta = EtaCurve::constant(0.0, vec![0.0, 0.25]);
        assert!(matches!(predicted_variance(0.25, 4.0, &c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn limit_covariance_min_kernel() {
        let c = linear_constants(0.2);
        let cov = limit_covariance(&[0.1, 0.2], &c).unwrap();
        assert_relative_eq!(cov[0][1], cov[1][0]);
        assert_relative_eq!(cov[0][0], c.k_beta.value * 0.1, max_relative = 1e-14);
        let corr = cov[0][1] / (cov[0][0] * cov[1][1]).sqrt();
        assert_relative_eq!(corr, 0.5f64.sqrt(), max_relative = 1e-14);
        let single = limit_covariance(&[0.2], &c).unwrap();
        assert_relative_eq!(
            single[0][0],
            predicted_variance(0.2, 16.0, &c).unwrap() / 16f64.powf(1.5),
            max_relative = 1e-14
        );
    }

    #[test]
    fn trapezoid_interpolates_inside_panels() {
        let eta = EtaCurve {
            times: vec![0.0, 1.0],
            values: vec![1.0, 2f64.sqrt()],
            stderrs: vec![0.0; 2],
        };
        // eta^2 = 1 + s on [0, 1] is linear, so the trapezoid is exact.
        assert_relative_eq!(eta.integrated_square(0.5).unwrap(), 0.5 + 0.125, max_relative = 1e-14);
        assert!(eta.integrated_square(1.5).is_err());
    }
}
