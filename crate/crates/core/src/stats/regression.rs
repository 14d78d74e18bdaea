use serde::{Deserialize, Serialize};

use super::ks::{ks_floor, KS_FLOOR_1PCT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals; NaN with two points.
    pub stderr: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs at least two paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("linear fit needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let stderr = if x.len() > 2 {
        let ssr: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LinearFit { slope, intercept, stderr })
}

fn log_log(pairs: &[(f64, f64)], what: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(pairs.len());
    let mut ys = Vec::with_capacity(pairs.len());
    for &(r, v) in pairs {
        if !(r > 0.0 && v > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{what} needs positive values, got ({r}, {v})"
            )));
        }
        xs.push(r.ln());
        ys.push(v.ln());
    }
    Ok((xs, ys))
}

fn distinct_count(values: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Slope of `log sigma_R` against `log R`.
pub fn scaling_fit(pairs: &[(f64, f64)]) -> Result<LinearFit> {
    if distinct_count(pairs.iter().map(|p| p.0)) < 3 {
        return Err(Error::InsufficientData("scaling fit needs at least three distinct R".into()));
    }
    let (x, y) = log_log(pairs, "scaling fit")?;
    linear_fit(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub stderr: f64,
    pub floor: f64,
    /// Per input point: whether it was above the floor and entered the fit.
    pub used: Vec<bool>,
    pub warnings: Vec<String>,
}

/// Slope of `log KS` against `log R` over the points above the 1% statistical floor.
pub fn rate_fit(pairs: &[(f64, f64)], n_replicas: usize) -> Result<RateFit> {
    if distinct_count(pairs.iter().map(|p| p.0)) < 3 {
        return Err(Error::InsufficientData("rate fit needs at least three distinct R".into()));
    }
    let floor = ks_floor(n_replicas, KS_FLOOR_1PCT);
    let mut warnings = Vec::new();
    let used: Vec<bool> = pairs
        .iter()
        .map(|&(r, ks)| {
            let keep = ks >= floor;
            if !keep {
                warnings.push(format!("R={r}: KS={ks:.4} below floor {floor:.4}; excluded"));
            }
            keep
        })
        .collect();
    let kept: Vec<(f64, f64)> = pairs.iter().zip(&used).filter(|(_, &u)| u).map(|(p, _)| *p).collect();
    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "rate fit has {} point(s) above the statistical floor {floor:.4}",
            kept.len()
        )));
    }
    let (x, y) = log_log(&kept, "rate fit")?;
    let fit = linear_fit(&x, &y)?;
    Ok(RateFit {
        exponent: fit.slope,
        stderr: fit.stderr,
        floor,
        used,
        warnings,
    })
}
