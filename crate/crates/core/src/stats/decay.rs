use serde::{Deserialize, Serialize};

use super::report::{Rule, StatsReport};
use crate::engine::NonlinearitySpec;
use crate::error::{Error, Result};
use crate::noise::SpatialField;
use crate::observables::RegionMask;

pub const MIN_DECAY_REPLICAS: usize = 100;
/// Acceptance bound on max/min of `|Psi - eta^2| |xi|^beta` over the upper half of the lags.
pub const DECAY_RATIO_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayEntry {
    /// Lag in cells along the first axis.
    pub lag_cells: usize,
    pub distance: f64,
    pub psi: f64,
    pub eta_sq: f64,
    /// `|psi - eta^2| * distance^beta`
    pub product: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub entries: Vec<DecayEntry>,
    /// max/min of the product over the upper half of the lags (1 when all are zero).
    pub ratio: f64,
    pub report: StatsReport,
}

/// `lags` log-spaced integer lags (in cells) covering `[2h, L/4]`.
pub fn default_decay_lags(n: usize, count: usize) -> Vec<usize> {
    let (lo, hi) = (2.0f64, (n / 8) as f64);
    let mut lags: Vec<usize> = (0..count)
        .map(|i| {
            let f = if count > 1 { i as f64 / (count - 1) as f64 } else { 0.0 };
            (lo * (hi / lo).powf(f)).round() as usize
        })
        .collect();
    lags.dedup();
    lags
}

/// Estimates `Psi(s, xi) = E sigma(u(s, x)) sigma(u(s, x + xi))` along the first axis
/// from one field per replica, averaging over replicas and the cells of `window`.
pub fn correlation_decay_check(
    fields: &[&SpatialField],
    sigma: &NonlinearitySpec,
    window: &RegionMask,
    lags: &[usize],
    beta: f64,
) -> Result<DecayReport> {
    if fields.len() < MIN_DECAY_REPLICAS {
        return Err(Error::InsufficientData(format!(
            "decay check needs at least {MIN_DECAY_REPLICAS} replicas, got {}",
            fields.len()
        )));
    }
    if lags.len() < 2 {
        return Err(Error::InvalidParameter("decay check needs at least two lags".into()));
    }
    let lattice = *fields[0].lattice();
    let h = lattice.spacing();
    let quarter = lattice.half_extent() / 4.0;
    for &k in lags {
        let dist = k as f64 * h;
        if k < 2 || dist > quarter * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "lag {dist} outside [2h, L/4] = [{}, {quarter}]",
                2.0 * h
            )));
        }
    }
    let d = lattice.d();
    let mut scratch = vec![0usize; d];
    let mut offset = vec![0isize; d];
    // Shifted cell indices per lag, shared by every replica.
    let shifted: Vec<Vec<usize>> = lags
        .iter()
        .map(|&k| {
            offset[0] = k as isize;
            window.cells().iter().map(|&c| lattice.shifted(c, &offset, &mut scratch)).collect()
        })
        .collect();

    let count = (fields.len() * window.len()) as f64;
    let mut eta_sum = 0.0;
    let mut psi_sum = vec![0.0; lags.len()];
    let mut s = vec![0.0; lattice.cells()];
    for field in fields {
        for (o, &v) in s.iter_mut().zip(field.values()) {
            *o = sigma.eval(v);
        }
        eta_sum += window.cells().iter().map(|&c| s[c]).sum::<f64>();
        for (acc, targets) in psi_sum.iter_mut().zip(&shifted) {
            *acc += window.cells().iter().zip(targets).map(|(&c, &t)| s[c] * s[t]).sum::<f64>();
        }
    }
    let eta = eta_sum / count;
    let eta_sq = eta * eta;
    let mut entries: Vec<DecayEntry> = lags
        .iter()
        .zip(&psi_sum)
        .map(|(&k, &p)| {
            let psi = p / count;
            let distance = k as f64 * h;
            DecayEntry {
                lag_cells: k,
                distance,
                psi,
                eta_sq,
                product: (psi - eta_sq).abs() * distance.powf(beta),
            }
        })
        .collect();
    entries.sort_by_key(|e| e.lag_cells);

    let upper = &entries[entries.len() / 2..];
    let max = upper.iter().map(|e| e.product).fold(0.0, f64::max);
    let min = upper.iter().map(|e| e.product).fold(f64::INFINITY, f64::min);
    let ratio = if max == 0.0 { 1.0 } else { max / min };
    let report = StatsReport::new(
        "decay-envelope-ratio",
        format!(
            "lags={}..{};replicas={}",
            upper[0].distance,
            upper[upper.len() - 1].distance,
            fields.len()
        ),
        ratio,
        0.0,
        DECAY_RATIO_LIMIT,
        0.0,
        Rule::AtMost,
    );
    Ok(DecayReport { entries, ratio, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Nonlinearity;
    use crate::noise::Lattice;

    fn setup(n_fields: usize) -> (Lattice, RegionMask, Vec<SpatialField>) {
        let lattice = Lattice::new(1, 256, 16.0).unwrap();
        let window = RegionMask::interior(&lattice, 3.0).unwrap();
        let fields = (0..n_fields).map(|_| SpatialField::constant(lattice, 1.0)).collect();
        (lattice, window, fields)
    }

    #[test]
    fn degenerate_coefficient_gives_zero() {
        let (_, window, fields) = setup(100);
        let refs: Vec<&SpatialField> = fields.iter().collect();
        let sigma = NonlinearitySpec::new(Nonlinearity::Affine { a: 1.0, b: -1.0 }).unwrap();
        let r = correlation_decay_check(&refs, &sigma, &window, &default_decay_lags(256, 6), 0.5).unwrap();
        assert!(r.entries.iter().all(|e| e.psi == 0.0 && e.eta_sq == 0.0));
        assert!(r.report.pass);
    }

    #[test]
    fn preconditions() {
        let (_, window, fields) = setup(100);
        let refs: Vec<&SpatialField> = fields.iter().collect();
        let sigma = NonlinearitySpec::new(Nonlinearity::Linear).unwrap();
        // L/4 = 4 is 32 cells.
        assert!(correlation_decay_check(&refs, &sigma, &window, &[2, 33], 0.5).is_err());
        assert!(correlation_decay_check(&refs, &sigma, &window, &[1, 8], 0.5).is_err());
        assert!(correlation_decay_check(&refs[..99], &sigma, &window, &[2, 8], 0.5).is_err());
        assert_eq!(default_decay_lags(256, 4), vec![2, 5, 13, 32]);
    }

    #[test]
    fn recovers_a_known_covariance() {
        // u(x) = 1 + A cos(2 pi m x / 2L + phase) gives Psi - eta^2 = (A^2/2) cos(2 pi m xi / 2L).
        let lattice = Lattice::new(1, 256, 16.0).unwrap();
        let window = RegionMask::interior(&lattice, 0.0).unwrap();
        let fields: Vec<SpatialField> = (0..128)
            .map(|r| {
                let phase = std::f64::consts::TAU * r as f64 / 128.0;
                SpatialField::from_fn(lattice, |x| 1.0 + 0.5 * (std::f64::consts::PI * x[0] / 16.0 + phase).cos())
            })
            .collect();
        let refs: Vec<&SpatialField> = fields.iter().collect();
        let sigma = NonlinearitySpec::new(Nonlinearity::Linear).unwrap();
        let r = correlation_decay_check(&refs, &sigma, &window, &[2, 16, 32], 0.0).unwrap();
        for e in &r.entries {
            let expected = 0.125 * (std::f64::consts::PI * e.distance / 16.0).cos();
            assert!((e.psi - e.eta_sq - expected).abs() < 1e-12, "{e:?}");
        }
    }
}
