use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// KS critical coefficient at the 1% level: distances below `1.63 / sqrt(N)` are noise.
pub const KS_FLOOR_1PCT: f64 = 1.63;
/// KS critical coefficient at the 0.1% level.
pub const KS_FLOOR_01PCT: f64 = 1.95;
pub const MIN_KS_SAMPLES: usize = 100;

pub fn ks_floor(n: usize, coefficient: f64) -> f64 {
    coefficient / (n as f64).sqrt()
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov distance between the empirical law of `values` and `N(0, 1)`.
pub fn ks_distance(values: &[f64]) -> Result<f64> {
    if values.len() < MIN_KS_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "KS distance needs at least {MIN_KS_SAMPLES} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("KS input contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = normal_cdf(x);
            ((i + 1) as f64 / n - phi).max(phi - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{domain, StreamKey};
    use rand_distr::{Distribution, StandardNormal};

    fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = StreamKey::new(seed, domain::NOISE_CHECK, 0).at_step(0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn point_mass_at_zero() {
        assert_eq!(ks_distance(&vec![0.0; 200]).unwrap(), 0.5);
    }

    #[test]
    fn rejects_small_samples() {
        assert!(ks_distance(&[0.0; 99]).is_err());
    }

    #[test]
    fn large_normal_sample_is_below_floor() {
        let n = 100_000;
        let ks = ks_distance(&normal_draws(n, 3)).unwrap();
        assert!(ks < ks_floor(n, KS_FLOOR_01PCT), "{ks}");
    }

    #[test]
    fn shifted_sample_is_detected() {
        let shifted: Vec<f64> = normal_draws(4000, 4).iter().map(|x| x + 0.2).collect();
        assert!(ks_distance(&shifted).unwrap() > 0.06);
    }

    #[test]
    fn calibration_over_seeds() {
        // At most one of 1000 exact-normal samples may exceed the 0.1% floor.
        let n = 1000;
        let exceed = (0..1000)
            .filter(|&s| ks_distance(&normal_draws(n, 1000 + s)).unwrap() > ks_floor(n, KS_FLOOR_01PCT))
            .count();
        assert!(exceed <= 1, "{exceed} exceedances");
    }

    proptest::proptest! {
        #[test]
        fn distance_is_a_probability_gap(xs in proptest::collection::vec(-5.0f64..5.0, 100..300)) {
            let ks = ks_distance(&xs).unwrap();
            proptest::prop_assert!(ks > 0.0 && ks <= 1.0);
            let mut reversed = xs.clone();
            reversed.reverse();
            proptest::prop_assert_eq!(ks, ks_distance(&reversed).unwrap());
        }
    }
}
