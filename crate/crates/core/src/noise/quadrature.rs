//! Riesz double integrals `\int\int_{D^2} |x-y|^{-beta} dx dy` over simple domains.
//!
//! Integrating the kernel radially around `x` along direction `theta` gives
//! `rho(x, theta)^{d-beta} / (d-beta)`, where `rho` is the distance from `x` to
//! the boundary. Averaging that over uniform `(x, theta)` is a conditional
//! expectation of the uniform point-pair estimator with a bounded integrand,
//! so the Monte Carlo variance stays finite for every `beta < d`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::kernel::RieszSpec;
use crate::rng::{domain, StreamKey};

/// Point estimate with its Monte Carlo standard error (zero when exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            value: self.value * factor,
            stderr: self.stderr * factor.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairDomain {
    /// `{|x| <= 1}`
    UnitBall,
    /// `[0, 1]^d`
    UnitCube,
}

pub fn sphere_area(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma(half)
}

pub fn ball_volume(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma(half + 1.0)
}

fn random_direction<R: Rng>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
            norm2 += *v * *v;
        }
        if norm2 > 1e-300 {
            let inv = norm2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

fn chord_length(domain: PairDomain, x: &[f64], theta: &[f64]) -> f64 {
    match domain {
        PairDomain::UnitBall => {
            let xt: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
            let xx: f64 = x.iter().map(|a| a * a).sum();
            -xt + (xt * xt + 1.0 - xx).max(0.0).sqrt()
        }
        PairDomain::UnitCube => x
            .iter()
            .zip(theta)
            .map(|(&xi, &ti)| {
                if ti > 0.0 {
                    (1.0 - xi) / ti
                } else if ti < 0.0 {
                    -xi / ti
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min),
    }
}

fn uniform_point<R: Rng>(domain: PairDomain, rng: &mut R, dir: &mut [f64], out: &mut [f64]) {
    match domain {
        PairDomain::UnitCube => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
        PairDomain::UnitBall => {
            random_direction(rng, dir);
            let r = rng.random::<f64>().powf(1.0 / out.len() as f64);
            out.iter_mut().zip(dir.iter()).for_each(|(o, t)| *o = r * t);
        }
    }
}

/// Monte Carlo estimate of the Riesz double integral over `domain`.
pub fn riesz_pair_integral(domain: PairDomain, spec: &RieszSpec, samples: usize, seed: u64) -> Estimate {
    let d = spec.d();
    let power = d as f64 - spec.beta();
    let mut rng = StreamKey::new(seed, domain::QUADRATURE, d as u64).at_step(0);
    let mut x = vec![0.0; d];
    let mut theta = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        uniform_point(domain, &mut rng, &mut scratch, &mut x);
        random_direction(&mut rng, &mut theta);
        let v = chord_length(domain, &x, &theta).powf(power);
        sum += v;
        sum2 += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum2 / m - mean * mean).max(0.0) * m / (m - 1.0);
    let volume = match domain {
        PairDomain::UnitBall => ball_volume(d),
        PairDomain::UnitCube => 1.0,
    };
    let factor = volume * sphere_area(d) / power;
    Estimate {
        value: factor * mean,
        stderr: factor * (var / m).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_constants() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((ball_volume(2) - std::f64::consts::PI).abs() < 1e-13);
        assert!((ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn disk_integral_matches_closed_form() {
        // \int\int_{B_1^2} |x-y|^{-1} = pi^2 * E|X-Y|^{-1} = pi^2 * 16/(3 pi) for the unit disk.
        let spec = RieszSpec::new(2, 1.0).unwrap();
        let est = riesz_pair_integral(PairDomain::UnitBall, &spec, 1 << 20, 3);
        let exact = 16.0 * std::f64::consts::PI / 3.0;
        assert!((est.value - exact).abs() < 4.0 * est.stderr, "{est:?} vs {exact}");
    }

    #[test]
    fn interval_matches_closed_form() {
        for beta in [0.25, 0.5, 0.75] {
            let spec = RieszSpec::new(1, beta).unwrap();
            let est = riesz_pair_integral(PairDomain::UnitCube, &spec, 1 << 18, 5);
            let exact = 2.0 / ((1.0 - beta) * (2.0 - beta));
            assert!((est.value - exact).abs() < 4.0 * est.stderr, "beta={beta}: {est:?}");
        }
    }
}
