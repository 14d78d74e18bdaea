use rustfft::num_complex::Complex64;

use super::initial::InitialCondition;
use crate::error::{Error, Result};
use crate::fft::{FftNd, FftScratch};
use crate::noise::{Lattice, SpatialField};

/// Periodic heat flow `p_tau *` on the lattice, applied in frequency space as
/// multiplication by `exp(-|xi|^2 tau / 2)`.
#[derive(Debug, Clone)]
pub struct HeatSemigroup {
    lattice: Lattice,
    tau: f64,
    /// Multiplier including the `1/n^d` inverse-transform normalization.
    multiplier: Vec<f64>,
    fft: FftNd,
}

#[derive(Debug, Clone)]
pub struct SemigroupWorkspace {
    buf: Vec<Complex64>,
    scratch: FftScratch,
}

impl HeatSemigroup {
    pub fn new(lattice: Lattice, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("heat time must be >= 0, got {tau}")));
        }
        let d = lattice.d();
        let n = lattice.n();
        let axis_decay: Vec<f64> = (0..n)
            .map(|k| {
                let xi = lattice.frequency(k);
                (-0.5 * xi * xi * tau).exp()
            })
            .collect();
        let norm = 1.0 / lattice.cells() as f64;
        let mut idx = vec![0usize; d];
        let multiplier = (0..lattice.cells())
            .map(|k| {
                lattice.multi_index(k, &mut idx);
                idx.iter().map(|&i| axis_decay[i]).product::<f64>() * norm
            })
            .collect();
        Ok(Self {
            lattice,
            tau,
            multiplier,
            fft: FftNd::new(d, n),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn workspace(&self) -> SemigroupWorkspace {
        SemigroupWorkspace {
            buf: vec![Complex64::default(); self.lattice.cells()],
            scratch: self.fft.scratch(),
        }
    }

    /// In-place application. Constant fields and `tau = 0` are returned untouched.
    pub fn apply(&self, values: &mut [f64], work: &mut SemigroupWorkspace) {
        assert_eq!(values.len(), self.lattice.cells());
        if self.tau == 0.0 {
            return;
        }
        let first = values[0];
        if values.iter().all(|&v| v == first) {
            return;
        }
        for (c, &v) in work.buf.iter_mut().zip(values.iter()) {
            *c = Complex64::new(v, 0.0);
        }
        self.fft.forward(&mut work.buf, &mut work.scratch);
        for (c, &m) in work.buf.iter_mut().zip(&self.multiplier) {
            *c *= m;
        }
        self.fft.inverse(&mut work.buf, &mut work.scratch);
        for (v, c) in values.iter_mut().zip(&work.buf) {
            *v = c.re;
        }
    }
}

pub fn heat_semigroup(field: &SpatialField, tau: f64) -> Result<SpatialField> {
    let sg = HeatSemigroup::new(*field.lattice(), tau)?;
    let mut out = field.clone();
    sg.apply(out.values_mut(), &mut sg.workspace());
    Ok(out)
}

/// `E u(t, .)`: the deterministic heat flow of the initial condition.
pub fn mean_field(init: &InitialCondition, lattice: Lattice, t: f64) -> Result<SpatialField> {
    heat_semigroup(&init.to_field(lattice)?, t)
}
