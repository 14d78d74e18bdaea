//! Circulant embedding of the periodic cell covariance.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;

use super::field::SpatialField;
use super::kernel::{cell_self_energy, RieszSpec};
use super::lattice::Lattice;
use super::quadrature::Estimate;
use crate::error::{Error, Result};
use crate::fft::{FftNd, FftScratch};

/// Largest admissible share of negative eigenvalue mass.
pub const MAX_CLAMPED_MASS: f64 = 0.01;

/// Diagonalized covariance of the noise slices for a unit time step.
///
/// Slices for step `dt` are scaled by `sqrt(dt)` at sampling time. Immutable
/// once built and safe to share between replicas.
#[derive(Debug, Clone)]
pub struct SpectralCovariance {
    lattice: Lattice,
    spec: RieszSpec,
    self_energy: Estimate,
    row: Vec<f64>,
    eigenvalues: Vec<f64>,
    clamped_mass: f64,
    /// `sqrt(max(eigenvalue, 0) / n^d)`
    amplitudes: Vec<f64>,
    fft: FftNd,
}

/// Scratch buffers owned by one replica.
#[derive(Debug, Clone)]
pub struct NoiseWorkspace {
    spectrum: Vec<Complex64>,
    scratch: FftScratch,
}

pub fn build_embedding(lattice: Lattice, spec: RieszSpec) -> Result<SpectralCovariance> {
    if lattice.d() != spec.d() {
        return Err(Error::InvalidParameter(format!(
            "lattice dimension {} differs from noise dimension {}",
            lattice.d(),
            spec.d()
        )));
    }
    let self_energy = cell_self_energy(lattice.spacing(), &spec)?;
    let d = lattice.d();
    let mut idx = vec![0usize; d];
    let mut offset = vec![0isize; d];
    let row: Vec<f64> = (0..lattice.cells())
        .map(|k| {
            if k == 0 {
                return self_energy.value;
            }
            lattice.multi_index(k, &mut idx);
            for (o, &i) in offset.iter_mut().zip(&idx) {
                *o = i as isize;
            }
            lattice.offset_length(&offset).powf(-spec.beta())
        })
        .collect();

    let fft = FftNd::new(d, lattice.n());
    let mut buf: Vec<Complex64> = row.iter().map(|&r| Complex64::new(r, 0.0)).collect();
    fft.forward(&mut buf, &mut fft.scratch());
    let raw: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let negative: f64 = raw.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let total: f64 = raw.iter().map(|v| v.abs()).sum();
    let clamped_mass = if total > 0.0 { negative / total } else { 0.0 };
    if clamped_mass >= MAX_CLAMPED_MASS {
        return Err(Error::Embedding { clamped_mass });
    }
    let eigenvalues: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
    let cells = lattice.cells() as f64;
    let amplitudes = eigenvalues.iter().map(|&v| (v / cells).sqrt()).collect();
    Ok(SpectralCovariance {
        lattice,
        spec,
        self_energy,
        row,
        eigenvalues,
        clamped_mass,
        amplitudes,
        fft,
    })
}

impl SpectralCovariance {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn spec(&self) -> &RieszSpec {
        &self.spec
    }

    pub fn self_energy(&self) -> Estimate {
        self.self_energy
    }

    /// First row of the cell-covariance circulant (unit time step).
    pub fn row(&self) -> &[f64] {
        &self.row
    }

    /// Clamped (nonnegative) eigenvalues indexed by lattice frequency.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn clamped_mass(&self) -> f64 {
        self.clamped_mass
    }

    pub fn workspace(&self) -> NoiseWorkspace {
        NoiseWorkspace {
            spectrum: vec![Complex64::default(); self.lattice.cells()],
            scratch: self.fft.scratch(),
        }
    }

    /// Draws one slice with covariance `dt * row[i - j]` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut [f64], work: &mut NoiseWorkspace) {
        assert!(dt > 0.0, "time step must be positive");
        assert_eq!(out.len(), self.lattice.cells());
        let scale = dt.sqrt();
        for (c, &a) in work.spectrum.iter_mut().zip(&self.amplitudes) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let s = a * scale;
            *c = Complex64::new(s * re, s * im);
        }
        self.fft.inverse(&mut work.spectrum, &mut work.scratch);
        for (o, c) in out.iter_mut().zip(&work.spectrum) {
            *o = c.re;
        }
    }

    pub fn sample_slice<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> SpatialField {
        let mut work = self.workspace();
        let mut out = vec![0.0; self.lattice.cells()];
        self.sample_into(dt, rng, &mut out, &mut work);
        SpatialField::from_parts(self.lattice, out)
    }
}
