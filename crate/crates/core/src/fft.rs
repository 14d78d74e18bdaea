//! Multi-dimensional complex FFT on a cubic lattice, built from per-axis
//! one-dimensional plans.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Unnormalized forward/inverse transforms over `n^d` row-major cells.
#[derive(Clone)]
pub struct FftNd {
    d: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftNd")
            .field("d", &self.d)
            .field("n", &self.n)
            .finish()
    }
}

/// Per-thread scratch space for [`FftNd`].
#[derive(Debug, Default, Clone)]
pub struct FftScratch {
    fft: Vec<Complex64>,
    lines: Vec<Complex64>,
}

impl FftNd {
    pub fn new(d: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            d,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn scratch(&self) -> FftScratch {
        let mut s = FftScratch::default();
        self.reserve(&mut s);
        s
    }

    fn reserve(&self, s: &mut FftScratch) {
        let need = self
            .forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len());
        if s.fft.len() < need {
            s.fft.resize(need, Complex64::default());
        }
        if self.d > 1 && s.lines.len() < self.len() {
            s.lines.resize(self.len(), Complex64::default());
        }
    }

    pub fn forward(&self, buf: &mut [Complex64], scratch: &mut FftScratch) {
        self.process(&*self.forward, buf, scratch);
    }

    /// Inverse transform without the `1/n^d` factor.
    pub fn inverse(&self, buf: &mut [Complex64], scratch: &mut FftScratch) {
        self.process(&*self.inverse, buf, scratch);
    }

    fn process(&self, plan: &dyn Fft<f64>, buf: &mut [Complex64], scratch: &mut FftScratch) {
        assert_eq!(buf.len(), self.len(), "buffer length must be n^d");
        self.reserve(scratch);
        let n = self.n;
        // Last axis is contiguous.
        plan.process_with_scratch(buf, &mut scratch.fft);
        let lines = &mut scratch.lines;
        for axis in (0..self.d.saturating_sub(1)).rev() {
            let stride = n.pow((self.d - 1 - axis) as u32);
            let block = n * stride;
            for chunk in buf.chunks_exact_mut(block) {
                // (n x stride) -> (stride x n), transform rows, transpose back.
                let tmp = &mut lines[..block];
                for i in 0..n {
                    for j in 0..stride {
                        tmp[j * n + i] = chunk[i * stride + j];
                    }
                }
                plan.process_with_scratch(tmp, &mut scratch.fft);
                for i in 0..n {
                    for j in 0..stride {
                        chunk[i * stride + j] = tmp[j * n + i];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(d: usize, n: usize, input: &[Complex64]) -> Vec<Complex64> {
        let len = n.pow(d as u32);
        let idx = |mut k: usize| {
            let mut v = vec![0usize; d];
            for a in (0..d).rev() {
                v[a] = k % n;
                k /= n;
            }
            v
        };
        (0..len)
            .map(|k| {
                let kv = idx(k);
                (0..len)
                    .map(|j| {
                        let jv = idx(j);
                        let phase: f64 = kv.iter().zip(&jv).map(|(a, b)| (a * b) as f64).sum();
                        let ang = -2.0 * std::f64::consts::PI * phase / n as f64;
                        input[j] * Complex64::from_polar(1.0, ang)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_in_one_two_three_dimensions() {
        for (d, n) in [(1, 8), (2, 4), (3, 4)] {
            let fft = FftNd::new(d, n);
            let input: Vec<Complex64> = (0..fft.len())
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let expected = naive_dft(d, n, &input);
            let mut buf = input.clone();
            let mut scratch = fft.scratch();
            fft.forward(&mut buf, &mut scratch);
            for (a, b) in buf.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-10, "d={d}: {a} vs {b}");
            }
            fft.inverse(&mut buf, &mut scratch);
            let scale = fft.len() as f64;
            for (a, b) in buf.iter().zip(&input) {
                assert!((a / scale - b).norm() < 1e-12);
            }
        }
    }
}
