use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic cubic lattice on the torus `[-L, L)^d` with `n` points per axis.
///
/// Cell `i` along an axis is centered at `-L + i h`, `h = 2L/n`; flat indices
/// are row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    d: usize,
    n: usize,
    half_extent: f64,
    spacing: f64,
}

impl Lattice {
    pub fn new(d: usize, n: usize, half_extent: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("d must be positive".into()));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("n must be a power of two >= 2, got {n}")));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::InvalidParameter(format!("L must be positive, got {half_extent}")));
        }
        Ok(Self {
            d,
            n,
            half_extent,
            spacing: 2.0 * half_extent / n as f64,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.d as i32)
    }

    pub fn cells(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_extent + i as f64 * self.spacing
    }

    /// Axis index of the cell centered at the origin.
    pub fn origin_offset(&self) -> usize {
        self.n / 2
    }

    pub fn multi_index(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.d).rev() {
            out[a] = flat % self.n;
            flat /= self.n;
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn position(&self, flat: usize, out: &mut [f64]) {
        let mut rem = flat;
        for a in (0..self.d).rev() {
            out[a] = self.coordinate(rem % self.n);
            rem /= self.n;
        }
    }

    /// Signed minimum-image offset of an axis index, in `(-n/2, n/2]`.
    pub fn min_image(&self, k: usize) -> isize {
        let k = (k % self.n) as isize;
        let n = self.n as isize;
        if k <= n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Angular frequency of axis mode `k`: `pi * m / L` with `m` the signed index.
    pub fn frequency(&self, k: usize) -> f64 {
        std::f64::consts::PI * self.min_image(k) as f64 / self.half_extent
    }

    /// Flat index of `idx` shifted by a signed cell offset, wrapping periodically.
    pub fn shifted(&self, flat: usize, offset: &[isize], scratch: &mut [usize]) -> usize {
        self.multi_index(flat, scratch);
        let n = self.n as isize;
        for (s, o) in scratch.iter_mut().zip(offset) {
            *s = (*s as isize + o).rem_euclid(n) as usize;
        }
        self.flat_index(scratch)
    }

    /// Euclidean minimum-image length of a cell offset.
    pub fn offset_length(&self, offset: &[isize]) -> f64 {
        offset
            .iter()
            .map(|&o| {
                let m = self.min_image(o.rem_euclid(self.n as isize) as usize) as f64;
                m * m
            })
            .sum::<f64>()
            .sqrt()
            * self.spacing
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry() {
        let l = Lattice::new(1, 512, 20.0).unwrap();
        assert_eq!(l.spacing(), 0.078125);
        assert_eq!(l.n() as f64 * l.spacing(), 2.0 * l.half_extent());
        assert_eq!(l.coordinate(l.origin_offset()), 0.0);
        assert!(Lattice::new(1, 500, 20.0).is_err());
        assert!(Lattice::new(1, 512, 0.0).is_err());
    }

    #[test]
    fn indexing_round_trip_and_wrap() {
        let l = Lattice::new(3, 4, 2.0).unwrap();
        let mut idx = [0usize; 3];
        for flat in 0..l.cells() {
            l.multi_index(flat, &mut idx);
            assert_eq!(l.flat_index(&idx), flat);
        }
        let mut s = [0usize; 3];
        let f = l.flat_index(&[0, 3, 1]);
        assert_eq!(l.shifted(f, &[-1, 1, 0], &mut s), l.flat_index(&[3, 0, 1]));
        assert_eq!(l.min_image(3), -1);
        assert_eq!(l.min_image(2), 2);
        assert_eq!(l.offset_length(&[3, 0, 0]), 1.0);
    }
}
