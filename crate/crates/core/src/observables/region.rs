use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{Lattice, SpatialField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    /// Euclidean ball `B_R`.
    Ball,
    /// Cube `[-R, R]^d`.
    Box,
}

impl RegionKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegionKind::Ball => "ball",
            RegionKind::Box => "box",
        }
    }
}

impl std::str::FromStr for RegionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ball" => Ok(RegionKind::Ball),
            "box" => Ok(RegionKind::Box),
            other => Err(format!("unknown region kind `{other}` (expected ball or box)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub radius: f64,
    pub center: Vec<f64>,
}

impl Region {
    pub fn new(kind: RegionKind, radius: f64, center: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("region radius must be positive, got {radius}")));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("region center must be finite".into()));
        }
        Ok(Self { kind, radius, center })
    }

    pub fn ball(d: usize, radius: f64) -> Result<Self> {
        Self::new(RegionKind::Ball, radius, vec![0.0; d])
    }

    pub fn cube(d: usize, radius: f64) -> Result<Self> {
        Self::new(RegionKind::Box, radius, vec![0.0; d])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self.kind {
            RegionKind::Ball => {
                let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum();
                r2 <= self.radius * self.radius
            }
            RegionKind::Box => x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= self.radius),
        }
    }

    /// Farthest reach of the region from the origin along any axis.
    pub fn extent(&self) -> f64 {
        self.radius + self.center.iter().fold(0.0f64, |m, c| m.max(c.abs()))
    }

    /// Requires `L >= extent + collar`.
    pub fn check_margin(&self, lattice: &Lattice, collar: f64) -> Result<()> {
        let required = self.extent() + collar;
        if lattice.half_extent() < required {
            return Err(Error::Margin {
                required,
                available: lattice.half_extent(),
            });
        }
        Ok(())
    }
}

/// Cells whose centers lie in a region, precomputed for repeated averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    cells: Vec<usize>,
    cell_volume: f64,
}

impl RegionMask {
    pub fn new(region: &Region, lattice: &Lattice) -> Result<Self> {
        if region.center.len() != lattice.d() {
            return Err(Error::InvalidParameter("region and lattice dimensions differ".into()));
        }
        let mut x = vec![0.0; lattice.d()];
        let cells: Vec<usize> = (0..lattice.cells())
            .filter(|&i| {
                lattice.position(i, &mut x);
                region.contains(&x)
            })
            .collect();
        if cells.is_empty() {
            return Err(Error::EmptyRegion { radius: region.radius });
        }
        Ok(Self {
            cells,
            cell_volume: lattice.cell_volume(),
        })
    }

    /// Interior window `|x_k| <= L - collar`.
    pub fn interior(lattice: &Lattice, collar: f64) -> Result<Self> {
        let half = lattice.half_extent() - collar;
        if half <= 0.0 {
            return Err(Error::Margin {
                required: collar,
                available: lattice.half_extent(),
            });
        }
        Self::new(&Region::cube(lattice.d(), half)?, lattice)
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// `h^d * sum_{cells} (values - mean)`.
    pub fn integrate_centered(&self, values: &[f64], mean: &[f64]) -> f64 {
        self.cell_volume * self.cells.iter().map(|&i| values[i] - mean[i]).sum::<f64>()
    }

    /// Average of `f(values)` over the mask, shifted so identical inputs give an exact result.
    pub fn mean_of(&self, values: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let first = f(values[self.cells[0]]);
        let shift: f64 = self.cells.iter().map(|&i| f(values[i]) - first).sum();
        first + shift / self.cells.len() as f64
    }
}

/// `G = \int_region [u - E u] dx` by cell-center quadrature.
pub fn region_average(field: &SpatialField, region: &Region, mean_field: &SpatialField) -> Result<f64> {
    if field.lattice() != mean_field.lattice() {
        return Err(Error::InvalidParameter("field and mean field lattices differ".into()));
    }
    let mask = RegionMask::new(region, field.lattice())?;
    Ok(mask.integrate_centered(field.values(), mean_field.values()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_fields() {
        let l = Lattice::new(1, 64, 8.0).unwrap();
        let one = SpatialField::constant(l, 1.0);
        let two = SpatialField::constant(l, 2.0);
        let r = Region::ball(1, 3.0).unwrap();
        assert_eq!(region_average(&one, &r, &one).unwrap(), 0.0);
        // h = 0.25, B_1 = [-1, 1]
        let unit = Region::ball(1, 1.0).unwrap();
        let g = region_average(&two, &unit, &one).unwrap();
        assert!((g - 2.0).abs() <= 0.25, "{g}");
    }

    #[test]
    fn disk_area_converges() {
        for (n, half) in [(64usize, 3.2), (128, 3.2)] {
            let l = Lattice::new(2, n, half).unwrap();
            let h = l.spacing();
            let one = SpatialField::constant(l, 1.0);
            let two = SpatialField::constant(l, 2.0);
            let g = region_average(&two, &Region::ball(2, 1.0).unwrap(), &one).unwrap();
            assert!((g - std::f64::consts::PI).abs() <= 3.0 * h, "h={h}: {g}");
        }
    }

    #[test]
    fn quadrature_converges_on_smooth_fields() {
        let results: Vec<(f64, f64)> = [64usize, 128, 256]
            .iter()
            .map(|&n| {
                let l = Lattice::new(1, n, 8.0).unwrap();
                let f = SpatialField::from_fn(l, |x| (0.3 * x[0]).cos() + 1.0);
                let zero = SpatialField::constant(l, 0.0);
                let g = region_average(&f, &Region::ball(1, 2.3).unwrap(), &zero).unwrap();
                (l.spacing(), g)
            })
            .collect();
        for w in results.windows(2) {
            let (h, a) = w[0];
            let (_, b) = w[1];
            assert!((a - b).abs() <= 2.0 * h, "h={h}: {a} vs {b}");
        }
    }

    #[test]
    fn empty_region_is_an_error() {
        let l = Lattice::new(1, 8, 4.0).unwrap();
        let f = SpatialField::constant(l, 1.0);
        let tiny = Region::new(RegionKind::Ball, 0.1, vec![0.5]).unwrap();
        assert!(matches!(region_average(&f, &tiny, &f), Err(Error::EmptyRegion { .. })));
    }

    #[test]
    fn margin_rule() {
        let l = Lattice::new(1, 512, 17.0).unwrap();
        let r = Region::ball(1, 16.0).unwrap();
        let err = r.check_margin(&l, 6.0 * 0.25f64.sqrt()).unwrap_err();
        assert!(matches!(err, Error::Margin { required, .. } if (required - 19.0).abs() < 1e-12));
    }
}
