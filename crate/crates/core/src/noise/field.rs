use super::lattice::Lattice;
use crate::error::{Error, Result};

/// One real value per lattice cell, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    lattice: Lattice,
    values: Vec<f64>,
}

impl SpatialField {
    pub fn new(lattice: Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.cells() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, lattice has {} cells",
                values.len(),
                lattice.cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at cell {i}")));
        }
        Ok(Self { lattice, values })
    }

    pub fn constant(lattice: Lattice, value: f64) -> Self {
        Self {
            lattice,
            values: vec![value; lattice.cells()],
        }
    }

    /// Tabulates `f` at every cell center.
    pub fn from_fn(lattice: Lattice, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; lattice.d()];
        let values = (0..lattice.cells())
            .map(|i| {
                lattice.position(i, &mut x);
                f(&x)
            })
            .collect();
        Self { lattice, values }
    }

    pub(crate) fn from_parts(lattice: Lattice, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), lattice.cells());
        Self { lattice, values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `Some(c)` when every cell holds exactly `c`.
    pub fn constant_value(&self) -> Option<f64> {
        let first = *self.values.first()?;
        self.values.iter().all(|&v| v == first).then_some(first)
    }
}
