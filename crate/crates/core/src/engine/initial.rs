use crate::error::{Error, Result};
use crate::noise::{Lattice, SpatialField};

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Constant(f64),
    /// Tabulated values with declared bounds `lower <= u0 <= upper`.
    Bounded {
        field: SpatialField,
        lower: f64,
        upper: f64,
    },
}

impl InitialCondition {
    pub fn bounded(field: SpatialField, lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= upper) {
            return Err(Error::InvalidParameter(format!(
                "bounds must satisfy 0 < lower <= upper, got [{lower}, {upper}]"
            )));
        }
        if let Some((i, v)) = field
            .values()
            .iter()
            .enumerate()
            .find(|(_, &v)| v < lower || v > upper)
        {
            return Err(Error::InvalidParameter(format!(
                "initial value {v} at cell {i} outside [{lower}, {upper}]"
            )));
        }
        Ok(Self::Bounded { field, lower, upper })
    }

    /// `mean + amplitude * prod_k cos(pi * modes * x_k / L)`, periodic on the torus.
    pub fn cosine(lattice: Lattice, mean: f64, amplitude: f64, modes: u32) -> Result<Self> {
        let a = amplitude.abs();
        let wave = std::f64::consts::PI * modes as f64 / lattice.half_extent();
        let field = SpatialField::from_fn(lattice, |x| {
            mean + amplitude * x.iter().map(|&xk| (wave * xk).cos()).product::<f64>()
        });
        Self::bounded(field, mean - a, mean + a)
    }

    pub fn to_field(&self, lattice: Lattice) -> Result<SpatialField> {
        match self {
            InitialCondition::Constant(c) => Ok(SpatialField::constant(lattice, *c)),
            InitialCondition::Bounded { field, .. } => {
                if *field.lattice() != lattice {
                    return Err(Error::InvalidParameter(
                        "initial condition tabulated on a different lattice".into(),
                    ));
                }
                Ok(field.clone())
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            InitialCondition::Constant(c) => (c, c),
            InitialCondition::Bounded { lower, upper, .. } => (lower, upper),
        }
    }
}
