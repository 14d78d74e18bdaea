use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid used to verify a declared Lipschitz constant.
const LIPSCHITZ_GRID: usize = 10_000;
const LIPSCHITZ_RANGE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Nonlinearity {
    /// `sigma(x) = x`
    Linear,
    /// `sigma(x) = a x + b`
    Affine { a: f64, b: f64 },
    /// `sigma(x) = a sin(x) + b x + c`
    SineAffine { a: f64, b: f64, c: f64 },
    /// `sigma(x) = max(x, 0)`
    ClippedLinear,
}

impl Nonlinearity {
    pub fn eval(&self, v: f64) -> f64 {
        match *self {
            Nonlinearity::Linear => v,
            Nonlinearity::Affine { a, b } => a * v + b,
            Nonlinearity::SineAffine { a, b, c } => a * v.sin() + b * v + c,
            Nonlinearity::ClippedLinear => v.max(0.0),
        }
    }

    pub fn natural_lipschitz(&self) -> f64 {
        match *self {
            Nonlinearity::Linear | Nonlinearity::ClippedLinear => 1.0,
            Nonlinearity::Affine { a, .. } => a.abs(),
            Nonlinearity::SineAffine { a, b, .. } => a.abs() + b.abs(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Linear => "linear",
            Nonlinearity::Affine { .. } => "affine",
            Nonlinearity::SineAffine { .. } => "sine-affine",
            Nonlinearity::ClippedLinear => "clipped-linear",
        }
    }

    /// Nondecreasing in its argument.
    pub fn is_monotone(&self) -> bool {
        match *self {
            Nonlinearity::Linear | Nonlinearity::ClippedLinear => true,
            Nonlinearity::Affine { a, .. } => a >= 0.0,
            Nonlinearity::SineAffine { a, b, .. } => b >= a.abs(),
        }
    }
}

/// A validated noise coefficient together with its Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    kind: Nonlinearity,
    lipschitz: f64,
    sigma_at_one: f64,
    degenerate: bool,
}

impl NonlinearitySpec {
    pub fn new(kind: Nonlinearity) -> Result<Self> {
        Self::with_lipschitz(kind, kind.natural_lipschitz())
    }

    /// Accepts `lipschitz` only if no grid slope on `[-10, 10]` exceeds it.
    pub fn with_lipschitz(kind: Nonlinearity, lipschitz: f64) -> Result<Self> {
        let params_finite = match kind {
            Nonlinearity::Affine { a, b } => a.is_finite() && b.is_finite(),
            Nonlinearity::SineAffine { a, b, c } => a.is_finite() && b.is_finite() && c.is_finite(),
            _ => true,
        };
        if !params_finite || !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nonlinearity {kind:?} with Lipschitz bound {lipschitz} is not admissible"
            )));
        }
        let step = 2.0 * LIPSCHITZ_RANGE / LIPSCHITZ_GRID as f64;
        let mut prev = kind.eval(-LIPSCHITZ_RANGE);
        let mut max_slope: f64 = 0.0;
        for i in 1..=LIPSCHITZ_GRID {
            let next = kind.eval(-LIPSCHITZ_RANGE + i as f64 * step);
            max_slope = max_slope.max((next - prev).abs() / step);
            prev = next;
        }
        if max_slope > lipschitz * (1.0 + 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "declared Lipschitz bound {lipschitz} is below observed slope {max_slope}"
            )));
        }
        let sigma_at_one = kind.eval(1.0);
        Ok(Self {
            kind,
            lipschitz,
            sigma_at_one,
            degenerate: sigma_at_one.abs() <= f64::EPSILON,
        })
    }

    #[inline]
    pub fn eval(&self, v: f64) -> f64 {
        self.kind.eval(v)
    }

    pub fn kind(&self) -> Nonlinearity {
        self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn sigma_at_one(&self) -> f64 {
        self.sigma_at_one
    }

    /// `sigma(1) = 0`: with `u0 = 1` the solution never leaves 1.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation_examples() {
        assert_eq!(NonlinearitySpec::new(Nonlinearity::Linear).unwrap().eval(1.0), 1.0);
        let shifted = NonlinearitySpec::new(Nonlinearity::Affine { a: 1.0, b: -1.0 }).unwrap();
        assert_eq!(shifted.eval(1.0), 0.0);
        assert!(shifted.is_degenerate());
        let sine = NonlinearitySpec::new(Nonlinearity::SineAffine { a: 1.0, b: 0.0, c: 2.0 }).unwrap();
        assert_eq!(sine.eval(0.0), 2.0);
        assert!(!sine.is_degenerate());
        let clip = NonlinearitySpec::new(Nonlinearity::ClippedLinear).unwrap();
        assert_eq!(clip.eval(-3.0), 0.0);
        assert_eq!(clip.eval(2.5), 2.5);
    }

    #[test]
    fn lipschitz_bound_is_checked() {
        let kind = Nonlinearity::SineAffine { a: 2.0, b: 0.5, c: 0.0 };
        assert!(NonlinearitySpec::with_lipschitz(kind, 2.5).is_ok());
        assert!(NonlinearitySpec::with_lipschitz(kind, 2.0).is_err());
        assert!(NonlinearitySpec::with_lipschitz(Nonlinearity::Linear, 0.9).is_err());
        assert!(NonlinearitySpec::with_lipschitz(Nonlinearity::Linear, f64::NAN).is_err());
    }
}
