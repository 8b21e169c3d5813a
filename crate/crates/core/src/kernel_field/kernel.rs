use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    /// `s²·exp(−‖x−y‖/ℓ)`
    Exponential,
    /// `s²·exp(−‖x−y‖²/(2ℓ²))`
    SquaredExponential,
}

/// Stationary covariance kernel with an optional nugget.
///
/// The nugget adds `σ₀²` to the covariance of a point with itself, so a
/// nugget-only kernel (`scale = 0`) yields independent values of variance
/// `σ₀²` at distinct grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceKernel {
    pub family: KernelFamily,
    /// Variance `s²` of the smooth part.
    pub scale: f64,
    /// Correlation length `ℓ`.
    pub length: f64,
    /// Nugget variance `σ₀²`.
    #[serde(default)]
    pub nugget: f64,
}

impl CovarianceKernel {
    pub fn exponential(scale: f64, length: f64) -> Self {
        Self {
            family: KernelFamily::Exponential,
            scale,
            length,
            nugget: 0.0,
        }
    }

    pub fn squared_exponential(scale: f64, length: f64) -> Self {
        Self {
            family: KernelFamily::SquaredExponential,
            scale,
            length,
            nugget: 0.0,
        }
    }

    /// Pure nugget: independent values of variance `nugget` per point.
    pub fn white(nugget: f64) -> Self {
        Self {
            family: KernelFamily::Exponential,
            scale: 0.0,
            length: 1.0,
            nugget,
        }
    }

    pub fn with_nugget(mut self, nugget: f64) -> Self {
        self.nugget = nugget;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return Err(invalid("kernel.scale", "must be finite and nonnegative"));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(invalid("kernel.length", "must be finite and positive"));
        }
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return Err(invalid("kernel.nugget", "must be finite and nonnegative"));
        }
        Ok(())
    }

    /// `C(x, y)`. Points are compared bitwise for the nugget term.
    pub fn covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let smooth = if self.scale == 0.0 {
            0.0
        } else {
            match self.family {
                KernelFamily::Exponential => self.scale * (-r2.sqrt() / self.length).exp(),
                KernelFamily::SquaredExponential => {
                    self.scale * (-r2 / (2.0 * self.length * self.length)).exp()
                }
            }
        };
        if self.nugget > 0.0 && x == y {
            smooth + self.nugget
        } else {
            smooth
        }
    }

    /// Pointwise variance `C(x, x)`.
    pub fn variance(&self) -> f64 {
        self.scale + self.nugget
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_and_decaying() {
        let k = CovarianceKernel::exponential(2.0, 0.5);
        let (x, y) = ([0.0, 0.3], [1.0, -0.2]);
        assert_eq!(k.covariance(&x, &y), k.covariance(&y, &x));
        assert_eq!(k.covariance(&x, &x), 2.0);
        assert!(k.covariance(&x, &y) < 2.0);
    }

    #[test]
    fn exponential_value() {
        let k = CovarianceKernel::exponential(1.0, 1.0);
        assert!((k.covariance(&[0.0], &[1.0]) - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn squared_exponential_value() {
        let k = CovarianceKernel::squared_exponential(1.0, 2.0);
        assert!((k.covariance(&[0.0], &[2.0]) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn nugget_only_on_diagonal() {
        let k = CovarianceKernel::white(3.0);
        assert_eq!(k.covariance(&[0.5], &[0.5]), 3.0);
        assert_eq!(k.covariance(&[0.5], &[0.75]), 0.0);
    }

    #[test]
    fn validation() {
        assert!(CovarianceKernel::exponential(-1.0, 1.0).validate().is_err());
        assert!(CovarianceKernel::exponential(1.0, 0.0).validate().is_err());
        assert!(CovarianceKernel::exponential(1.0, 1.0).with_nugget(-0.1).validate().is_err());
        assert!(CovarianceKernel::white(1.0).validate().is_ok());
    }
}
