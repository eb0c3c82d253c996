//! Interval type-2 Gaussian membership functions with uncertain standard deviation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian fuzzy set whose width is only known to lie in `[sigma_lower, sigma_upper]`.
///
/// The narrower Gaussian bounds the footprint of uncertainty from below and the
/// wider one from above, so for every input `lower <= upper`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Type2GaussianMF {
    pub center: f64,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
}

impl Type2GaussianMF {
    pub fn new(center: f64, sigma_lower: f64, sigma_upper: f64) -> Result<Self> {
        let mf = Self {
            center,
            sigma_lower,
            sigma_upper,
        };
        mf.validate()?;
        Ok(mf)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::InvalidMf(format!(
                "center {} is not finite",
                self.center
            )));
        }
        if !(self.sigma_lower > 0.0 && self.sigma_lower.is_finite()) {
            return Err(Error::InvalidMf(format!(
                "sigma_lower {} must be positive",
                self.sigma_lower
            )));
        }
        if !(self.sigma_upper > 0.0 && self.sigma_upper.is_finite()) {
            return Err(Error::InvalidMf(format!(
                "sigma_upper {} must be positive",
                self.sigma_upper
            )));
        }
        if self.sigma_lower > self.sigma_upper {
            return Err(Error::InvalidMf(format!(
                "sigma_lower {} exceeds sigma_upper {}",
                self.sigma_lower, self.sigma_upper
            )));
        }
        Ok(())
    }

    /// Lower and upper membership degrees at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let d2 = (x - self.center) * (x - self.center);
        let lower = (-0.5 * d2 / (self.sigma_lower * self.sigma_lower)).exp();
        let upper = (-0.5 * d2 / (self.sigma_upper * self.sigma_upper)).exp();
        (lower, upper)
    }
}

/// Free-function form of [`Type2GaussianMF::eval`].
#[inline]
pub fn eval_mf(mf: &Type2GaussianMF, x: f64) -> (f64, f64) {
    mf.eval(x)
}
