//! Generalized extreme value distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this `|ξ|` the Gumbel limit is used.
pub const GUMBEL_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    /// Location μ (mm).
    pub location: f64,
    /// Scale σ (mm).
    pub scale: f64,
    /// Shape ξ.
    pub shape: f64,
}

impl GevParams {
    pub fn new(location: f64, scale: f64, shape: f64) -> Result<Self> {
        let p = Self { location, scale, shape };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("GEV scale must be > 0, got {}", self.scale)));
        }
        if !(self.location.is_finite() && self.shape.is_finite()) {
            return Err(Error::invalid("GEV location and shape must be finite"));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.location, self.scale, self.shape]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self {
            location: a[0],
            scale: a[1],
            shape: a[2],
        }
    }

    fn is_gumbel(&self) -> bool {
        self.shape.abs() < GUMBEL_THRESHOLD
    }

    /// `−ln F(x)`, i.e. `[1 + ξz]^(−1/ξ)`, with `∞`/`0` off the support.
    fn reduced(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if self.is_gumbel() {
            return (-z).exp();
        }
        let s = self.shape * z;
        if s <= -1.0 {
            return if self.shape > 0.0 { f64::INFINITY } else { 0.0 };
        }
        (-s.ln_1p() / self.shape).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (-self.reduced(x)).exp()
    }

    /// `1 − F(x)`, accurate far in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        -(-self.reduced(x)).exp_m1()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.location) / self.scale;
        if self.is_gumbel() {
            return -self.scale.ln() - z - (-z).exp();
        }
        let s = self.shape * z;
        if s <= -1.0 {
            return f64::NEG_INFINITY;
        }
        let l = s.ln_1p();
        let ln_y = -l / self.shape;
        -self.scale.ln() - (1.0 + self.shape) * l / self.shape - ln_y.exp()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Level with non-exceedance probability `u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain {
                value: u,
                domain: "(0, 1)",
            });
        }
        let y = -u.ln();
        Ok(self.quantile_from_reduced(y))
    }

    fn quantile_from_reduced(&self, y: f64) -> f64 {
        if self.is_gumbel() {
            self.location - self.scale * y.ln()
        } else {
            self.location + self.scale / self.shape * ((-self.shape * y.ln()).exp_m1())
        }
    }

    /// Level exceeded with annual probability `1/T`.
    pub fn return_level(&self, period: f64) -> Result<f64> {
        if !(period > 1.0) {
            return Err(Error::Domain {
                value: period,
                domain: "T > 1",
            });
        }
        // −ln(1 − 1/T) without cancellation for large T
        Ok(self.quantile_from_reduced(-(-1.0 / period).ln_1p()))
    }

    /// Finite upper end of the support when `ξ < 0`.
    pub fn upper_endpoint(&self) -> Option<f64> {
        (self.shape <= -GUMBEL_THRESHOLD).then(|| self.location - self.scale / self.shape)
    }

    /// Whether `x` has positive density.
    pub fn in_support(&self, x: f64) -> bool {
        self.is_gumbel() || 1.0 + self.shape * (x - self.location) / self.scale > 0.0
    }
}

/// Sum of log densities; `−∞` when any observation is off the support.
pub fn gev_log_likelihood(maxima: &[f64], p: &GevParams) -> Result<f64> {
    p.validate()?;
    Ok(log_likelihood_unchecked(maxima, p))
}

pub(crate) fn log_likelihood_unchecked(maxima: &[f64], p: &GevParams) -> f64 {
    let mut total = 0.0;
    for &x in maxima {
        let l = p.ln_pdf(x);
        if l == f64::NEG_INFINITY {
            return l;
        }
        total += l;
    }
    total
}
