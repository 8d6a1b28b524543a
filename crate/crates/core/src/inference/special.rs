//! Chi-squared and normal distribution functions with argument checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn chi2(x: f64, d: usize) -> Result<ChiSquared> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "chi-squared argument must be non-negative, got {x}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidParameter(
            "degrees of freedom must be >= 1".into(),
        ));
    }
    ChiSquared::new(d as f64).map_err(|e| Error::InvalidParameter(e.to_string()))
}

/// CDF of the chi-squared distribution with `d` degrees of freedom.
pub fn chi_squared_cdf(x: f64, d: usize) -> Result<f64> {
    Ok(chi2(x, d)?.cdf(x).clamp(0.0, 1.0))
}

/// Upper tail `1 - cdf`, computed without cancellation.
pub fn chi_squared_sf(x: f64, d: usize) -> Result<f64> {
    Ok(chi2(x, d)?.sf(x).clamp(0.0, 1.0))
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile for `p` in `(0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "probability must lie in (0, 1), got {p}"
        )));
    }
    Ok(standard_normal().inverse_cdf(p))
}
