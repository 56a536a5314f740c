//! Closed-form spectrum and calibration of the Gaussian mechanism.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::norm_cdf;

/// Bisection bracket on `t = s / sigma`.
pub const T_MIN: f64 = 1e-8;
pub const T_MAX: f64 = 50.0;

/// Sensitivity and noise level of a Gaussian mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivitySpec {
    pub s: f64,
    pub sigma: f64,
}

impl SensitivitySpec {
    pub fn new(s: f64, sigma: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("sensitivity must be >= 0, got {s}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { s, sigma })
    }

    pub fn t(&self) -> f64 {
        self.s / self.sigma
    }

    pub fn delta(&self, eps: f64) -> f64 {
        gauss_delta(self.t(), eps)
    }
}

/// Spectrum of `N(0, sigma^2)` against `N(t sigma, sigma^2)`:
/// `Phi(-eps/t + t/2) - e^eps Phi(-eps/t - t/2)`.
pub fn gauss_delta(t: f64, eps: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return 0.0;
    }
    let u = eps / t;
    let first = norm_cdf(-u + 0.5 * t);
    let second = norm_cdf(-u - 0.5 * t);
    let scaled = if second == 0.0 { 0.0 } else { (eps + second.ln()).exp() };
    (first - scaled).clamp(0.0, 1.0)
}

/// Smallest `sigma` with `gauss_delta(s / sigma, eps) <= delta`.
pub fn calibrate_sigma(s: f64, eps: f64, delta: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("sensitivity must be > 0, got {s}")));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be >= 0, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let (f_lo, f_hi) = (gauss_delta(T_MIN, eps), gauss_delta(T_MAX, eps));
    if !(f_lo <= delta && delta <= f_hi) {
        return Err(Error::BracketError {
            target: delta,
            f_lo,
            f_hi,
        });
    }
    // largest t with delta(t) <= target; keep lo on the feasible side
    let (mut lo, mut hi) = (T_MIN, T_MAX);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gauss_delta(mid, eps) <= delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(s / lo)
}

/// Classical noise level `sqrt(2 ln(1.25 / delta)) / eps` for unit sensitivity.
pub fn dwork_sigma(eps: f64, delta: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {eps}")));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be > 0, got {delta}")));
    }
    if delta >= 1.0 {
        return Err(Error::Degenerate(format!(
            "delta = {delta} leaves no room for the classical noise bound"
        )));
    }
    Ok((2.0 * (1.25 / delta).ln()).sqrt() / eps)
}

/// Classical versus tight calibration at unit sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DworkComparison {
    pub sigma_dwork: f64,
    pub sigma_tight: f64,
    /// `sigma_tight / sigma_dwork`.
    pub reduction_ratio: f64,
    /// The delta actually achieved at `eps` by the classical sigma.
    pub tight_delta_at_dwork: f64,
}

pub fn dwork_compare(eps: f64, delta: f64) -> Result<DworkComparison> {
    let sigma_dwork = dwork_sigma(eps, delta)?;
    let sigma_tight = calibrate_sigma(1.0, eps, delta)?;
    Ok(DworkComparison {
        sigma_dwork,
        sigma_tight,
        reduction_ratio: sigma_tight / sigma_dwork,
        tight_delta_at_dwork: gauss_delta(1.0 / sigma_dwork, eps),
    })
}
