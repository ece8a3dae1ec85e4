//! Small floating-point helpers shared across modules.

use crate::error::{domain, Result};

/// `|x|^p`, well defined for negative `x`.
#[inline]
pub fn abs_pow(x: f64, p: f64) -> f64 {
    x.abs().powf(p)
}

/// `|x|^e * sgn(x)` with `sgn(0) = 0`.
#[inline]
pub fn signed_pow(x: f64, e: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(e).copysign(x)
    }
}

/// `|x|^p` evaluated as `exp(p ln|x|)`, returning zero below an underflow floor.
#[inline]
pub fn guarded_abs_pow(x: f64, p: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-300 {
        0.0
    } else {
        (p * ax.ln()).exp()
    }
}

/// Reduce an angle to `[0, period)`.
#[inline]
pub fn reduce_angle(t: f64, period: f64) -> f64 {
    let r = t.rem_euclid(period);
    // rem_euclid can round up to `period` for tiny negative inputs
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Validate an exponent `1 < p < inf`.
pub fn check_exponent(p: f64) -> Result<()> {
    if !p.is_finite() || p <= 1.0 {
        return domain(format!("exponent must satisfy 1 < p < inf, got {p}"));
    }
    Ok(())
}

/// The conjugate exponent `p / (p - 1)`.
#[inline]
pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Relative difference `|x - y| / max(|x|, |y|, tiny)`.
#[inline]
pub fn rel_diff(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs()).max(f64::MIN_POSITIVE);
    (x - y).abs() / scale
}
