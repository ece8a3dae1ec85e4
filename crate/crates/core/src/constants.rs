//! Pichorides, Essén and Hollenbeck–Kalton–Verbitsky constants.
//!
//! `B_p` is the maximum of a `pi`-periodic trigonometric quotient. Three
//! parameterisations of that quotient are implemented independently and are
//! expected to agree:
//!
//! - [`Formula::Difference`]: angles `v - theta0` in the numerator,
//! - [`Formula::Sum`]: angles `v + theta0` in the numerator,
//! - [`Formula::Tangent`]: the rational form in `x = tan s` with `tan(pi / 2p)`.
//!
//! `theta0 = atan2(b, a)` throughout, and every quotient carries the factor
//! `(a^2 + b^2)^{p/2}` so that `B_p(la, lb) = l^p B_p(a, b)`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{abs_pow, check_exponent, conjugate_exponent, reduce_angle, signed_pow};
use crate::optimize::{maximize_periodic, polish_stationary, OptimizerConfig};

/// The real coefficients of `aI + bH`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefPair {
    pub a: f64,
    pub b: f64,
    /// Whether `a^2 + b^2 = 1` (to `1e-12`).
    pub normalized: bool,
}

impl CoefPair {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return domain(format!("coefficients must be finite, got ({a}, {b})"));
        }
        if a == 0.0 && b == 0.0 {
            return domain("coefficients a and b cannot both be zero");
        }
        let normalized = ((a * a + b * b) - 1.0).abs() <= 1e-12;
        Ok(Self { a, b, normalized })
    }

    /// `(cos theta0, sin theta0)`.
    pub fn unit(theta0: f64) -> Self {
        Self { a: theta0.cos(), b: theta0.sin(), normalized: true }
    }

    pub fn norm(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// `theta0 = atan2(b, a)`, reduced to `[0, 2 pi)`.
    pub fn theta0(&self) -> f64 {
        reduce_angle(self.b.atan2(self.a), TAU)
    }

    pub fn normalize(&self) -> Self {
        let n = self.norm();
        Self { a: self.a / n, b: self.b / n, normalized: true }
    }

    /// `b = 0`: the operator is a multiple of the identity.
    pub fn is_identity_multiple(&self) -> bool {
        self.b == 0.0
    }
}

/// Which parameterisation of the maximised quotient to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    /// Numerator angles `v - theta0`, `v - theta0 + pi/p`.
    Difference,
    /// Numerator angles `v + theta0`, `v + theta0 + pi/p`.
    Sum,
    /// Rational form in `x`, compactified by `x = tan s`.
    Tangent,
}

impl Formula {
    pub const ALL: [Formula; 3] = [Formula::Difference, Formula::Sum, Formula::Tangent];
}

/// `B_p`, its `p`-th root and the maximising angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpConstant {
    pub p: f64,
    pub coef: CoefPair,
    pub formula: Formula,
    /// The value `B_p`.
    pub b_p: f64,
    /// `B_p^{1/p}`, the operator norm of `aI + bH` on `L^p`.
    pub b_p_root: f64,
    /// Maximising angle in `[0, pi)`; `None` when `b = 0` and the
    /// maximisation is bypassed. For [`Formula::Tangent`] this is the
    /// compactified variable `s` with `x = tan s`.
    pub t0: Option<f64>,
    /// All maximisers found within the optimiser tolerance, best first.
    pub maximizers: Vec<f64>,
    /// `pi / (2p)`.
    pub gamma: f64,
}

/// `n_p = cot(pi / (2 p*))`, `p* = max(p, p/(p-1))`: the `L^p` norm of `H`.
pub fn pichorides_constant(p: f64) -> Result<f64> {
    check_exponent(p)?;
    let p_star = p.max(conjugate_exponent(p));
    Ok(1.0 / (PI / (2.0 * p_star)).tan())
}

/// `E_p = sqrt(1 + n_p^2)`.
pub fn essen_constant(p: f64) -> Result<f64> {
    let n = pichorides_constant(p)?;
    Ok((1.0 + n * n).sqrt())
}

#[inline]
fn denominator(p: f64, v: f64) -> f64 {
    let d = abs_pow(v.cos(), p) + abs_pow((v + PI / p).cos(), p);
    debug_assert!(d > 0.0, "denominator vanished at v = {v}, p = {p}");
    d
}

/// The quotient maximised by [`hkv_constant`] at angle `theta`, including
/// the factor `(a^2 + b^2)^{p/2}`.
pub fn ratio_at(p: f64, coef: &CoefPair, theta: f64) -> f64 {
    let th0 = coef.theta0();
    let num = abs_pow((theta - th0).cos(), p) + abs_pow((theta - th0 + PI / p).cos(), p);
    (coef.a * coef.a + coef.b * coef.b).powf(0.5 * p) * num / denominator(p, theta)
}

/// The quotient maximised by [`hkv_constant_shifted`].
pub fn ratio_at_shifted(p: f64, coef: &CoefPair, theta: f64) -> f64 {
    let th0 = coef.theta0();
    let num = abs_pow((theta + th0).cos(), p) + abs_pow((theta + th0 + PI / p).cos(), p);
    (coef.a * coef.a + coef.b * coef.b).powf(0.5 * p) * num / denominator(p, theta)
}

/// The rational quotient in `x`, evaluated at `x = tan s`.
///
/// Numerator and denominator are both multiplied by `|cos s|^p`, which keeps
/// the expression finite at `s = +-pi/2` (i.e. `x -> +-inf`), where it equals
/// `(|a + b tan g|^p + |a - b tan g|^p) / 2`.
pub fn ratio_at_tangent(p: f64, coef: &CoefPair, s: f64) -> f64 {
    let tg = (PI / (2.0 * p)).tan();
    let (a, b) = (coef.a, coef.b);
    let (sx, cx) = s.sin_cos();
    let base = a * sx - b * cx;
    let tilt = (b * sx + a * cx) * tg;
    let num = abs_pow(base + tilt, p) + abs_pow(base - tilt, p);
    let den = abs_pow(sx + tg * cx, p) + abs_pow(sx - tg * cx, p);
    num / den
}

/// The quotient of `formula` at `angle`.
pub fn ratio_for(formula: Formula, p: f64, coef: &CoefPair, angle: f64) -> f64 {
    match formula {
        Formula::Difference => ratio_at(p, coef, angle),
        Formula::Sum => ratio_at_shifted(p, coef, angle),
        Formula::Tangent => ratio_at_tangent(p, coef, angle),
    }
}

/// `d/du |cos u|^p`, times `u'`.
#[inline]
fn d_abs_cos_pow(p: f64, u: f64) -> f64 {
    -p * signed_pow(u.cos(), p - 1.0) * u.sin()
}

/// A quantity with the sign of the derivative of [`ratio_for`] in its angle:
/// `N' D - N D'` for the quotient `N / D`.
pub fn ratio_slope(formula: Formula, p: f64, coef: &CoefPair, angle: f64) -> f64 {
    let g = PI / p;
    match formula {
        Formula::Difference | Formula::Sum => {
            let th0 = if formula == Formula::Difference { coef.theta0() } else { -coef.theta0() };
            let (u, v) = (angle - th0, angle - th0 + g);
            let num = abs_pow(u.cos(), p) + abs_pow(v.cos(), p);
            let dnum = d_abs_cos_pow(p, u) + d_abs_cos_pow(p, v);
            let den = denominator(p, angle);
            let dden = d_abs_cos_pow(p, angle) + d_abs_cos_pow(p, angle + g);
            dnum * den - num * dden
        }
        Formula::Tangent => {
            let tg = (PI / (2.0 * p)).tan();
            let (a, b) = (coef.a, coef.b);
            let (sx, cx) = angle.sin_cos();
            let (base, dbase) = (a * sx - b * cx, a * cx + b * sx);
            let (tilt, dtilt) = ((b * sx + a * cx) * tg, (b * cx - a * sx) * tg);
            let (e1, e2) = (sx + tg * cx, sx - tg * cx);
            let (de1, de2) = (cx - tg * sx, cx + tg * sx);
            let num = abs_pow(base + tilt, p) + abs_pow(base - tilt, p);
            let dnum = p * (signed_pow(base + tilt, p - 1.0) * (dbase + dtilt) + signed_pow(base - tilt, p - 1.0) * (dbase - dtilt));
            let den = abs_pow(e1, p) + abs_pow(e2, p);
            let dden = p * (signed_pow(e1, p - 1.0) * de1 + signed_pow(e2, p - 1.0) * de2);
            dnum * den - num * dden
        }
    }
}

fn maximize(formula: Formula, p: f64, coef: &CoefPair, cfg: &OptimizerConfig) -> Result<SharpConstant> {
    check_exponent(p)?;
    let gamma = PI / (2.0 * p);
    if coef.is_identity_multiple() {
        let b_p = coef.a.abs().powf(p);
        return Ok(SharpConstant {
            p,
            coef: *coef,
            formula,
            b_p,
            b_p_root: coef.a.abs(),
            t0: None,
            maximizers: Vec::new(),
            gamma,
        });
    }
    // every quotient is pi-periodic in its angle
    let mut found = maximize_periodic(|v| ratio_for(formula, p, coef, v), 0.0, PI, cfg)?;
    // golden section only resolves the peak to about sqrt(eps); finish on the slope
    let width = PI / cfg.grid_points as f64;
    for m in &mut found {
        let x = polish_stationary(|v| ratio_slope(formula, p, coef, v), m.x, width);
        let value = ratio_for(formula, p, coef, x);
        // the peak is flat to rounding; golden section tends to pick a point that is high by noise
        if value >= m.value - 1e-12 * m.value.abs() {
            *m = crate::optimize::Maximizer { x, value };
        }
    }
    found.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.x.total_cmp(&b.x)));
    let best = found
        .first()
        .copied()
        .ok_or_else(|| Error::Degenerate("no maximiser found".into()))?;
    let t0 = reduce_angle(best.x, PI);
    let b_p = ratio_for(formula, p, coef, t0);
    let tol = 1e-9 * b_p.abs();
    let maximizers = found
        .iter()
        .filter(|m| best.value - m.value <= tol)
        .map(|m| reduce_angle(m.x, PI))
        .collect();
    Ok(SharpConstant {
        p,
        coef: *coef,
        formula,
        b_p,
        b_p_root: b_p.powf(1.0 / p),
        t0: Some(t0),
        maximizers,
        gamma,
    })
}

/// `B_p` from the difference form, the one the majorant is built on.
pub fn hkv_constant(p: f64, coef: &CoefPair, cfg: &OptimizerConfig) -> Result<SharpConstant> {
    maximize(Formula::Difference, p, coef, cfg)
}

/// `B_p` from the rational form in `x`, maximised over `s` with `x = tan s`.
pub fn hkv_constant_xform(p: f64, coef: &CoefPair, cfg: &OptimizerConfig) -> Result<SharpConstant> {
    maximize(Formula::Tangent, p, coef, cfg)
}

/// `B_p` from the sum form; its maximiser is that of the difference form
/// for the coefficients `(a, -b)`.
pub fn hkv_constant_shifted(p: f64, coef: &CoefPair, cfg: &OptimizerConfig) -> Result<SharpConstant> {
    maximize(Formula::Sum, p, coef, cfg)
}

/// `B_p` by the requested formula.
pub fn hkv_constant_by(formula: Formula, p: f64, coef: &CoefPair, cfg: &OptimizerConfig) -> Result<SharpConstant> {
    maximize(formula, p, coef, cfg)
}
