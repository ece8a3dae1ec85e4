//! The subharmonic majorant `G` and its numerical certification.
//!
//! `G` is `p`-homogeneous and `pi`-periodic in the polar angle, so every
//! evaluation is `r^p` times an angular profile evaluated at the angle
//! reduced into the window `[t0 - eps, t0 + pi - eps)`. Inside the sector
//! `t0 < t < t0 + pi/p` the profile is a harmonic trigonometric expression;
//! elsewhere it is `B_p |cos t|^p - |cos(t - theta0)|^p`.
//!
//! Throughout, `U = -G`, so the curvature conditions read `U_xx <= 0`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{hkv_constant, ratio_at, CoefPair};
use crate::error::{domain, Result};
use crate::numeric::{abs_pow, check_exponent, reduce_angle, signed_pow};
use crate::optimize::OptimizerConfig;

/// A point `r e^{it}` in polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    /// Stored reduced to `[0, 2 pi)`.
    pub t: f64,
}

impl PolarPoint {
    pub fn new(r: f64, t: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() || !t.is_finite() {
            return domain(format!("invalid polar point ({r}, {t})"));
        }
        Ok(Self { r, t: reduce_angle(t, TAU) })
    }

    pub fn from_xy(x: f64, y: f64) -> Self {
        Self { r: x.hypot(y), t: reduce_angle(y.atan2(x), TAU) }
    }

    pub fn to_xy(&self) -> (f64, f64) {
        let (s, c) = self.t.sin_cos();
        (self.r * c, self.r * s)
    }
}

/// Frozen parameters of `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorantSpec {
    pub p: f64,
    /// Unit-normalised coefficients.
    pub coef: CoefPair,
    pub b_p: f64,
    /// Maximiser of the sharp-constant quotient, in `[0, pi)`.
    pub t0: f64,
    pub theta0: f64,
    /// `t0 + pi/p`.
    pub u0: f64,
    pub eps: f64,
}

/// Default window offset `min(pi/(4p), (pi - pi/p)/4)`.
pub fn default_eps(p: f64) -> f64 {
    (PI / (4.0 * p)).min((PI - PI / p) / 4.0)
}

impl MajorantSpec {
    /// Build `G` for `(p, coef)`; the coefficients are normalised first.
    pub fn new(p: f64, coef: &CoefPair, cfg: &OptimizerConfig) -> Result<Self> {
        check_exponent(p)?;
        if coef.is_identity_multiple() {
            return domain("the majorant is undefined for b = 0");
        }
        let unit = coef.normalize();
        let sc = hkv_constant(p, &unit, cfg)?;
        let t0 = sc.t0.expect("b != 0 always yields a maximiser");
        Self::from_parts(p, &unit, sc.b_p, t0, default_eps(p))
    }

    /// Assemble from explicit values, checking the window condition and that
    /// `b_p` is the quotient at `t0`.
    pub fn from_parts(p: f64, coef: &CoefPair, b_p: f64, t0: f64, eps: f64) -> Result<Self> {
        check_exponent(p)?;
        if coef.is_identity_multiple() {
            return domain("the majorant is undefined for b = 0");
        }
        let coef = coef.normalize();
        let t0 = reduce_angle(t0, PI);
        let u0 = t0 + PI / p;
        if !(eps > 0.0) || !(u0 < t0 + PI - eps) {
            return domain(format!("eps = {eps} does not separate the sector for p = {p}"));
        }
        let q = ratio_at(p, &coef, t0);
        if (q - b_p).abs() > 1e-10 * b_p.abs().max(1.0) {
            return domain(format!("b_p = {b_p} is not the quotient at t0 (= {q})"));
        }
        Ok(Self { p, coef, b_p, t0, theta0: coef.theta0(), u0, eps })
    }

    /// Reduce `t` modulo `pi` into `[t0 - eps, t0 + pi - eps)`.
    pub fn window_angle(&self, t: f64) -> f64 {
        let lo = self.t0 - self.eps;
        lo + reduce_angle(t - lo, PI)
    }

    /// Whether the reduced angle lies strictly inside the sector.
    pub fn in_sector(&self, t: f64) -> bool {
        let s = self.window_angle(t);
        s > self.t0 && s < self.u0
    }

    /// `B_p |cos t|^p - |cos(t - theta0)|^p`, the profile off the sector.
    pub fn outside_profile(&self, t: f64) -> f64 {
        self.b_p * abs_pow(t.cos(), self.p) - abs_pow((t - self.theta0).cos(), self.p)
    }

    /// Harmonic sector profile centred at `centre` (`t0` or `u0`).
    fn sector_profile_at(&self, centre: f64, t: f64) -> f64 {
        let p = self.p;
        let phase = p * (t - centre) + centre;
        let c0 = signed_pow(centre.cos(), p - 1.0);
        let c1 = signed_pow((centre - self.theta0).cos(), p - 1.0);
        self.b_p * c0 * phase.cos() - c1 * (phase - self.theta0).cos()
    }

    /// Sector profile in the `t0`-centred form.
    pub fn sector_profile(&self, t: f64) -> f64 {
        self.sector_profile_at(self.t0, t)
    }

    /// Sector profile in the `u0`-centred form.
    pub fn sector_profile_alt(&self, t: f64) -> f64 {
        self.sector_profile_at(self.u0, t)
    }

    /// `G(e^{it})`.
    pub fn profile(&self, t: f64) -> f64 {
        let s = self.window_angle(t);
        if s > self.t0 && s < self.u0 {
            self.sector_profile(s)
        } else {
            self.outside_profile(s)
        }
    }
}

/// `G(z)`.
pub fn eval_g(spec: &MajorantSpec, z: &PolarPoint) -> f64 {
    if z.r == 0.0 {
        return 0.0;
    }
    z.r.powf(spec.p) * spec.profile(z.t)
}

/// `G(z)` from the `u0`-centred sector form; only defined inside the sector.
pub fn eval_g_alt(spec: &MajorantSpec, z: &PolarPoint) -> Result<f64> {
    if !spec.in_sector(z.t) {
        return domain(format!("angle {} is outside the sector", z.t));
    }
    Ok(z.r.powf(spec.p) * spec.sector_profile_alt(spec.window_angle(z.t)))
}

/// `G(z)` inside the sector from the rotated power `w = (z/z0)^p z0`,
/// `z0 = e^{i t0}`, in complex arithmetic.
pub fn eval_g_rotated(spec: &MajorantSpec, z: &PolarPoint) -> Result<f64> {
    if !spec.in_sector(z.t) {
        return domain(format!("angle {} is outside the sector", z.t));
    }
    let p = spec.p;
    let s = spec.window_angle(z.t);
    let z0 = Complex64::from_polar(1.0, spec.t0);
    let zz = Complex64::from_polar(z.r, s);
    let w = (zz / z0).powf(p) * z0;
    let (a, b) = (spec.coef.a, spec.coef.b);
    let k0 = signed_pow(z0.re, p - 1.0);
    let k1 = signed_pow(a * z0.re + b * z0.im, p - 1.0);
    Ok(spec.b_p * k0 * w.re - k1 * (a * w.re + b * w.im))
}

/// `B_p |Re z|^p - |a Re z + b Im z|^p - G(z)`; exactly zero off the sector.
pub fn majorization_gap(spec: &MajorantSpec, z: &PolarPoint) -> f64 {
    if z.r == 0.0 {
        return 0.0;
    }
    let s = spec.window_angle(z.t);
    if s > spec.t0 && s < spec.u0 {
        z.r.powf(spec.p) * (spec.outside_profile(s) - spec.sector_profile(s))
    } else {
        0.0
    }
}

/// Average of `G` over `n` equally spaced points of the circle of radius
/// `rho` about `z`, minus `G(z)`.
pub fn mean_value_deficit(spec: &MajorantSpec, z: &PolarPoint, rho: f64, n: usize) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    if n < 64 {
        return domain(format!("need at least 64 samples, got {n}"));
    }
    let (x, y) = z.to_xy();
    let centre = eval_g(spec, z);
    let sum: f64 = (0..n)
        .map(|k| {
            let (s, c) = (TAU * k as f64 / n as f64).sin_cos();
            eval_g(spec, &PolarPoint::from_xy(x + rho * c, y + rho * s))
        })
        .sum();
    Ok(sum / n as f64 - centre)
}

fn sector_u_xx_at(spec: &MajorantSpec, centre: f64, z: &PolarPoint) -> f64 {
    let p = spec.p;
    let t = spec.window_angle(z.t);
    let c0 = signed_pow(centre.cos(), p - 1.0);
    let c1 = signed_pow((centre - spec.theta0).cos(), p - 1.0);
    let phase = (p - 2.0) * t - (p - 1.0) * centre;
    p * (p - 1.0) * z.r.powf(p - 2.0) * (c1 * (phase - spec.theta0).cos() - spec.b_p * c0 * phase.cos())
}

/// `U_xx` in the sector, `t0`-centred form.
pub fn u_xx_sector(spec: &MajorantSpec, z: &PolarPoint) -> Result<f64> {
    if !spec.in_sector(z.t) {
        return domain(format!("angle {} is outside the sector", z.t));
    }
    Ok(sector_u_xx_at(spec, spec.t0, z))
}

/// `U_xx` in the sector, `u0`-centred form.
pub fn u_xx_sector_alt(spec: &MajorantSpec, z: &PolarPoint) -> Result<f64> {
    if !spec.in_sector(z.t) {
        return domain(format!("angle {} is outside the sector", z.t));
    }
    Ok(sector_u_xx_at(spec, spec.u0, z))
}

/// `(U_xx, U_yy)` off the sector, where `U = |ax + by|^p - B_p |x|^p`.
///
/// The lines `x = 0` and `ax + by = 0` are excluded: one of the second
/// derivatives is singular there for `p < 2`.
pub fn u_second_derivs_outside(spec: &MajorantSpec, z: &PolarPoint) -> Result<(f64, f64)> {
    if spec.in_sector(z.t) {
        return domain(format!("angle {} is inside the sector", z.t));
    }
    let (x, y) = z.to_xy();
    let (a, b) = (spec.coef.a, spec.coef.b);
    let l = a * x + b * y;
    let floor = 1e-12 * z.r;
    if x.abs() <= floor || l.abs() <= floor {
        return domain("point lies on an excluded line x = 0 or ax + by = 0");
    }
    let p = spec.p;
    let k = p * (p - 1.0);
    let lp = abs_pow(l, p - 2.0);
    Ok((k * (lp * a * a - spec.b_p * abs_pow(x, p - 2.0)), k * lp * b * b))
}

/// `B_p |cos(t/p)|^p - |a cos(t/p) + b sin(t/p)|^p`, with `(a, b)` unit.
pub fn f_tilde(spec: &MajorantSpec, t: f64) -> f64 {
    let s = t / spec.p;
    spec.b_p * abs_pow(s.cos(), spec.p) - abs_pow(spec.coef.a * s.cos() + spec.coef.b * s.sin(), spec.p)
}

/// `f_tilde(t) + f_tilde(t + pi)`; nonnegative, with a zero minimum at `p t0`.
pub fn f_tilde_pair(spec: &MajorantSpec, t: f64) -> f64 {
    f_tilde(spec, t) + f_tilde(spec, t + PI)
}

/// Grid sizes and tolerances for [`certify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub grid_r: usize,
    pub grid_t: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Circle radii for the sub-mean-value test.
    pub rhos: Vec<f64>,
    /// Samples per circle.
    pub mean_samples: usize,
    /// Angles on the unit circle at which circle averages are taken.
    pub mean_grid_t: usize,
    /// Random off-sector points for the pointwise curvature inequality.
    pub outside_points: usize,
    /// Points of the `f_tilde_pair` sweep over one period.
    pub pair_sweep: usize,
    pub seed: u64,
    pub tol: CertifyTolerances,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            grid_r: 300,
            grid_t: 400,
            r_min: 0.1,
            r_max: 10.0,
            rhos: vec![1e-2, 1e-3],
            mean_samples: 4096,
            mean_grid_t: 360,
            outside_points: 100_000,
            pair_sweep: 10_000,
            seed: 0,
            tol: CertifyTolerances::default(),
        }
    }
}

/// Acceptance thresholds used by [`certify`].
///
/// Gaps are scaled by `1 + r^p`, curvatures by `r^{p-2}`, circle-average
/// deficits are taken on the unit circle (homogeneity carries them to other
/// radii), and quantities proportional to `B_p` are scaled by `max(1, B_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyTolerances {
    pub gap: f64,
    pub branch: f64,
    pub boundary: f64,
    pub mean_deficit: f64,
    pub u_xx: f64,
    pub identity_sum: f64,
    pub identity_slope: f64,
    pub pair_min: f64,
}

impl Default for CertifyTolerances {
    fn default() -> Self {
        Self {
            gap: 1e-9,
            branch: 1e-10,
            boundary: 1e-9,
            mean_deficit: 1e-7,
            u_xx: 1e-9,
            identity_sum: 1e-10,
            identity_slope: 1e-6,
            pair_min: 1e-10,
        }
    }
}

/// The extreme value of a checked quantity and where it occurred.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub value: f64,
    pub r: f64,
    pub t: f64,
}

impl Extreme {
    fn none(value: f64) -> Self {
        Self { value, r: f64::NAN, t: f64::NAN }
    }
}

/// Outcome of [`certify`]. Every `worst_*` field is already normalised as
/// described on [`CertifyTolerances`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub p: f64,
    pub a: f64,
    pub b: f64,
    pub b_p: f64,
    pub t0: f64,
    pub u0: f64,
    pub eps: f64,
    pub grid_points: usize,
    /// Smallest `gap / (1 + r^p)`.
    pub worst_gap: Extreme,
    /// Largest disagreement between the three sector forms, relative to `r^p (1 + B_p)`.
    pub worst_branch_mismatch: Extreme,
    /// Largest jump across the two sector rays, relative to `max(1, B_p)`.
    pub worst_boundary_jump: Extreme,
    /// Smallest circle-average deficit on the unit circle, per radius `rho`.
    pub worst_mean_deficit: Vec<(f64, Extreme)>,
    /// Largest `U_xx / r^{p-2}` in the sector.
    pub worst_u_xx: Extreme,
    /// Largest disagreement of the two sector `U_xx` forms, relative to `p(p-1)(1 + B_p)`.
    pub worst_u_xx_mismatch: Extreme,
    /// Largest `(U_xx + U_yy) / (p(p-1) r^{p-2})` off the sector (`<= 0` expected).
    pub worst_outside_curvature: Extreme,
    /// `|f_tilde(p t0) + f_tilde(p t0 + pi)| / max(1, B_p)`.
    pub identity_sum: f64,
    /// Central-difference slope of `f_tilde_pair` at `p t0`, over `max(1, B_p)`.
    pub identity_slope: f64,
    /// Minimum of `f_tilde_pair / max(1, B_p)` over one period.
    pub pair_min: Extreme,
    pub violations: Vec<String>,
    pub passed: bool,
}

fn min_by_value(a: Extreme, b: Extreme) -> Extreme {
    // ties go to the lexicographically smaller point so the reduction is order independent
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if (a.r, a.t) <= (b.r, b.t) {
                a
            } else {
                b
            }
        }
    }
}

fn max_by_value(a: Extreme, b: Extreme) -> Extreme {
    let neg = |e: Extreme| Extreme { value: -e.value, ..e };
    neg(min_by_value(neg(a), neg(b)))
}

/// Run every check on `spec` and collect the worst cases.
pub fn certify(spec: &MajorantSpec, cfg: &CertifyConfig) -> Result<CertificationReport> {
    if cfg.grid_r < 2 || cfg.grid_t < 2 || !(cfg.r_min > 0.0) || !(cfg.r_max > cfg.r_min) {
        return domain("certification grid needs >= 2 points per axis and 0 < r_min < r_max");
    }
    let p = spec.p;
    let tol = cfg.tol;
    let bscale = spec.b_p.max(1.0);
    let nr = cfg.grid_r;
    let nt = cfg.grid_t;
    let radius = |i: usize| cfg.r_min + (cfg.r_max - cfg.r_min) * i as f64 / (nr - 1) as f64;
    let angle = |j: usize| PI * j as f64 / nt as f64;

    // majorisation and sector-form agreement on the polar grid
    let (worst_gap, worst_branch) = (0..nr * nt)
        .into_par_iter()
        .map(|k| {
            let z = PolarPoint { r: radius(k / nt), t: angle(k % nt) };
            let gap = Extreme { value: majorization_gap(spec, &z) / (1.0 + z.r.powf(p)), r: z.r, t: z.t };
            let mut branch = Extreme { value: 0.0, r: z.r, t: z.t };
            if spec.in_sector(z.t) {
                let g = eval_g(spec, &z);
                let alt = eval_g_alt(spec, &z).expect("checked in sector");
                let rot = eval_g_rotated(spec, &z).expect("checked in sector");
                let scale = z.r.powf(p) * (1.0 + spec.b_p);
                branch.value = ((g - alt).abs().max((g - rot).abs())) / scale;
            }
            (gap, branch)
        })
        .reduce(
            || (Extreme::none(f64::INFINITY), Extreme::none(f64::NEG_INFINITY)),
            |x, y| (min_by_value(x.0, y.0), max_by_value(x.1, y.1)),
        );

    // continuity across the sector rays
    let mut worst_boundary = Extreme::none(0.0);
    for edge in [spec.t0, spec.u0] {
        let jump = (spec.sector_profile(edge) - spec.outside_profile(edge)).abs();
        let jump_alt = (spec.sector_profile_alt(edge) - spec.outside_profile(edge)).abs();
        let d = 1e-10;
        let sided = (spec.profile(edge + d) - spec.profile(edge - d)).abs();
        let v = jump.max(jump_alt).max(sided) / bscale;
        worst_boundary = max_by_value(worst_boundary, Extreme { value: v, r: 1.0, t: edge });
    }

    // sub-mean-value property on the unit circle, including both rays and the origin
    let mut mean_angles: Vec<f64> = (0..cfg.mean_grid_t).map(|j| PI * j as f64 / cfg.mean_grid_t as f64).collect();
    mean_angles.extend([spec.t0, spec.u0]);
    let mut worst_mean = Vec::with_capacity(cfg.rhos.len());
    for &rho in &cfg.rhos {
        let mut w = mean_angles
            .par_iter()
            .map(|&t| {
                let z = PolarPoint { r: 1.0, t };
                mean_value_deficit(spec, &z, rho, cfg.mean_samples).map(|v| Extreme { value: v, r: 1.0, t })
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(Extreme::none(f64::INFINITY), min_by_value);
        let origin = mean_value_deficit(spec, &PolarPoint { r: 0.0, t: 0.0 }, rho, cfg.mean_samples)?;
        w = min_by_value(w, Extreme { value: origin / rho.powf(p), r: 0.0, t: 0.0 });
        worst_mean.push((rho, w));
    }

    // sector curvature; U_xx scales exactly as r^{p-2}, so the unit circle suffices
    let inner = nt.max(64);
    let (worst_u_xx, worst_u_xx_mismatch) = (1..inner)
        .into_par_iter()
        .map(|j| {
            let t = spec.t0 + (spec.u0 - spec.t0) * j as f64 / inner as f64;
            let z = PolarPoint { r: 1.0, t };
            let u = u_xx_sector(spec, &z).expect("interior");
            let v = u_xx_sector_alt(spec, &z).expect("interior");
            let mism = (u - v).abs() / (p * (p - 1.0) * (1.0 + spec.b_p));
            (Extreme { value: u, r: 1.0, t }, Extreme { value: mism, r: 1.0, t })
        })
        .reduce(
            || (Extreme::none(f64::NEG_INFINITY), Extreme::none(0.0)),
            |x, y| (max_by_value(x.0, y.0), max_by_value(x.1, y.1)),
        );
    // the two rays themselves, by continuity of the closed form
    let mut worst_u_xx = worst_u_xx;
    for edge in [spec.t0, spec.u0] {
        let z = PolarPoint { r: 1.0, t: edge };
        worst_u_xx = max_by_value(worst_u_xx, Extreme { value: sector_u_xx_at(spec, spec.t0, &z), r: 1.0, t: edge });
    }

    // pointwise curvature inequality at random off-sector points
    let worst_outside = outside_curvature_sweep(spec, cfg.outside_points, cfg.seed);

    let pt0 = p * spec.t0;
    let identity_sum = f_tilde_pair(spec, pt0).abs() / bscale;
    let h = 1e-5 * (1.0 + pt0.abs());
    let identity_slope = ((f_tilde_pair(spec, pt0 + h) - f_tilde_pair(spec, pt0 - h)) / (2.0 * h)).abs() / bscale;
    let period = p * PI;
    let pair_min = (0..cfg.pair_sweep.max(1))
        .into_par_iter()
        .map(|k| {
            let t = period * k as f64 / cfg.pair_sweep.max(1) as f64;
            Extreme { value: f_tilde_pair(spec, t) / bscale, r: 1.0, t }
        })
        .reduce(|| Extreme::none(f64::INFINITY), min_by_value);

    let mut violations = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            violations.push(what);
        }
    };
    check(worst_gap.value >= -tol.gap, format!("majorization gap {:e} at r={}, t={}", worst_gap.value, worst_gap.r, worst_gap.t));
    check(worst_branch.value <= tol.branch, format!("sector forms differ by {:e} at t={}", worst_branch.value, worst_branch.t));
    check(worst_boundary.value <= tol.boundary, format!("jump {:e} across ray t={}", worst_boundary.value, worst_boundary.t));
    for (rho, w) in &worst_mean {
        check(w.value >= -tol.mean_deficit, format!("circle deficit {:e} (rho={rho}) at t={}", w.value, w.t));
    }
    check(worst_u_xx.value <= tol.u_xx, format!("sector U_xx {:e} at t={}", worst_u_xx.value, worst_u_xx.t));
    check(worst_u_xx_mismatch.value <= tol.branch, format!("sector U_xx forms differ by {:e}", worst_u_xx_mismatch.value));
    check(worst_outside.value <= tol.u_xx, format!("outside curvature {:e} at t={}", worst_outside.value, worst_outside.t));
    check(identity_sum <= tol.identity_sum, format!("f_tilde pair at p t0 is {identity_sum:e}"));
    check(identity_slope <= tol.identity_slope, format!("f_tilde pair slope at p t0 is {identity_slope:e}"));
    check(pair_min.value >= -tol.pair_min, format!("f_tilde pair minimum {:e} at t={}", pair_min.value, pair_min.t));

    Ok(CertificationReport {
        p,
        a: spec.coef.a,
        b: spec.coef.b,
        b_p: spec.b_p,
        t0: spec.t0,
        u0: spec.u0,
        eps: spec.eps,
        grid_points: nr * nt,
        worst_gap,
        worst_branch_mismatch: worst_branch,
        worst_boundary_jump: worst_boundary,
        worst_mean_deficit: worst_mean,
        worst_u_xx,
        worst_u_xx_mismatch,
        worst_outside_curvature: worst_outside,
        identity_sum,
        identity_slope,
        pair_min,
        passed: violations.is_empty(),
        violations,
    })
}

/// Largest `(U_xx + U_yy) / (p(p-1) r^{p-2})` over `n` pseudo-random unit
/// points off the sector. Nonpositive exactly when
/// `|ax + by|^{p-2} <= B_p |x|^{p-2}` there.
fn outside_curvature_sweep(spec: &MajorantSpec, n: usize, seed: u64) -> Extreme {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = spec.p * (spec.p - 1.0);
    let mut worst = Extreme::none(f64::NEG_INFINITY);
    let mut taken = 0;
    while taken < n {
        let t = spec.u0 + rng.gen::<f64>() * (spec.t0 + PI - spec.u0);
        let z = PolarPoint { r: 1.0, t: reduce_angle(t, TAU) };
        if let Ok((uxx, uyy)) = u_second_derivs_outside(spec, &z) {
            worst = max_by_value(worst, Extreme { value: (uxx + uyy) / k, r: 1.0, t: z.t });
            taken += 1;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn spec(p: f64, a: f64, b: f64) -> MajorantSpec {
        MajorantSpec::new(p, &CoefPair::new(a, b).unwrap(), &OptimizerConfig::default()).unwrap()
    }

    #[test]
    fn zero_radius() {
        let s = spec(3.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        for t in [0.0, 0.5, 2.0] {
            assert_eq!(eval_g(&s, &PolarPoint::new(0.0, t).unwrap()), 0.0);
        }
    }

    #[test]
    fn rejects_identity_multiple() {
        let c = CoefPair::new(1.0, 0.0).unwrap();
        assert!(MajorantSpec::new(3.0, &c, &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn zero_of_linear_form_outside() {
        let s = spec(3.0, 0.6, 0.8);
        // direction where a x + b y = 0
        let t = s.theta0 + PI / 2.0;
        assert!(!s.in_sector(t));
        let z = PolarPoint::new(2.0, t).unwrap();
        let (x, _) = z.to_xy();
        let want = s.b_p * x.abs().powi(3);
        assert!((eval_g(&s, &z) - want).abs() < 1e-12 * want.max(1.0));
    }

    #[test]
    fn pi_periodic_bit_equal() {
        let s = spec(1.5, 0.6, 0.8);
        for t in [0.1, 0.9, 1.7, 2.8] {
            let a = s.profile(t);
            let b = s.profile(t + PI);
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
        assert_eq!(s.window_angle(0.3), s.window_angle(0.3 + PI - PI));
    }

    #[test]
    fn p2_deficit_is_nonnegative() {
        let s = spec(2.0, 0.6, 0.8);
        let z = PolarPoint::new(1.0, s.u0 + 0.5).unwrap();
        assert!(!s.in_sector(z.t));
        let d = mean_value_deficit(&s, &z, 1e-2, 256).unwrap();
        assert!(d >= -1e-10, "{d}");
    }

    #[test]
    fn outside_curvature_p2_is_zero() {
        let s = spec(2.0, 0.6, 0.8);
        let z = PolarPoint::new(1.0, s.u0 + 0.4).unwrap();
        let (uxx, uyy) = u_second_derivs_outside(&s, &z).unwrap();
        assert!((uxx + uyy).abs() < 1e-12);
    }

    #[test]
    fn excluded_lines() {
        let s = spec(1.5, 0.6, 0.8);
        let t_line = reduce_angle(s.theta0 + PI / 2.0, TAU);
        assert!(u_second_derivs_outside(&s, &PolarPoint::new(1.0, t_line).unwrap()).is_err());
        let z_in = PolarPoint::new(1.0, 0.5 * (s.t0 + s.u0)).unwrap();
        assert!(u_second_derivs_outside(&s, &z_in).is_err());
        assert!(u_xx_sector(&s, &PolarPoint::new(1.0, s.u0 + 0.3).unwrap()).is_err());
    }

    #[test]
    fn from_parts_checks_consistency() {
        let s = spec(3.0, 0.6, 0.8);
        assert!(MajorantSpec::from_parts(3.0, &s.coef, s.b_p * 1.01, s.t0, s.eps).is_err());
        assert!(MajorantSpec::from_parts(3.0, &s.coef, s.b_p, s.t0, 0.0).is_err());
    }

    #[test]
    fn trig_product_bound() {
        for i in 0..200 {
            for j in 0..200 {
                let x = TAU * i as f64 / 200.0;
                let th = TAU * j as f64 / 200.0;
                let lhs = (x - th).cos() * (x + th).cos();
                assert!(lhs <= x.cos().powi(2) + 1e-15);
                assert!((lhs - (x.cos().powi(2) - th.sin().powi(2))).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn small_certification_passes() {
        let s = spec(3.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2);
        let cfg = CertifyConfig {
            grid_r: 20,
            grid_t: 60,
            mean_grid_t: 30,
            mean_samples: 1024,
            outside_points: 2000,
            pair_sweep: 1000,
            ..CertifyConfig::default()
        };
        let rep = certify(&s, &cfg).unwrap();
        assert!(rep.passed, "{:?}", rep.violations);
    }
}
