//! Brownian motion in the unit disc, killed on the circle `|z| = cap`, and
//! the martingales `X = Re f(B)`, `Y = Im f(B)` for analytic `f` with
//! `f(0) = 0`.
//!
//! Started from the origin, the exit point is uniformly distributed on the
//! circle, so every expectation at the exit time is a circle average. That
//! average is computed to near machine precision by [`circle_average`] and
//! serves as the oracle for the Monte Carlo estimates.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{essen_constant, hkv_constant, CoefPair};
use crate::error::{domain, Error, Result};
use crate::numeric::{check_exponent, guarded_abs_pow};
use crate::optimize::{maximize_periodic, OptimizerConfig};
use crate::quadrature::periodic_mean;

/// The analytic function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `sum_k c_k z^k`, `k >= 1`; `coeffs[0]` multiplies `z`.
    PowerSeries { coeffs: Vec<f64> },
    /// `((1 + z)/(1 - z))^beta - 1`, principal branch.
    MoebiusPower { beta: f64 },
}

/// `f(z) = e^{i phase} g(e^{i rotation} z)` for `g` from [`Family`], used on
/// the closed disc of radius `radius_cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSpec {
    #[serde(flatten)]
    pub family: Family,
    pub phase: f64,
    pub rotation: f64,
    pub radius_cap: f64,
}

impl AnalyticSpec {
    pub fn new(family: Family, phase: f64, rotation: f64, radius_cap: f64) -> Result<Self> {
        if !(radius_cap > 0.0 && radius_cap < 1.0) {
            return domain(format!("radius cap must lie in (0, 1), got {radius_cap}"));
        }
        match &family {
            Family::PowerSeries { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return domain("power series needs finite coefficients");
                }
            }
            Family::MoebiusPower { beta } => {
                if !(*beta > 0.0) || !beta.is_finite() {
                    return domain(format!("exponent must be positive, got {beta}"));
                }
            }
        }
        if !phase.is_finite() || !rotation.is_finite() {
            return domain("phase and rotation must be finite");
        }
        Ok(Self { family, phase, rotation, radius_cap })
    }

    /// `f(z) = z`.
    pub fn identity(radius_cap: f64) -> Result<Self> {
        Self::new(Family::PowerSeries { coeffs: vec![1.0] }, 0.0, 0.0, radius_cap)
    }

    pub fn moebius(beta: f64, phase: f64, radius_cap: f64) -> Result<Self> {
        Self::new(Family::MoebiusPower { beta }, phase, 0.0, radius_cap)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let w = z * Complex64::from_polar(1.0, self.rotation);
        let g = match &self.family {
            Family::PowerSeries { coeffs } => coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| (acc + c) * w),
            Family::MoebiusPower { beta } => ((1.0 + w) / (1.0 - w)).powf(*beta) - 1.0,
        };
        g * Complex64::from_polar(1.0, self.phase)
    }

    /// Point of the unit circle nearest to a singularity, if any: node
    /// clustering for the circle quadrature is centred there.
    fn singular_direction(&self) -> Option<f64> {
        match self.family {
            Family::MoebiusPower { .. } => Some(-self.rotation),
            Family::PowerSeries { .. } => None,
        }
    }
}

/// Exit-time averages of `|aX + bY|^p`, `|X|^p` and `(X^2 + Y^2)^{p/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleAverages {
    pub combo: f64,
    pub real_part: f64,
    pub modulus: f64,
    /// Nodes used by the final quadrature.
    pub nodes: usize,
}

impl CircleAverages {
    /// `(E|aX + bY|^p / E|X|^p)^{1/p}`.
    pub fn ratio(&self, p: f64) -> f64 {
        (self.combo / self.real_part).powf(1.0 / p)
    }

    /// `(E(X^2 + Y^2)^{p/2} / E|X|^p)^{1/p}`.
    pub fn vector_ratio(&self, p: f64) -> f64 {
        (self.modulus / self.real_part).powf(1.0 / p)
    }
}

fn moments(f: &AnalyticSpec, p: f64, coef: &CoefPair, z: Complex64) -> [f64; 3] {
    let v = f.eval(z);
    [
        guarded_abs_pow(coef.a * v.re + coef.b * v.im, p),
        guarded_abs_pow(v.re, p),
        guarded_abs_pow(v.norm(), p),
    ]
}

/// Exact exit-law expectations at `|z| = radius_cap`, by the trapezoidal
/// rule with node doubling to `1e-10` relative change.
///
/// The Moebius family has a pole-like point at the singular direction and a
/// branch zero opposite it, both at distance `1 - cap` from the circle. Nodes
/// are pulled toward both with the half-angle map `theta(s) = phi(2s)/2`,
/// where `phi` is the boundary map of `w -> (w + rho)/(1 + rho w)`; the
/// Jacobian `phi'(2s)` is a Poisson kernel and the lifted integrand stays
/// smooth and periodic.
pub fn circle_average(f: &AnalyticSpec, p: f64, coef: &CoefPair) -> Result<CircleAverages> {
    circle_average_to(f, p, coef, 1e-10)
}

/// [`circle_average`] with a caller-chosen relative stopping tolerance.
pub fn circle_average_to(f: &AnalyticSpec, p: f64, coef: &CoefPair, rel_tol: f64) -> Result<CircleAverages> {
    check_exponent(p)?;
    let cap = f.radius_cap;
    let (rho, centre) = match f.singular_direction() {
        Some(dir) => {
            let d = (1.0 - cap).sqrt();
            ((1.0 - d) / (1.0 + d), Complex64::from_polar(1.0, dir))
        }
        None => (0.0, Complex64::new(1.0, 0.0)),
    };
    let integrand = |s: f64| -> [f64; 3] {
        let w = Complex64::from_polar(1.0, 2.0 * s);
        let m = (w + rho) / (1.0 + rho * w);
        let jac = (1.0 - rho * rho) / (1.0 + rho * w).norm_sqr();
        // lift through m / w so theta(s) - s stays continuous across s = pi
        let theta = s + 0.5 * (m * w.conj()).arg();
        let vals = moments(f, p, coef, centre * Complex64::from_polar(cap, theta));
        [vals[0] * jac, vals[1] * jac, vals[2] * jac]
    };
    let (mean, nodes) = periodic_mean(integrand, 64, 1 << 24, rel_tol)?;
    if mean[1] < 1e-12 {
        return Err(Error::Degenerate(format!("E|X|^p = {:e} is too small", mean[1])));
    }
    Ok(CircleAverages { combo: mean[0], real_part: mean[1], modulus: mean[2], nodes })
}

/// Settings for [`simulate_paths`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub radius_cap: f64,
    pub seed: u64,
    /// Keep every point of every path (memory grows with `n_paths / dt`).
    pub record: bool,
    /// Safety limit on steps per path.
    pub max_steps: usize,
    /// Also kill inside a step with the probability that the Brownian
    /// bridge between the two endpoints crossed the circle. Without it the
    /// exit time is biased upward by `O(sqrt(dt))`.
    pub bridge: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, dt: 1e-4, radius_cap: 0.99, seed: 0, record: false, max_steps: 10_000_000, bridge: true }
    }
}

impl SimConfig {
    /// Whether `sqrt(dt) <= (1 - cap)/4`, the step size at which a single
    /// increment cannot jump across the annulus outside the cap.
    pub fn resolves_boundary(&self) -> bool {
        self.dt.sqrt() <= (1.0 - self.radius_cap) / 4.0
    }
}

/// A Brownian path from the origin, stopped on the cap circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscPath {
    pub dt: f64,
    /// All points if recorded, otherwise just the start and the exit point.
    pub points: Vec<Complex64>,
    pub killed: bool,
    /// On the cap circle, by interpolation along the last increment.
    pub exit_point: Complex64,
    pub exit_time: f64,
    pub steps: usize,
}

/// Simulate `n_paths` paths with Euler increments of variance `dt` per
/// component. Path `i` draws from its own ChaCha stream, so the result does
/// not depend on scheduling.
pub fn simulate_paths(cfg: &SimConfig) -> Result<Vec<DiscPath>> {
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return domain(format!("dt must be positive, got {}", cfg.dt));
    }
    if !(cfg.radius_cap > 0.0 && cfg.radius_cap < 1.0) {
        return domain(format!("radius cap must lie in (0, 1), got {}", cfg.radius_cap));
    }
    Ok((0..cfg.n_paths).into_par_iter().map(|i| simulate_one(cfg, i as u64)).collect())
}

fn simulate_one(cfg: &SimConfig, index: u64) -> DiscPath {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let sd = cfg.dt.sqrt();
    let cap2 = cfg.radius_cap * cfg.radius_cap;
    // e < 40 needs min(d0, d1) < sqrt(20 dt), so the bridge test only runs in this band
    let inner2 = (cfg.radius_cap - (20.0 * cfg.dt).sqrt()).max(0.0).powi(2);
    let mut z = Complex64::new(0.0, 0.0);
    let mut z2 = 0.0;
    let mut points = vec![z];
    let mut steps = 0;
    while steps < cfg.max_steps {
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        let next = z + Complex64::new(sd * dx, sd * dy);
        let next2 = next.norm_sqr();
        steps += 1;
        if next2 >= cap2 {
            // smallest s in (0, 1] with |z + s (next - z)| = cap
            let d = next - z;
            let a = d.norm_sqr();
            let b = 2.0 * (z.re * d.re + z.im * d.im);
            let c = z.norm_sqr() - cap2;
            let s = ((-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)).clamp(0.0, 1.0);
            let exit = z + d * s;
            // land exactly on the circle
            let exit = exit * (cfg.radius_cap / exit.norm());
            points.push(exit);
            return DiscPath {
                dt: cfg.dt,
                points,
                killed: true,
                exit_point: exit,
                exit_time: (steps as f64 - 1.0 + s) * cfg.dt,
                steps,
            };
        }
        if cfg.bridge && (z2 > inner2 || next2 > inner2) {
            // flat-barrier crossing probability exp(-2 d0 d1 / dt); negligible beyond the cutoff
            let d0 = cfg.radius_cap - z.norm();
            let d1 = cfg.radius_cap - next.norm();
            let e = 2.0 * d0 * d1 / cfg.dt;
            if e < 40.0 && rng.gen::<f64>() < (-e).exp() {
                let mid = 0.5 * (z + next);
                let exit = if mid.norm() > 0.0 { mid * (cfg.radius_cap / mid.norm()) } else { Complex64::new(cfg.radius_cap, 0.0) };
                points.push(exit);
                return DiscPath {
                    dt: cfg.dt,
                    points,
                    killed: true,
                    exit_point: exit,
                    exit_time: (steps as f64 - 0.5) * cfg.dt,
                    steps,
                };
            }
        }
        z = next;
        z2 = next2;
        if cfg.record {
            points.push(z);
        }
    }
    DiscPath { dt: cfg.dt, exit_point: z, points, killed: false, exit_time: steps as f64 * cfg.dt, steps }
}

/// Monte Carlo estimate against the exact oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub p: f64,
    pub coef: CoefPair,
    pub n_paths: usize,
    /// `(E|aX + bY|^p / E|X|^p)^{1/p}` over the exit points.
    pub ratio_estimate: f64,
    /// Bootstrap standard error of `ratio_estimate`.
    pub std_error: f64,
    pub oracle_ratio: f64,
    /// `B_p^{1/p}`.
    pub bound: f64,
    /// `(E(X^2 + Y^2)^{p/2} / E|X|^p)^{1/p}`.
    pub vector_ratio: f64,
    pub vector_std_error: f64,
    pub oracle_vector_ratio: f64,
    /// `E_p`.
    pub vector_bound: f64,
}

impl McReport {
    /// `ratio_estimate <= bound + 3 std_error`.
    pub fn within_bound(&self) -> bool {
        self.ratio_estimate <= self.bound + 3.0 * self.std_error
    }

    /// `vector_ratio <= vector_bound + 3 vector_std_error`.
    pub fn within_vector_bound(&self) -> bool {
        self.vector_ratio <= self.vector_bound + 3.0 * self.vector_std_error
    }

    /// `|ratio_estimate - oracle_ratio| <= 3 std_error + slack`.
    pub fn agrees_with_oracle(&self, slack: f64) -> bool {
        (self.ratio_estimate - self.oracle_ratio).abs() <= 3.0 * self.std_error + slack
    }
}

/// Ratio estimates from exit points, with bootstrap errors from `resamples`
/// resamples drawn with `seed`.
pub fn martingale_ratio_mc(f: &AnalyticSpec, p: f64, coef: &CoefPair, exits: &[Complex64], resamples: usize, seed: u64) -> Result<McReport> {
    check_exponent(p)?;
    if exits.is_empty() {
        return domain("no exit points");
    }
    let samples: Vec<[f64; 3]> = exits.par_iter().map(|z| moments(f, p, coef, *z)).collect();
    let n = samples.len();
    let estimate = |idx: &mut dyn Iterator<Item = usize>| -> (f64, f64) {
        let mut s = [0.0; 3];
        for i in idx {
            for k in 0..3 {
                s[k] += samples[i][k];
            }
        }
        ((s[0] / s[1]).powf(1.0 / p), (s[2] / s[1]).powf(1.0 / p))
    };
    let (ratio, vratio) = estimate(&mut (0..n));
    if !(samples.iter().map(|s| s[1]).sum::<f64>() / n as f64 >= 1e-12) {
        return Err(Error::Degenerate("E|X|^p is below 1e-12".into()));
    }
    let boot: Vec<(f64, f64)> = (0..resamples.max(2))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            estimate(&mut (0..n).map(|_| rng.gen_range(0..n)))
        })
        .collect();
    let sd = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    let std_error = sd(&mut boot.iter().map(|b| b.0));
    let vector_std_error = sd(&mut boot.iter().map(|b| b.1));
    let oracle = circle_average(f, p, coef)?;
    let bound = hkv_constant(p, coef, &OptimizerConfig::default())?.b_p_root;
    Ok(McReport {
        p,
        coef: *coef,
        n_paths: n,
        ratio_estimate: ratio,
        std_error,
        oracle_ratio: oracle.ratio(p),
        bound,
        vector_ratio: vratio,
        vector_std_error,
        oracle_vector_ratio: oracle.vector_ratio(p),
        vector_bound: essen_constant(p)?,
    })
}

/// Realised covariation `sum dX dY` and variation difference
/// `sum dX^2 - sum dY^2` of `f` along a recorded path.
pub fn quadratic_variation_checks(f: &AnalyticSpec, path: &DiscPath) -> Result<(f64, f64)> {
    if path.points.len() < 101 {
        return domain(format!("need a recorded path with at least 100 steps, got {}", path.points.len().saturating_sub(1)));
    }
    let vals: Vec<Complex64> = path.points.iter().map(|z| f.eval(*z)).collect();
    let mut cov = 0.0;
    let mut diff = 0.0;
    for w in vals.windows(2) {
        let d = w[1] - w[0];
        cov += d.re * d.im;
        diff += d.re * d.re - d.im * d.im;
    }
    Ok((cov, diff))
}

/// Kolmogorov-Smirnov distance of exit angles from the uniform law on `[0, 2 pi)`.
pub fn exit_angle_ks(paths: &[DiscPath]) -> f64 {
    let mut u: Vec<f64> = paths.iter().map(|p| p.exit_point.im.atan2(p.exit_point.re).rem_euclid(TAU) / TAU).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Settings for [`sharpness_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Exponents as fractions of `min(1, 1/p)`.
    pub beta_fractions: Vec<f64>,
    pub radius_cap: f64,
    /// Grid for the phase maximisation over `[0, pi)`.
    pub phase_grid: usize,
    /// Stopping tolerance of each circle average.
    pub rel_tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            beta_fractions: vec![0.5, 0.7, 0.8, 0.9, 0.95, 0.98, 0.99, 0.995, 0.999, 0.9997],
            radius_cap: 0.99999,
            phase_grid: 64,
            rel_tol: 1e-8,
        }
    }
}

/// One row of [`sharpness_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    /// Best phase for this exponent.
    pub phase: f64,
    pub oracle_ratio: f64,
    /// `oracle_ratio / B_p^{1/p}`.
    pub fraction: f64,
}

/// Oracle ratios over the Moebius-power family: for each exponent the phase
/// is maximised over `[0, pi)` (the ratio is invariant under `f -> -f`).
pub fn sharpness_sweep(p: f64, coef: &CoefPair, cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    check_exponent(p)?;
    let bound = hkv_constant(p, coef, &OptimizerConfig::default())?.b_p_root;
    let beta_max = (1.0 / p).min(1.0);
    let opt = OptimizerConfig { grid_points: cfg.phase_grid.max(64), refine_tol: 1e-7, max_refine_iters: 100 };
    cfg.beta_fractions
        .iter()
        .map(|&fr| {
            if !(fr > 0.0 && fr < 1.0) {
                return domain(format!("exponent fraction must lie in (0, 1), got {fr}"));
            }
            let beta = fr * beta_max;
            let ratio_at = |phase: f64| -> f64 {
                AnalyticSpec::moebius(beta, phase, cfg.radius_cap)
                    .and_then(|f| circle_average_to(&f, p, coef, cfg.rel_tol))
                    .map(|c| c.ratio(p))
                    .unwrap_or(f64::NAN)
            };
            let best = maximize_periodic(ratio_at, 0.0, PI, &opt)?;
            let m = best[0];
            Ok(SweepRow { beta, phase: m.x, oracle_ratio: m.value, fraction: m.value / bound })
        })
        .collect()
}
