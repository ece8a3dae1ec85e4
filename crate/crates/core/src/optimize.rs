//! One-dimensional global maximisation: a coarse uniform scan followed by
//! golden-section refinement of every competitive local-maximum bracket.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// `(sqrt(5) - 1) / 2`
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Settings for [`maximize_periodic`] and [`golden_section_max`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of points in the coarse scan.
    pub grid_points: usize,
    /// Stop refining once the bracket is narrower than this.
    pub refine_tol: f64,
    /// Iteration cap for one golden-section refinement.
    pub max_refine_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid_points: 2048,
            refine_tol: 1e-12,
            max_refine_iters: 200,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 64 {
            return domain(format!("grid_points must be >= 64, got {}", self.grid_points));
        }
        if !(self.refine_tol > 0.0) {
            return domain(format!("refine_tol must be positive, got {}", self.refine_tol));
        }
        if self.max_refine_iters == 0 {
            return domain("max_refine_iters must be positive");
        }
        Ok(())
    }
}

/// A refined local maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Maximizer {
    pub x: f64,
    pub value: f64,
}

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
///
/// Fails with [`Error::Convergence`] if the bracket is still wider than
/// `tol` after `max_iter` iterations.
pub fn golden_section_max<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<Maximizer>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while b - a > tol {
        if iter == max_iter {
            return Err(Error::Convergence { lo: a, hi: b, iterations: iter });
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        iter += 1;
        // the interior points stop moving once the bracket is a few ulps wide
        if c <= a || d >= b {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [(c, fc), (d, fd), (mid, f(mid))];
    let (x, value) = candidates
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best });
    Ok(Maximizer { x, value })
}

/// Global maximisation of a `period`-periodic function on `[start, start + period)`.
///
/// The scan is evaluated in parallel; every cyclic local maximum of the scan
/// whose value is within `1e-6` (relative) of the best scan value is refined
/// on its two neighbouring cells. The result is sorted by value (descending),
/// ties broken by the smaller abscissa, and near-duplicates are merged, so the
/// output does not depend on evaluation order.
pub fn maximize_periodic<F>(f: F, start: f64, period: f64, cfg: &OptimizerConfig) -> Result<Vec<Maximizer>>
where
    F: Fn(f64) -> f64 + Sync,
{
    cfg.validate()?;
    let n = cfg.grid_points;
    let h = period / n as f64;
    let values: Vec<f64> = (0..n).into_par_iter().map(|i| f(start + i as f64 * h)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("objective is not finite on the scan grid".into()));
    }
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let worst = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = best.abs().max(1e-300);

    // A flat objective has every grid point as a maximum; keep the first.
    if best - worst <= 1e-14 * scale {
        return Ok(vec![Maximizer { x: start, value: values[0] }]);
    }

    let threshold = best - 1e-6 * scale;
    let mut brackets: Vec<usize> = (0..n)
        .filter(|&i| {
            let prev = values[(i + n - 1) % n];
            let next = values[(i + 1) % n];
            values[i] >= prev && values[i] >= next && values[i] >= threshold
        })
        .collect();
    // keep the strongest candidates if a plateau produced many
    brackets.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    brackets.truncate(64);

    let mut found: Vec<Maximizer> = brackets
        .par_iter()
        .map(|&i| {
            let lo = start + (i as f64 - 1.0) * h;
            let hi = start + (i as f64 + 1.0) * h;
            golden_section_max(&f, lo, hi, cfg.refine_tol, cfg.max_refine_iters).map(|m| {
                let x = start + (m.x - start).rem_euclid(period);
                Maximizer { x, value: m.value }
            })
        })
        .collect::<Result<_>>()?;

    found.sort_by(|a, b| b.value.total_cmp(&a.value).then(a.x.total_cmp(&b.x)));
    let mut merged: Vec<Maximizer> = Vec::with_capacity(found.len());
    for m in found {
        let dup = merged.iter().any(|k| {
            let d = (k.x - m.x).abs();
            d.min(period - d) < 1e-6
        });
        if !dup {
            merged.push(m);
        }
    }
    Ok(merged)
}

/// Locates a sign change of `slope` from positive to negative within
/// `width` of `x` by bisection; returns `x` unchanged if there is none.
pub fn polish_stationary<F>(slope: F, x: f64, width: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (x - width, x + width);
    if !(slope(lo) > 0.0 && slope(hi) < 0.0) {
        return x;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = slope(mid);
        if s > 0.0 {
            lo = mid;
        } else if s < 0.0 {
            hi = mid;
        } else {
            return mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn golden_finds_parabola_peak() {
        let m = golden_section_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 1e-10, 200).unwrap();
        assert!((m.x - 0.3).abs() < 1e-6);
    }

    #[test]
    fn golden_reports_non_convergence() {
        let err = golden_section_max(|x| -x * x, -1.0, 1.0, 1e-12, 5).unwrap_err();
        match err {
            Error::Convergence { lo, hi, iterations } => {
                assert_eq!(iterations, 5);
                assert!(lo < hi);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn periodic_scan_picks_global_of_two_peaks() {
        // two peaks, the second slightly higher
        let f = |x: f64| (2.0 * x).cos() + 0.01 * (x - PI).cos();
        let ms = maximize_periodic(f, 0.0, 2.0 * PI, &OptimizerConfig::default()).unwrap();
        assert!((ms[0].x - PI).abs() < 1e-3, "{:?}", ms);
    }

    #[test]
    fn polish_lands_on_the_root_of_the_slope() {
        let x = polish_stationary(|x| (1.0 - x).sin(), 0.99, 0.1);
        assert!((x - 1.0).abs() <= 2.0 * f64::EPSILON);
        // no sign change: unchanged
        assert_eq!(polish_stationary(|_| 1.0, 0.5, 0.1), 0.5);
    }

    #[test]
    fn flat_objective_returns_single_point() {
        let ms = maximize_periodic(|_| 1.0, 0.0, PI, &OptimizerConfig::default()).unwrap();
        assert_eq!(ms.len(), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = OptimizerConfig::default();
        cfg.grid_points = 10;
        assert!(cfg.validate().is_err());
        cfg.grid_points = 64;
        cfg.refine_tol = 0.0;
        assert!(cfg.validate().is_err());
    }
}
