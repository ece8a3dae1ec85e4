//! Gauss–Legendre rules, an adaptive bisecting integrator built on them, and
//! trapezoidal averages of periodic functions with node doubling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
///
/// Roots of `P_n` are found by Newton iteration from the Chebyshev-like
/// initial guesses; weights are `2 / ((1 - x^2) P_n'(x)^2)`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Settings for [`integrate_adaptive`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Absolute error target for the whole integral.
    pub tol: f64,
    /// Maximum bisection depth.
    pub max_depth: u32,
    /// Points per panel.
    pub order: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_depth: 40, order: 10 }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    /// Sum of the accepted panel-vs-halves discrepancies.
    pub error_bound: f64,
    pub evaluations: usize,
}

/// A fixed Gauss–Legendre rule that can be applied to any interval.
#[derive(Debug, Clone)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: &F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }
}

/// Adaptive integration of `f` over `[a, b]`.
///
/// Each panel is compared with the sum over its two halves (interval
/// doubling); a panel is accepted when the two agree to its share of the
/// tolerance, otherwise both halves are refined with half the tolerance.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult> {
    let rule = GaussRule::new(cfg.order);
    let mut evals = 0usize;
    let whole = rule.apply(&f, a, b);
    evals += rule.order();
    let mut stack = vec![(a, b, whole, cfg.tol, 0u32)];
    let mut value = 0.0;
    let mut error_bound = 0.0;
    let mut worst_unresolved = 0.0_f64;
    while let Some((lo, hi, est, tol, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.apply(&f, lo, mid);
        let right = rule.apply(&f, mid, hi);
        evals += 2 * rule.order();
        let refined = left + right;
        let diff = (refined - est).abs();
        if diff <= tol || diff <= 4.0 * f64::EPSILON * refined.abs() {
            value += refined;
            error_bound += diff;
        } else if depth >= cfg.max_depth {
            value += refined;
            error_bound += diff;
            worst_unresolved = worst_unresolved.max(diff);
        } else {
            stack.push((lo, mid, left, 0.5 * tol, depth + 1));
            stack.push((mid, hi, right, 0.5 * tol, depth + 1));
        }
    }
    if worst_unresolved > 0.0 && error_bound > cfg.tol {
        return Err(Error::Quadrature { achieved: error_bound, requested: cfg.tol });
    }
    Ok(QuadResult { value, error_bound, evaluations: evals })
}

/// Mean of a `2 pi`-periodic function by the trapezoidal rule, doubling the
/// node count until successive estimates agree to `rel_tol` twice in a row.
///
/// `f` receives the node angle `s in [0, 2 pi)` and may return several
/// quantities at once; convergence is required for every component.
pub fn periodic_mean<const K: usize, F>(f: F, start_nodes: usize, max_nodes: usize, rel_tol: f64) -> Result<([f64; K], usize)>
where
    F: Fn(f64) -> [f64; K],
{
    let tau = std::f64::consts::TAU;
    let mut n = start_nodes.max(4);
    let mut sum = [0.0; K];
    for j in 0..n {
        let v = f(tau * j as f64 / n as f64);
        for k in 0..K {
            sum[k] += v[k];
        }
    }
    let mut mean = sum.map(|s| s / n as f64);
    let mut last_change = f64::INFINITY;
    let mut agreed = 0;
    while n < max_nodes {
        // new nodes are the midpoints of the current ones
        for j in 0..n {
            let v = f(tau * (j as f64 + 0.5) / n as f64);
            for k in 0..K {
                sum[k] += v[k];
            }
        }
        n *= 2;
        let next = sum.map(|s| s / n as f64);
        last_change = (0..K)
            .map(|k| (next[k] - mean[k]).abs() / next[k].abs().max(1e-300))
            .fold(0.0, f64::max);
        mean = next;
        // two consecutive agreements guard against a coarse grid missing a peak
        agreed = if last_change <= rel_tol { agreed + 1 } else { 0 };
        if agreed == 2 {
            return Ok((mean, n));
        }
    }
    Err(Error::Quadrature { achieved: last_change, requested: rel_tol })
}
