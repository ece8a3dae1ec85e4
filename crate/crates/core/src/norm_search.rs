//! Lower bounds for `l^p` operator norms of convolution operators built from
//! `I`, `D`, `J` and averaging kernels, by multi-start ascent on the Rayleigh
//! quotient `||A x||_p / ||x||_p`.
//!
//! Two ways of making the operator finite are provided (see [`Model`]):
//!
//! - `Windowed`: the witness lives on `[-N, N]`, the kernel is exact out to
//!   `2N + W` and the output is read on `[-N - W, N + W]`. The computed norm
//!   is a restriction of the true output, so the quotient is a rigorous lower
//!   bound for the untruncated operator; the discarded output is bounded by
//!   `||x||_1` times the `l^p` tail of the kernel beyond `W`.
//! - `Truncated`: the kernel is cut (optionally tapered) at `N` and the full
//!   output is used; the true quotient lies within a two-sided slack.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use num_complex::Complex64;

use crate::constants::{hkv_constant, CoefPair};
use crate::error::{domain, Error, Result};
use crate::numeric::{abs_pow, check_exponent, conjugate_exponent, signed_pow};
use crate::optimize::{golden_section_max, OptimizerConfig};
use crate::quadrature::QuadConfig;
use crate::sequence_ops::{lp_norm, AveragingKernel, FftConvolver, KernelKind, KernelSpec, RealSequence, Taper, Truncation};

/// Which operator to bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OperatorDesc {
    /// `aI + bD`.
    IdentityPlusD { a: f64, b: f64 },
    /// `aI + bJ`.
    IdentityPlusJ { a: f64, b: f64 },
    /// `aK + bD` with an averaging kernel `K`.
    AveragingPlusD { a: f64, b: f64, kernel: AveragingKernel },
    /// `D` alone.
    D,
}

impl OperatorDesc {
    /// `(a, b)` of the operator.
    pub fn coefficients(&self) -> (f64, f64) {
        match *self {
            OperatorDesc::IdentityPlusD { a, b }
            | OperatorDesc::IdentityPlusJ { a, b }
            | OperatorDesc::AveragingPlusD { a, b, .. } => (a, b),
            OperatorDesc::D => (0.0, 1.0),
        }
    }

    /// `B_p^{1/p}` for the coefficients, the norm of `aI + bH`.
    pub fn target(&self, p: f64) -> Result<f64> {
        let (a, b) = self.coefficients();
        Ok(hkv_constant(p, &CoefPair::new(a, b)?, &OptimizerConfig::default())?.b_p_root)
    }

    pub fn label(&self) -> &'static str {
        match self {
            OperatorDesc::IdentityPlusD { .. } => "aI+bD",
            OperatorDesc::IdentityPlusJ { .. } => "aI+bJ",
            OperatorDesc::AveragingPlusD { .. } => "aK+bD",
            OperatorDesc::D => "D",
        }
    }
}

/// How the infinite operator is made finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    /// Witness on `[-N, N]`, exact kernel, output read on `[-N - margin, N + margin]`.
    Windowed { margin: usize },
    /// Kernel cut at `N` with the given taper; witness on `[-support, support]`.
    Truncated { taper: Taper, support: usize },
}

/// A finite section of an operator, ready for repeated application.
#[derive(Debug, Clone)]
pub struct LinearOp {
    pub desc: OperatorDesc,
    pub model: Model,
    pub n_max: usize,
    /// The witness occupies `[-in_half, in_half]`.
    pub in_half: usize,
    filter_half: usize,
    win_lo: usize,
    win_len: usize,
    conv: FftConvolver,
    /// Bound on the output discrepancy per unit `||x||_1`.
    pub tail_per_l1: f64,
    /// Whether the computed quotient never exceeds the true one.
    pub one_sided: bool,
}

/// A kernel with the weight it enters the operator with.
struct Part {
    weight: f64,
    kernel: KernelSpec,
}

fn identity_part(weight: f64) -> Part {
    Part { weight, kernel: KernelSpec::identity() }
}

/// `(sum_{|m| > w} |k_m|^p)^{1/p}` for a kernel exact on its materialised range.
fn tail_beyond(kernel: &KernelSpec, w: usize, p: f64) -> f64 {
    let hw = kernel.half_width;
    let inside: f64 = if w >= hw {
        0.0
    } else {
        (w + 1..=hw).map(|m| abs_pow(kernel.entry(m as i64), p) + abs_pow(kernel.entry(-(m as i64)), p)).sum()
    };
    let beyond = Truncation { defects: Vec::new(), ..kernel.truncation() };
    let outside = if w >= hw {
        let at_w = Truncation { half_width: w, ..beyond };
        at_w.lp(p)
    } else {
        beyond.lp(p)
    };
    (inside + outside.powf(p)).powf(1.0 / p)
}

impl LinearOp {
    pub fn build(desc: &OperatorDesc, p: f64, model: Model, n_max: usize, quad: &QuadConfig) -> Result<Self> {
        check_exponent(p)?;
        if n_max == 0 {
            return domain("n_max must be positive");
        }
        let (reach, in_half, taper) = match model {
            Model::Windowed { margin } => (2 * n_max + margin, n_max, Taper::Sharp),
            Model::Truncated { taper, support } => {
                if support == 0 {
                    return domain("witness support must be positive");
                }
                (n_max, support, taper)
            }
        };
        let hilbert = |w: f64| -> Result<Part> { Ok(Part { weight: w, kernel: KernelSpec::hilbert_d(reach, taper)? }) };
        let parts = match *desc {
            OperatorDesc::D => vec![hilbert(1.0)?],
            OperatorDesc::IdentityPlusD { a, b } => vec![identity_part(a), hilbert(b)?],
            OperatorDesc::IdentityPlusJ { a, b } => {
                vec![identity_part(a), Part { weight: b, kernel: KernelSpec::j_kernel(reach, taper, quad)? }]
            }
            OperatorDesc::AveragingPlusD { a, b, kernel } => vec![Part { weight: a, kernel: kernel.materialize()? }, hilbert(b)?],
        };
        let filter_half = parts.iter().map(|q| q.kernel.half_width).max().unwrap_or(0);
        let filter: Vec<f64> = (-(filter_half as i64)..=filter_half as i64)
            .map(|n| parts.iter().map(|q| q.weight * q.kernel.entry(n)).sum())
            .collect();
        let in_len = 2 * in_half + 1;
        let full_len = in_len + filter.len() - 1;
        let (win_lo, win_len, tail_per_l1, one_sided) = match model {
            Model::Windowed { margin } => {
                // full output starts at -(in_half + filter_half); window starts at -(in_half + margin)
                let lo = filter_half.saturating_sub(margin);
                let len = (2 * (in_half + margin) + 1).min(full_len - lo);
                let tail = parts.iter().map(|q| q.weight.abs() * tail_beyond(&q.kernel, margin, p)).sum();
                (lo, len, tail, true)
            }
            Model::Truncated { .. } => {
                let tail = parts.iter().map(|q| q.weight.abs() * q.kernel.truncation_lp(p)).sum();
                (0, full_len, tail, false)
            }
        };
        Ok(Self {
            desc: *desc,
            model,
            n_max,
            in_half,
            filter_half,
            win_lo,
            win_len,
            conv: FftConvolver::new(&filter, in_len),
            tail_per_l1,
            one_sided,
        })
    }

    pub fn input_len(&self) -> usize {
        2 * self.in_half + 1
    }

    /// Index of the first observed output entry.
    pub fn output_offset(&self) -> i64 {
        -((self.in_half + self.filter_half) as i64) + self.win_lo as i64
    }

    /// Observed output for a witness stored on `[-in_half, in_half]`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let full = self.conv.apply(x);
        full[self.win_lo..self.win_lo + self.win_len].to_vec()
    }

    /// Transpose of [`apply`](Self::apply).
    pub fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let full_len = self.input_len() + self.conv.filter_len() - 1;
        let mut buf = vec![0.0; full_len];
        buf[self.win_lo..self.win_lo + self.win_len].copy_from_slice(y);
        self.conv.apply_adjoint(&buf)
    }

    /// Embed `seq` into the witness array; it must fit in `[-in_half, in_half]`.
    pub fn embed(&self, seq: &RealSequence) -> Result<Vec<f64>> {
        let h = self.in_half as i64;
        if !seq.is_empty() && (seq.offset < -h || seq.end() > h) {
            return domain(format!("witness support [{}, {}] exceeds [-{h}, {h}]", seq.offset, seq.end()));
        }
        Ok((-h..=h).map(|n| seq.get(n)).collect())
    }
}

/// A quotient with the interval the untruncated operator's quotient lies in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioInterval {
    pub quotient: f64,
    pub lower: f64,
    pub upper: f64,
}

fn ratio_of(op: &LinearOp, x: &[f64], p: f64) -> RatioInterval {
    let nx = lp_norm(x, p);
    let q = lp_norm(&op.apply(x), p) / nx;
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    let slack = op.tail_per_l1 * l1 / nx;
    let lower = if op.one_sided { q } else { (q - slack).max(0.0) };
    RatioInterval { quotient: q, lower, upper: q + slack }
}

/// `||A x||_p / ||x||_p` for the finite section `op`, with its slack interval.
pub fn rayleigh_ratio(op: &LinearOp, seq: &RealSequence, p: f64) -> Result<RatioInterval> {
    check_exponent(p)?;
    if seq.is_zero() {
        return domain("the quotient is undefined for the zero sequence");
    }
    Ok(ratio_of(op, &op.embed(seq)?, p))
}

/// Settings for [`ascend`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub n_max: usize,
    pub model: Model,
    /// Power-profile starts `Re[e^{i phi} (n + i)^{-1/p}]` over this many phases.
    pub structured_starts: usize,
    pub random_starts: usize,
    pub max_steps: usize,
    /// Stop when the quotient gained less than `stall_tol` (relative) over this many steps.
    pub stall_steps: usize,
    pub stall_tol: f64,
    pub seed: u64,
    pub quad: QuadConfig,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            n_max: 4096,
            model: Model::Windowed { margin: 4096 },
            structured_starts: 24,
            random_starts: 4,
            max_steps: 400,
            stall_steps: 20,
            stall_tol: 1e-8,
            seed: 0,
            quad: QuadConfig::default(),
        }
    }
}

/// Best witness found and the resulting bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub op: OperatorDesc,
    pub p: f64,
    pub n_max: usize,
    pub model: Model,
    /// Quotient of the finite section at the witness.
    pub quotient: f64,
    /// Rigorous lower bound for the untruncated operator's norm.
    pub lower_bound: f64,
    /// `quotient + truncation_slack`.
    pub upper_bound: f64,
    pub truncation_slack: f64,
    /// `B_p^{1/p}`.
    pub target: f64,
    /// `lower_bound / target`.
    pub fraction: f64,
    pub witness: RealSequence,
    /// Index of the winning start (structured first, then random, then warm).
    pub start_index: usize,
    pub steps: usize,
}

/// `Re[e^{i phi} (n + i)^{-1/p}]` on `[-half, half]`.
pub fn power_profile(half: usize, p: f64, phi: f64) -> Vec<f64> {
    let rot = Complex64::from_polar(1.0, phi);
    (-(half as i64)..=half as i64)
        .map(|n| (rot * Complex64::new(n as f64, 1.0).powf(-1.0 / p)).re)
        .collect()
}

struct Climb {
    x: Vec<f64>,
    q: f64,
    steps: usize,
}

fn normalise(x: &mut [f64], p: f64) -> bool {
    let n = lp_norm(x, p);
    if !(n > 0.0) || !n.is_finite() {
        return false;
    }
    x.iter_mut().for_each(|v| *v /= n);
    true
}

fn quotient(op: &LinearOp, x: &[f64], p: f64) -> f64 {
    lp_norm(&op.apply(x), p) / lp_norm(x, p)
}

/// Nonlinear power iteration `x <- psi_{p'}(A^T psi_p(A x))` with a
/// backtracking gradient step on `log` of the quotient when it fails to improve.
fn climb(op: &LinearOp, p: f64, mut x: Vec<f64>, cfg: &AscentConfig) -> Option<Climb> {
    if !normalise(&mut x, p) {
        return None;
    }
    let pc = conjugate_exponent(p);
    let mut q = quotient(op, &x, p);
    let mut history = vec![q];
    let mut steps = 0;
    while steps < cfg.max_steps {
        steps += 1;
        let y = op.apply(&x);
        let ny = lp_norm(&y, p);
        if ny == 0.0 {
            return None;
        }
        let z = op.adjoint(&y.iter().map(|v| signed_pow(*v, p - 1.0)).collect::<Vec<_>>());
        let mut cand: Vec<f64> = z.iter().map(|v| signed_pow(*v, pc - 1.0)).collect();
        let mut accepted = normalise(&mut cand, p) && {
            let qc = quotient(op, &cand, p);
            if qc >= q {
                q = qc;
                x = cand;
                true
            } else {
                false
            }
        };
        if !accepted {
            // gradient of log ||Ax||_p - log ||x||_p at ||x||_p = 1
            let scale = ny.powf(p);
            let grad: Vec<f64> = z.iter().zip(&x).map(|(zi, xi)| zi / scale - signed_pow(*xi, p - 1.0)).collect();
            let gn = lp_norm(&grad, p);
            if gn == 0.0 || !gn.is_finite() {
                break;
            }
            let mut t = 0.1 / gn;
            for _ in 0..40 {
                let mut trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi + t * gi).collect();
                if normalise(&mut trial, p) {
                    let qt = quotient(op, &trial, p);
                    if qt > q {
                        q = qt;
                        x = trial;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
        }
        history.push(q);
        if !accepted {
            break;
        }
        let k = history.len();
        if k > cfg.stall_steps && q - history[k - 1 - cfg.stall_steps] < cfg.stall_tol * q {
            break;
        }
    }
    Some(Climb { x, q, steps })
}

fn starts(op: &LinearOp, p: f64, cfg: &AscentConfig) -> Vec<Vec<f64>> {
    let half = op.in_half;
    let mut out: Vec<Vec<f64>> = (0..cfg.structured_starts)
        .map(|k| power_profile(half, p, PI * k as f64 / cfg.structured_starts as f64))
        .collect();
    for k in 0..cfg.random_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64 + 1);
        out.push((0..op.input_len()).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    out
}

fn run_starts(op: &LinearOp, p: f64, cfg: &AscentConfig, initial: Vec<Vec<f64>>) -> Result<NormEstimate> {
    let target = op.desc.target(p)?;
    let results: Vec<(usize, Climb)> = initial
        .into_par_iter()
        .enumerate()
        .filter_map(|(i, x)| climb(op, p, x, cfg).map(|c| (i, c)))
        .collect();
    // highest quotient wins, ties to the lowest start index
    let (start_index, best) = results
        .into_iter()
        .reduce(|a, b| if b.1.q > a.1.q { b } else { a })
        .ok_or_else(|| Error::Degenerate("every start degenerated".into()))?;
    let r = ratio_of(op, &best.x, p);
    let witness = RealSequence::new(-(op.in_half as i64), best.x);
    Ok(NormEstimate {
        op: op.desc,
        p,
        n_max: op.n_max,
        model: op.model,
        quotient: r.quotient,
        lower_bound: r.lower,
        upper_bound: r.upper,
        truncation_slack: r.upper - r.quotient,
        target,
        fraction: r.lower / target,
        witness,
        start_index,
        steps: best.steps,
    })
}

/// Multi-start ascent for `op` on `l^p`; deterministic given `cfg.seed`.
pub fn ascend(desc: &OperatorDesc, p: f64, cfg: &AscentConfig) -> Result<NormEstimate> {
    let op = LinearOp::build(desc, p, cfg.model, cfg.n_max, &cfg.quad)?;
    let init = starts(&op, p, cfg);
    if init.is_empty() {
        return domain("at least one start is required");
    }
    run_starts(&op, p, cfg, init)
}

/// One row of [`conjecture_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjectureRow {
    pub n: usize,
    pub best_quotient: f64,
    pub target: f64,
    /// `target - best_quotient`.
    pub gap: f64,
}

/// Ascent over increasing `n`, each stage warm-started from the previous
/// witness (zero-padded). Under the windowed model a padded witness keeps its
/// quotient or gains, so the best quotient is nondecreasing in `n`.
pub fn conjecture_sweep(desc: &OperatorDesc, p: f64, n_list: &[usize], cfg: &AscentConfig) -> Result<Vec<ConjectureRow>> {
    let mut rows = Vec::with_capacity(n_list.len());
    let mut prev: Option<RealSequence> = None;
    for &n in n_list {
        let model = match cfg.model {
            Model::Windowed { .. } => Model::Windowed { margin: n },
            m => m,
        };
        let op = LinearOp::build(desc, p, model, n, &cfg.quad)?;
        let mut init = starts(&op, p, cfg);
        if let Some(w) = &prev {
            init.push(op.embed(w)?);
        }
        let est = run_starts(&op, p, cfg, init)?;
        rows.push(ConjectureRow { n, best_quotient: est.lower_bound, target: est.target, gap: est.target - est.lower_bound });
        prev = Some(est.witness);
    }
    Ok(rows)
}

/// Supremum of the symbol modulus and where it is attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSup {
    pub sup: f64,
    pub theta: f64,
}

/// `sup_theta |sum_n c_n e^{i n theta}|` for `c = alpha k1 + beta k2`, the
/// `l^2` norm of the finite convolution. A grid of `resolution` points
/// (rounded up to a power of two, at least the kernel length) is refined by
/// golden section around the best node.
pub fn multiplier_sup(alpha: f64, k1: &KernelSpec, beta: f64, k2: &KernelSpec, resolution: usize) -> Result<MultiplierSup> {
    let half = k1.half_width.max(k2.half_width) as i64;
    let coeffs: Vec<(i64, f64)> = (-half..=half)
        .map(|n| (n, alpha * k1.entry(n) + beta * k2.entry(n)))
        .filter(|(_, c)| *c != 0.0)
        .collect();
    if coeffs.is_empty() {
        return Ok(MultiplierSup { sup: 0.0, theta: 0.0 });
    }
    let m = resolution.max((2 * half + 1) as usize).next_power_of_two();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for &(n, c) in &coeffs {
        buf[n.rem_euclid(m as i64) as usize] += c;
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut buf);
    let (k, _) = buf
        .iter()
        .enumerate()
        .map(|(k, v)| (k, v.norm()))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let symbol = |theta: f64| -> f64 {
        coeffs.iter().map(|&(n, c)| Complex64::from_polar(c, n as f64 * theta)).sum::<Complex64>().norm()
    };
    let h = std::f64::consts::TAU / m as f64;
    let centre = k as f64 * h;
    let refined = golden_section_max(symbol, centre - h, centre + h, 1e-12, 200)?;
    let grid_best = buf[k].norm();
    Ok(if refined.value >= grid_best {
        MultiplierSup { sup: refined.value, theta: refined.x.rem_euclid(std::f64::consts::TAU) }
    } else {
        MultiplierSup { sup: grid_best, theta: centre }
    })
}

/// Whether a kernel kind is one of the `1/n`-type kernels handled by the truncated model.
pub fn is_singular(kind: KernelKind) -> bool {
    matches!(kind, KernelKind::HilbertD | KernelKind::JKernel)
}
