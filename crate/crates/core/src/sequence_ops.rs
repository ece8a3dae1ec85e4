//! Convolution kernels on the integers and the operators built from them.
//!
//! Kernels are materialised on `|n| <= N`. Each [`KernelSpec`] knows the
//! exact (infinite) kernel it approximates, so the discrepancy can be bounded
//! in `l^p` and carried along with every convolution: by Young's inequality
//! `||(k - k_N) * x||_p <= ||k - k_N||_p ||x||_1`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{abs_pow, check_exponent};
use crate::quadrature::{integrate_adaptive, QuadConfig};

/// A finitely supported two-sided real sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSequence {
    /// Index of `values[0]`.
    pub offset: i64,
    pub values: Vec<f64>,
}

impl RealSequence {
    pub fn new(offset: i64, values: Vec<f64>) -> Self {
        Self { offset, values }
    }

    /// The unit vector at index `k`.
    pub fn delta(k: i64) -> Self {
        Self { offset: k, values: vec![1.0] }
    }

    /// Samples `f(n)` for `lo <= n <= hi`.
    pub fn from_fn(lo: i64, hi: i64, f: impl Fn(i64) -> f64) -> Self {
        Self { offset: lo, values: (lo..=hi).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Last stored index.
    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    /// Entry at index `n` (zero off the stored range).
    pub fn get(&self, n: i64) -> f64 {
        let i = n - self.offset;
        if i < 0 || i >= self.values.len() as i64 {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { offset: self.offset, values: self.values.iter().map(|v| lambda * v).collect() }
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    /// `(sum |x_n|^p)^{1/p}`.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p)
    }

    /// `alpha * self + beta * other` on the union of the supports.
    pub fn axpby(alpha: f64, x: &Self, beta: f64, y: &Self) -> Self {
        if x.is_empty() {
            return y.scaled(beta);
        }
        if y.is_empty() {
            return x.scaled(alpha);
        }
        let lo = x.offset.min(y.offset);
        let hi = x.end().max(y.end());
        Self::from_fn(lo, hi, |n| alpha * x.get(n) + beta * y.get(n))
    }
}

/// `(sum |x_i|^p)^{1/p}`, computed with a max-scaling to avoid overflow.
pub fn lp_norm(x: &[f64], p: f64) -> f64 {
    let m = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = x.iter().map(|v| abs_pow(v / m, p)).sum();
    m * s.powf(1.0 / p)
}

/// What a kernel approximates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `1/(pi n)`, `n != 0`.
    HilbertD,
    /// `(1/(pi n)) (1 + I(n))`, `n != 0`, with `I` the integral of [`j_integral`].
    JKernel,
    /// The unit mass at `0`.
    Identity,
    /// `((1 - q)/(1 + q)) q^{|n|}`, summing to one over the integers.
    Geometric { q: f64 },
    /// `exp(-n^2 / (2 sigma^2))`, normalised over the integers.
    Gaussian { sigma: f64 },
    /// Explicit entries with no known continuation (tail taken as zero).
    Custom,
}

/// Smoothing applied to the materialised entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taper {
    /// Plain truncation at `|n| <= N`.
    #[default]
    Sharp,
    /// Entries multiplied by the normalised autocorrelation of a triangle of
    /// half-width `N/2`. The weights are the Fourier coefficients of a
    /// probability density on the circle, so the tapered operator is an
    /// average of modulated copies of the untapered one: its `l^2` norm (and
    /// the norm of its complexification on `l^p`) cannot increase, and the
    /// symbol has no Gibbs overshoot.
    Jackson,
}

/// A kernel materialised on `|n| <= half_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub half_width: usize,
    pub taper: Taper,
    /// Entry `n` is stored at `n + half_width`.
    pub entries: Vec<f64>,
    /// The untapered values on the same range.
    pub exact: Vec<f64>,
    /// Envelope constant `c` with `|k_n| <= c / |n|` (or the geometric
    /// analogue) beyond the truncation.
    pub tail_constant: f64,
    /// `sum_{|n| > N} |k_n|`, infinite for `1/n`-type kernels.
    pub tail_l1: f64,
}

impl KernelSpec {
    /// The discrete Hilbert kernel truncated at `n_max`.
    pub fn hilbert_d(n_max: usize, taper: Taper) -> Result<Self> {
        if n_max == 0 {
            return domain("truncation must be positive");
        }
        let exact = odd_from_positive(n_max, |n| 1.0 / (PI * n as f64));
        Ok(Self::tapered(KernelKind::HilbertD, n_max, taper, exact, 1.0 / PI, f64::INFINITY))
    }

    /// The kernel `J` truncated at `n_max`, entries by adaptive quadrature.
    pub fn j_kernel(n_max: usize, taper: Taper, quad: &QuadConfig) -> Result<Self> {
        if n_max == 0 {
            return domain("truncation must be positive");
        }
        let pos: Vec<f64> = (1..=n_max as i64).into_par_iter().map(|n| j_kernel_value(n, quad)).collect::<Result<_>>()?;
        let exact = odd_from_positive(n_max, |n| pos[n - 1]);
        // pi n J_n = 1 + I(n) decreases in n, so (1 + I(N+1)) / pi bounds the tail envelope
        let c = (1.0 + j_integral(n_max as i64 + 1, quad)?) / PI;
        Ok(Self::tapered(KernelKind::JKernel, n_max, taper, exact, c, f64::INFINITY))
    }

    /// The unit mass at `0`.
    pub fn identity() -> Self {
        Self {
            kind: KernelKind::Identity,
            half_width: 0,
            taper: Taper::Sharp,
            entries: vec![1.0],
            exact: vec![1.0],
            tail_constant: 0.0,
            tail_l1: 0.0,
        }
    }

    /// `((1-q)/(1+q)) q^{|n|}` on `|n| <= n_max`.
    pub fn geometric(q: f64, n_max: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return domain(format!("geometric ratio must lie in (0, 1), got {q}"));
        }
        let c = (1.0 - q) / (1.0 + q);
        let entries: Vec<f64> = (-(n_max as i64)..=n_max as i64).map(|n| c * q.powi(n.abs() as i32)).collect();
        let tail_l1 = 2.0 * c * q.powi(n_max as i32 + 1) / (1.0 - q);
        Ok(Self {
            kind: KernelKind::Geometric { q },
            half_width: n_max,
            taper: Taper::Sharp,
            exact: entries.clone(),
            entries,
            tail_constant: c,
            tail_l1,
        })
    }

    /// Sampled Gaussian normalised over all integers, kept on `|n| <= n_max`.
    pub fn gaussian(sigma: f64, n_max: usize) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return domain(format!("sigma must be positive, got {sigma}"));
        }
        let w = |n: i64| (-(n * n) as f64 / (2.0 * sigma * sigma)).exp();
        // terms beyond 40 sigma are below 1e-300
        let far = (40.0 * sigma).ceil() as i64 + n_max as i64;
        let total: f64 = w(0) + 2.0 * (1..=far).map(w).sum::<f64>();
        let entries: Vec<f64> = (-(n_max as i64)..=n_max as i64).map(|n| w(n) / total).collect();
        let tail_l1 = 2.0 * ((n_max as i64 + 1)..=far).map(w).sum::<f64>() / total;
        Ok(Self {
            kind: KernelKind::Gaussian { sigma },
            half_width: n_max,
            taper: Taper::Sharp,
            exact: entries.clone(),
            entries,
            tail_constant: 1.0 / total,
            tail_l1,
        })
    }

    /// Explicit entries for `n = -N..=N`; `2N + 1` values required.
    pub fn custom(entries: Vec<f64>) -> Result<Self> {
        if entries.len() % 2 == 0 {
            return domain("custom kernel needs an odd number of entries centred at 0");
        }
        Ok(Self {
            kind: KernelKind::Custom,
            half_width: entries.len() / 2,
            taper: Taper::Sharp,
            exact: entries.clone(),
            entries,
            tail_constant: 0.0,
            tail_l1: 0.0,
        })
    }

    fn tapered(kind: KernelKind, n_max: usize, taper: Taper, exact: Vec<f64>, c: f64, tail_l1: f64) -> Self {
        let entries = match taper {
            Taper::Sharp => exact.clone(),
            Taper::Jackson => {
                let w = jackson_weights(n_max);
                exact.iter().zip(&w).map(|(e, w)| e * w).collect()
            }
        };
        Self { kind, half_width: n_max, taper, entries, exact, tail_constant: c, tail_l1 }
    }

    /// Entry at `n` (zero beyond the truncation).
    pub fn entry(&self, n: i64) -> f64 {
        let i = n + self.half_width as i64;
        if i < 0 || i >= self.entries.len() as i64 {
            0.0
        } else {
            self.entries[i as usize]
        }
    }

    /// The kernel as a [`RealSequence`].
    pub fn as_sequence(&self) -> RealSequence {
        RealSequence::new(-(self.half_width as i64), self.entries.clone())
    }

    /// Whether every entry satisfies `k_{-n} = -k_n`.
    pub fn is_odd(&self) -> bool {
        let n = self.half_width;
        (0..=n).all(|i| self.entries[n + i] == -self.entries[n - i])
    }

    /// Whether the kernel is nonnegative with total mass at most one.
    pub fn is_averaging(&self) -> bool {
        self.entries.iter().all(|v| *v >= 0.0) && self.entries.iter().sum::<f64>() <= 1.0 + 1e-12
    }

    /// What is dropped or altered relative to the untruncated, untapered kernel.
    pub fn truncation(&self) -> Truncation {
        Truncation {
            kind: self.kind,
            half_width: self.half_width,
            tail_constant: self.tail_constant,
            tail_l1: self.tail_l1,
            defects: self.entries.iter().zip(&self.exact).map(|(e, x)| x - e).filter(|d| *d != 0.0).collect(),
        }
    }

    /// Upper bound on `||k - k_N||_p`; see [`Truncation::lp`].
    pub fn truncation_lp(&self, p: f64) -> f64 {
        self.truncation().lp(p)
    }
}

/// The difference between a materialised kernel and the kernel it approximates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub kind: KernelKind,
    pub half_width: usize,
    pub tail_constant: f64,
    pub tail_l1: f64,
    /// Nonzero `exact - entry` differences inside the materialised range.
    pub defects: Vec<f64>,
}

impl Truncation {
    /// Upper bound on `||k - k_N||_p` where `k` is the untruncated,
    /// untapered kernel. Zero for [`KernelKind::Custom`] and the identity.
    pub fn lp(&self, p: f64) -> f64 {
        let n = self.half_width as f64;
        let inner: f64 = self.defects.iter().map(|d| abs_pow(*d, p)).sum();
        let outer = match self.kind {
            KernelKind::HilbertD | KernelKind::JKernel => {
                // sum_{n > N} n^{-p} <= N^{1-p} / (p - 1)
                2.0 * self.tail_constant.powf(p) * n.powf(1.0 - p) / (p - 1.0)
            }
            KernelKind::Geometric { q } => {
                let r = q.powf(p);
                2.0 * self.tail_constant.powf(p) * r.powf(n + 1.0) / (1.0 - r)
            }
            // sum |k_n|^p <= (sum |k_n|)^p for p >= 1
            KernelKind::Gaussian { .. } => self.tail_l1.powf(p),
            KernelKind::Identity | KernelKind::Custom => 0.0,
        };
        (inner + outer).powf(1.0 / p)
    }
}

fn odd_from_positive(n_max: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut v = vec![0.0; 2 * n_max + 1];
    for n in 1..=n_max {
        let k = f(n);
        v[n_max + n] = k;
        v[n_max - n] = -k;
    }
    v
}

/// Weights `w_n`, `|n| <= n_max`, `w_0 = 1`: the autocorrelation of the
/// triangle `M + 1 - |k|`, `|k| <= M = n_max / 2`, normalised at the origin.
pub fn jackson_weights(n_max: usize) -> Vec<f64> {
    let m = (n_max / 2) as i64;
    let tri: Vec<f64> = (-m..=m).map(|k| (m + 1 - k.abs()) as f64).collect();
    let norm: f64 = tri.iter().map(|t| t * t).sum();
    let len = tri.len() as i64;
    let mut w = vec![0.0; 2 * n_max + 1];
    for lag in 0..=(2 * m).min(n_max as i64) {
        let s: f64 = (0..len - lag).map(|i| tri[i as usize] * tri[(i + lag) as usize]).sum();
        w[n_max + lag as usize] = s / norm;
        w[n_max - lag as usize] = s / norm;
    }
    w
}

/// `y -> (y / sinh y)^2`, by its Taylor expansion near zero.
fn y_over_sinh_sq(y: f64) -> f64 {
    if y < 1e-2 {
        let y2 = y * y;
        let d = 1.0 + y2 / 6.0 + y2 * y2 / 120.0 + y2 * y2 * y2 / 5040.0;
        1.0 / (d * d)
    } else {
        let r = y / y.sinh();
        r * r
    }
}

/// `I(n) = int_0^inf 2 y^3 / ((y^2 + pi^2 n^2) sinh^2 y) dy`.
///
/// Integrated on `[0, 1]` and `[1, 40]`; the discarded tail is below `1e-30`.
pub fn j_integral(n: i64, quad: &QuadConfig) -> Result<f64> {
    if n == 0 {
        return domain("the J integral is only used for n != 0");
    }
    let c = PI * PI * (n * n) as f64;
    let f = |y: f64| 2.0 * y * y_over_sinh_sq(y) / (y * y + c);
    let half = QuadConfig { tol: 0.5 * quad.tol, ..*quad };
    let a = integrate_adaptive(f, 0.0, 1.0, &half)?;
    let b = integrate_adaptive(f, 1.0, 40.0, &half)?;
    let err = a.error_bound + b.error_bound;
    if err > quad.tol {
        return Err(Error::Quadrature { achieved: err, requested: quad.tol });
    }
    Ok(a.value + b.value)
}

/// `J_n = (1 + I(|n|)) / (pi n)` for `n != 0`.
pub fn j_kernel_value(n: i64, quad: &QuadConfig) -> Result<f64> {
    if n == 0 {
        return domain("J_0 is zero by definition; j_kernel_value rejects n = 0");
    }
    Ok((1.0 + j_integral(n.abs(), quad)?) / (PI * n as f64))
}

/// Linear convolution of two finite arrays (direct for short inputs, FFT otherwise).
pub fn linear_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len().min(b.len()) <= 64 || a.len() * b.len() <= 1 << 16 {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            if *x == 0.0 {
                continue;
            }
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        return out;
    }
    FftConvolver::new(b, a.len()).apply(a)
}

/// Repeated linear convolution with a fixed filter through a cached spectrum.
#[derive(Clone)]
pub struct FftConvolver {
    filter_len: usize,
    max_input: usize,
    size: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FftConvolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftConvolver").field("filter_len", &self.filter_len).field("size", &self.size).finish()
    }
}

impl FftConvolver {
    /// Prepare for inputs of length at most `max_input`.
    pub fn new(filter: &[f64], max_input: usize) -> Self {
        let size = (filter.len() + max_input).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let mut spectrum: Vec<Complex64> = filter.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        spectrum.resize(size, Complex64::new(0.0, 0.0));
        forward.process(&mut spectrum);
        Self { filter_len: filter.len(), max_input, size, spectrum, forward, inverse }
    }

    pub fn filter_len(&self) -> usize {
        self.filter_len
    }

    /// Full linear convolution, length `input.len() + filter_len - 1`.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        self.run(input, false)
    }

    /// Cross-correlation with the filter: the adjoint of [`apply`](Self::apply)
    /// restricted to inputs of the full output length. Entry `i` is
    /// `sum_j filter[j] input[i + j]`, for `i < input.len() - filter_len + 1`.
    pub fn apply_adjoint(&self, input: &[f64]) -> Vec<f64> {
        let full = self.run(input, true);
        let out_len = input.len() + 1 - self.filter_len;
        full[self.filter_len - 1..self.filter_len - 1 + out_len].to_vec()
    }

    fn run(&self, input: &[f64], conjugate: bool) -> Vec<f64> {
        assert!(input.len() <= self.max_input + self.filter_len, "input longer than planned");
        let size = self.size;
        let out_len = input.len() + self.filter_len - 1;
        if conjugate {
            assert!(input.len() <= size, "input longer than transform");
        } else {
            assert!(out_len <= size, "output longer than transform");
        }
        let mut buf: Vec<Complex64> = input.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        buf.resize(size, Complex64::new(0.0, 0.0));
        self.forward.process(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= if conjugate { s.conj() } else { *s };
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / size as f64;
        if conjugate {
            // circular correlation: lag j sits at index (size - j) mod size
            let mut out = vec![0.0; out_len];
            for (k, o) in out.iter_mut().enumerate() {
                let lag = k as i64 - (self.filter_len as i64 - 1);
                *o = buf[lag.rem_euclid(size as i64) as usize].re * scale;
            }
            out
        } else {
            buf[..out_len].iter().map(|c| c.re * scale).collect()
        }
    }
}

/// A convolution result together with what is needed to bound its
/// truncation error in any `l^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convolution {
    pub output: RealSequence,
    /// `||x||_1` of the input.
    pub input_l1: f64,
    /// `(weight, truncation)` pairs contributing to the slack.
    pub tails: Vec<(f64, Truncation)>,
}

impl Convolution {
    /// Upper bound on `||(exact operator) x - output||_p`.
    pub fn slack(&self, p: f64) -> f64 {
        self.input_l1 * self.tails.iter().map(|(w, t)| w.abs() * t.lp(p)).sum::<f64>()
    }
}

/// `kernel * seq` with the truncated kernel.
pub fn convolve(kernel: &KernelSpec, seq: &RealSequence) -> Convolution {
    let values = linear_convolve(&seq.values, &kernel.entries);
    Convolution {
        output: RealSequence::new(seq.offset - kernel.half_width as i64, values),
        input_l1: seq.l1_norm(),
        tails: vec![(1.0, kernel.truncation())],
    }
}

/// `alpha (k1 * seq) + beta (k2 * seq)`.
pub fn combined_apply(alpha: f64, k1: &KernelSpec, beta: f64, k2: &KernelSpec, seq: &RealSequence) -> Convolution {
    let c1 = convolve(k1, seq);
    let c2 = convolve(k2, seq);
    let output = RealSequence::axpby(alpha, &c1.output, beta, &c2.output);
    let mut tails = Vec::new();
    for (w, c) in [(alpha, c1), (beta, c2)] {
        for (v, t) in c.tails {
            tails.push((w * v, t));
        }
    }
    Convolution { output, input_l1: seq.l1_norm(), tails }
}

/// A real function sampled at `x_i = (offset_index + i) * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub step: f64,
    pub offset_index: i64,
    pub samples: Vec<f64>,
}

impl GridFunction {
    pub fn new(step: f64, offset_index: i64, samples: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return domain(format!("grid step must be positive, got {step}"));
        }
        Ok(Self { step, offset_index, samples })
    }

    /// Samples `f` on the nodes in `[lo, hi]`.
    pub fn from_fn(step: f64, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return domain("need step > 0 and lo <= hi");
        }
        let i0 = (lo / step).ceil() as i64;
        let i1 = (hi / step).floor() as i64;
        Self::new(step, i0, (i0..=i1).map(|i| f(i as f64 * step)).collect())
    }

    pub fn node(&self, i: usize) -> f64 {
        (self.offset_index + i as i64) as f64 * self.step
    }

    /// Sample at global node index `k` (zero off the stored range).
    pub fn at_index(&self, k: i64) -> f64 {
        let i = k - self.offset_index;
        if i < 0 || i >= self.samples.len() as i64 {
            0.0
        } else {
            self.samples[i as usize]
        }
    }

    /// `step^{1/p} (sum |f_i|^p)^{1/p}`, the Riemann-sum `L^p` norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.step.powf(1.0 / p) * lp_norm(&self.samples, p)
    }

    /// Difference `self - other` on a common grid (same step required).
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if (self.step - other.step).abs() > 1e-12 * self.step {
            return domain("grid steps differ");
        }
        let lo = self.offset_index.min(other.offset_index);
        let hi = (self.offset_index + self.samples.len() as i64).max(other.offset_index + other.samples.len() as i64);
        Self::new(self.step, lo, (lo..hi).map(|k| self.at_index(k) - other.at_index(k)).collect())
    }
}

/// `(T_eps f)(x) = eps^{1/p} f(eps x)`.
///
/// Node `i h` of `f` becomes node `i h / eps`, so the result is exact on the
/// rescaled grid and the `L^p` norm is preserved identically.
pub fn dilate(f: &GridFunction, epsilon: f64, p: f64) -> Result<GridFunction> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return domain(format!("dilation factor must be positive, got {epsilon}"));
    }
    check_exponent(p)?;
    let amp = epsilon.powf(1.0 / p);
    GridFunction::new(f.step / epsilon, f.offset_index, f.samples.iter().map(|v| amp * v).collect())
}

/// Nodes per unit length, if the step divides one.
fn nodes_per_unit(step: f64) -> Result<usize> {
    let s = 1.0 / step;
    let r = s.round();
    if r < 1.0 || (s - r).abs() > 1e-9 * r {
        return domain(format!("grid step {step} does not divide 1"));
    }
    Ok(r as usize)
}

/// `(M f)(x) = sum_{|m| <= N} k_m f(x - m)` on the grid of `f`.
///
/// Odd kernels are summed in symmetric pairs `k_m (f(x - m) - f(x + m))`,
/// the principal-value ordering.
pub fn grid_convolve_integer_shifts(kernel: &KernelSpec, f: &GridFunction) -> Result<GridFunction> {
    let s = nodes_per_unit(f.step)? as i64;
    let n = kernel.half_width as i64;
    let lo = f.offset_index - n * s;
    let len = f.samples.len() as i64 + 2 * n * s;
    let odd = kernel.is_odd();
    let samples: Vec<f64> = (0..len)
        .into_par_iter()
        .map(|i| {
            let k = lo + i;
            if odd {
                (1..=n).map(|m| kernel.entry(m) * (f.at_index(k - m * s) - f.at_index(k + m * s))).sum()
            } else {
                (-n..=n).map(|m| kernel.entry(m) * f.at_index(k - m * s)).sum()
            }
        })
        .collect();
    GridFunction::new(f.step, lo, samples)
}

/// `exp(-1 / (1 - (x/R)^2))` on `|x| < R`, zero elsewhere.
pub fn bump(x: f64, radius: f64) -> f64 {
    let u = x / radius;
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Continuous Hilbert transform `(1/pi) p.v. int f(x - t) / t dt` of a
/// function supported in `[-support, support]`, folded to
/// `(1/pi) int_0^L (f(x - t) - f(x + t)) / t dt`.
pub fn hilbert_transform_pv(f: impl Fn(f64) -> f64, x: f64, support: f64, quad: &QuadConfig) -> Result<f64> {
    let upper = support + x.abs();
    let g = |t: f64| if t == 0.0 { 0.0 } else { (f(x - t) - f(x + t)) / t };
    Ok(integrate_adaptive(g, 0.0, upper, quad)?.value / PI)
}

/// Test profile for the dilation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    /// [`bump`] with the given radius.
    Bump { radius: f64 },
    /// `exp(-x^2/2)`, cut off where it falls below `1e-17`.
    Gauss,
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Bump { radius } => bump(x, radius),
            Profile::Gauss => (-0.5 * x * x).exp(),
        }
    }

    /// Half-width of the numerical support.
    pub fn support(&self) -> f64 {
        match *self {
            Profile::Bump { radius } => radius,
            Profile::Gauss => 9.0,
        }
    }
}

/// Averaging kernel for [`dilation_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AveragingKernel {
    Geometric { q: f64 },
    Gaussian { sigma: f64 },
    Delta,
}

impl AveragingKernel {
    /// Materialise with a truncation whose dropped mass is below `1e-16`.
    pub fn materialize(&self) -> Result<KernelSpec> {
        match *self {
            AveragingKernel::Geometric { q } => {
                if !(q > 0.0 && q < 1.0) {
                    return domain(format!("geometric ratio must lie in (0, 1), got {q}"));
                }
                let n = ((1e-17f64).ln() / q.ln()).ceil().max(1.0) as usize;
                KernelSpec::geometric(q, n)
            }
            AveragingKernel::Gaussian { sigma } => KernelSpec::gaussian(sigma, (9.0 * sigma).ceil().max(1.0) as usize),
            AveragingKernel::Delta => Ok(KernelSpec::identity()),
        }
    }
}

/// Settings for [`dilation_limit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationConfig {
    pub profile: Profile,
    pub kernel: AveragingKernel,
    /// Grid step of the undilated profile; `step / eps` must divide one.
    pub step: f64,
    pub p: f64,
    pub eps_list: Vec<f64>,
}

impl Default for DilationConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Bump { radius: 4.0 },
            kernel: AveragingKernel::Geometric { q: 0.5 },
            step: 1.0 / 256.0,
            p: 2.0,
            eps_list: vec![1.0, 0.5, 0.25, 0.125],
        }
    }
}

/// One row of [`dilation_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DilationRow {
    pub eps: f64,
    /// `||T_{1/eps} M T_eps f - f||_p`.
    pub deviation: f64,
    /// `deviation / ||f||_p`.
    pub relative: f64,
}

/// `T_{1/eps} M T_eps f - f` for each `eps`, where `M` convolves over
/// integer shifts with the averaging kernel.
pub fn dilation_limit(cfg: &DilationConfig) -> Result<Vec<DilationRow>> {
    check_exponent(cfg.p)?;
    let kernel = cfg.kernel.materialize()?;
    let r = cfg.profile.support();
    let f = GridFunction::from_fn(cfg.step, -r, r, |x| cfg.profile.eval(x))?;
    let base = f.lp_norm(cfg.p);
    cfg.eps_list
        .iter()
        .map(|&eps| {
            let lifted = dilate(&f, eps, cfg.p)?;
            let averaged = grid_convolve_integer_shifts(&kernel, &lifted)?;
            let back = dilate(&averaged, 1.0 / eps, cfg.p)?;
            // undo the step drift from the two divisions so the grids align exactly
            let back = GridFunction::new(f.step, back.offset_index, back.samples)?;
            let deviation = back.sub(&f)?.lp_norm(cfg.p);
            Ok(DilationRow { eps, deviation, relative: deviation / base })
        })
        .collect()
}

/// One row of [`hilbert_dilation_limit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HilbertRow {
    pub eps: f64,
    /// `||T_{1/eps} M_D T_eps f - H f||_p` on the comparison window.
    pub deviation: f64,
    pub relative: f64,
}

/// Compare `T_{1/eps} M_D T_eps f` with the continuous Hilbert transform of
/// `f` on `|x| <= 2R`. `M_D` is truncated at `3R/eps`, which is exact on that
/// window for a profile supported in `[-R, R]`.
pub fn hilbert_dilation_limit(cfg: &DilationConfig, quad: &QuadConfig) -> Result<Vec<HilbertRow>> {
    check_exponent(cfg.p)?;
    let r = cfg.profile.support();
    let f = GridFunction::from_fn(cfg.step, -r, r, |x| cfg.profile.eval(x))?;
    let window = 2.0 * r;
    let w0 = (-window / cfg.step).ceil() as i64;
    let w1 = (window / cfg.step).floor() as i64;
    let oracle: Vec<f64> = (w0..=w1)
        .into_par_iter()
        .map(|k| hilbert_transform_pv(|x| cfg.profile.eval(x), k as f64 * cfg.step, r, quad))
        .collect::<Result<_>>()?;
    let oracle = GridFunction::new(cfg.step, w0, oracle)?;
    let base = oracle.lp_norm(cfg.p);
    cfg.eps_list
        .iter()
        .map(|&eps| {
            let n = (3.0 * r / eps).ceil() as usize;
            let kernel = KernelSpec::hilbert_d(n, Taper::Sharp)?;
            let lifted = dilate(&f, eps, cfg.p)?;
            let applied = grid_convolve_integer_shifts(&kernel, &lifted)?;
            let back = dilate(&applied, 1.0 / eps, cfg.p)?;
            let back = GridFunction::new(f.step, back.offset_index, back.samples)?;
            let windowed = GridFunction::new(f.step, w0, (w0..=w1).map(|k| back.at_index(k)).collect())?;
            let deviation = windowed.sub(&oracle)?.lp_norm(cfg.p);
            Ok(HilbertRow { eps, deviation, relative: deviation / base })
        })
        .collect()
}
