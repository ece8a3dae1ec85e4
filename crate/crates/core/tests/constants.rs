use std::f64::consts::{FRAC_1_SQRT_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharpmart_core::constants::*;
use sharpmart_core::optimize::OptimizerConfig;

/// The maximised quotient written out again from scratch, in the
/// numerator-shift form, without the library's helpers.
fn quotient(p: f64, a: f64, b: f64, v: f64) -> f64 {
    let th = b.atan2(a);
    let num = (v - th).cos().abs().powf(p) + (v - th + PI / p).cos().abs().powf(p);
    let den = v.cos().abs().powf(p) + (v + PI / p).cos().abs().powf(p);
    (a * a + b * b).powf(p / 2.0) * num / den
}

/// Dense scan of `[0, pi)` followed by a ternary search on the best cell.
fn brute_force_b(p: f64, a: f64, b: f64) -> f64 {
    let n = 200_000;
    let h = PI / n as f64;
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        let v = i as f64 * h;
        let q = quotient(p, a, b, v);
        if q > best {
            best = q;
            arg = v;
        }
    }
    let (mut lo, mut hi) = (arg - h, arg + h);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if quotient(p, a, b, m1) < quotient(p, a, b, m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    quotient(p, a, b, 0.5 * (lo + hi)).max(best)
}

fn cfg() -> OptimizerConfig {
    OptimizerConfig::default()
}

#[test]
fn pichorides_values() {
    assert!((pichorides_constant(2.0).unwrap() - 1.0).abs() < 1e-15);
    assert!((pichorides_constant(4.0).unwrap() - (1.0 + 2f64.sqrt())).abs() < 1e-14);
    // the conjugate exponent of 4 is 4/3
    assert!((pichorides_constant(4.0 / 3.0).unwrap() - pichorides_constant(4.0).unwrap()).abs() < 1e-14);
    assert!(pichorides_constant(1.0).is_err());
    assert!(pichorides_constant(f64::NAN).is_err());
}

#[test]
fn essen_values() {
    assert!((essen_constant(2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    let n4 = 1.0 + 2f64.sqrt();
    assert!((essen_constant(4.0).unwrap() - (1.0 + n4 * n4).sqrt()).abs() < 1e-13);
    assert!((essen_constant(4.0 / 3.0).unwrap() - essen_constant(4.0).unwrap()).abs() < 1e-13);
}

#[test]
fn library_quotient_matches_rewritten_quotient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let p = rng.gen_range(1.05..10.0);
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let v = rng.gen_range(0.0..2.0 * PI);
        let coef = CoefPair::new(a, b).unwrap();
        let x = ratio_at(p, &coef, v);
        let y = quotient(p, a, b, v);
        assert!((x - y).abs() <= 1e-12 * y.max(1.0), "p={p} a={a} b={b} v={v}: {x} vs {y}");
    }
}

#[test]
fn b_p_matches_brute_force_scan() {
    let h = FRAC_1_SQRT_2;
    for p in [1.2, 1.5, 3.0, 8.0] {
        for (a, b) in [(0.0, 1.0), (0.6, 0.8), (h, h), (-0.3, 0.9)] {
            let coef = CoefPair::new(a, b).unwrap();
            let got = hkv_constant(p, &coef, &cfg()).unwrap().b_p;
            let want = brute_force_b(p, a, b);
            assert!((got - want).abs() <= 1e-9 * want, "p={p} ({a},{b}): {got} vs {want}");
        }
    }
}

#[test]
fn three_formulations_agree() {
    let h = FRAC_1_SQRT_2;
    for p in [1.2, 1.5, 2.0, 3.0, 4.0, 8.0] {
        for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.6, 0.8), (h, h)] {
            let coef = CoefPair::new(a, b).unwrap();
            let d = hkv_constant(p, &coef, &cfg()).unwrap().b_p;
            let s = hkv_constant_shifted(p, &coef, &cfg()).unwrap().b_p;
            let x = hkv_constant_xform(p, &coef, &cfg()).unwrap().b_p;
            assert!((d - s).abs() <= 1e-8 * d && (d - x).abs() <= 1e-8 * d, "p={p} ({a},{b}): {d} {s} {x}");
        }
    }
}

#[test]
fn p_two_is_squared_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let c = hkv_constant(2.0, &CoefPair::new(a, b).unwrap(), &cfg()).unwrap();
        assert!((c.b_p - (a * a + b * b)).abs() <= 1e-10 * (a * a + b * b));
    }
}

#[test]
fn identity_multiple_is_bypassed() {
    for p in [1.3, 2.0, 5.0] {
        let c = hkv_constant(p, &CoefPair::new(1.0, 0.0).unwrap(), &cfg()).unwrap();
        assert_eq!(c.b_p, 1.0);
        assert!(c.t0.is_none());
        let c = hkv_constant(p, &CoefPair::new(-2.0, 0.0).unwrap(), &cfg()).unwrap();
        assert!((c.b_p - 2f64.powf(p)).abs() < 1e-12);
    }
}

#[test]
fn pure_hilbert_gives_pichorides() {
    for p in [1.2, 1.5, 2.0, 3.0, 4.0, 8.0] {
        let c = hkv_constant(p, &CoefPair::new(0.0, 1.0).unwrap(), &cfg()).unwrap();
        let n = pichorides_constant(p).unwrap();
        assert!((c.b_p_root - n).abs() <= 1e-8, "p={p}: {} vs {n}", c.b_p_root);
    }
}

#[test]
fn regression_anchor_at_zero() {
    let h = FRAC_1_SQRT_2;
    let v0 = ratio_at(3.0, &CoefPair::new(h, h).unwrap(), 0.0);
    assert!((v0 - 1.115_355_071_650).abs() < 1e-11, "{v0}");
}

#[test]
fn root_and_maximiser_are_consistent() {
    let coef = CoefPair::new(0.6, 0.8).unwrap();
    for p in [1.5, 3.0] {
        let c = hkv_constant(p, &coef, &cfg()).unwrap();
        assert!((c.b_p_root.powf(p) - c.b_p).abs() <= 1e-12 * c.b_p);
        assert!((ratio_at(p, &coef, c.t0.unwrap()) - c.b_p).abs() <= 1e-12 * c.b_p);
        assert!((c.gamma - PI / (2.0 * p)).abs() < 1e-15);
    }
}

#[test]
fn maximiser_is_stationary_to_rounding() {
    // the oracle quotient's finite-difference slope must change sign across t0 within 1e-10
    for p in [1.2, 1.5, 3.0, 4.0, 8.0] {
        for (a, b) in [(0.0, 1.0), (0.6, 0.8), (FRAC_1_SQRT_2, FRAC_1_SQRT_2)] {
            for formula in [Formula::Difference, Formula::Sum, Formula::Tangent] {
                let t0 = hkv_constant_by(formula, p, &CoefPair::new(a, b).unwrap(), &cfg()).unwrap().t0.unwrap();
                let q = |v: f64| ratio_for(formula, p, &CoefPair::new(a, b).unwrap(), v);
                let slope = |v: f64| q(v + 1e-6) - q(v - 1e-6);
                assert!(slope(t0 - 1e-10) >= -1e-13 && slope(t0 + 1e-10) <= 1e-13, "p={p} ({a},{b}) {formula:?}");
            }
        }
    }
}

#[test]
fn quotient_never_exceeds_b_p() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = FRAC_1_SQRT_2;
    for p in [1.5, 3.0] {
        let coef = CoefPair::new(h, h).unwrap();
        let b = hkv_constant(p, &coef, &cfg()).unwrap().b_p;
        for _ in 0..10_000 {
            let v = rng.gen_range(0.0..2.0 * PI);
            assert!(ratio_at(p, &coef, v) <= b * (1.0 + 1e-12));
        }
    }
}

#[test]
fn tangent_form_has_finite_limits() {
    let coef = CoefPair::new(0.3, 0.7).unwrap();
    for s in [PI / 2.0 - 1e-15, -PI / 2.0 + 1e-15, PI / 2.0] {
        assert!(ratio_at_tangent(3.0, &coef, s).is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reflections_leave_b_p_unchanged(p in 1.1f64..6.0, a in -1.0f64..1.0, b in 0.05f64..1.0) {
        let base = hkv_constant(p, &CoefPair::new(a, b).unwrap(), &cfg()).unwrap().b_p;
        for (x, y) in [(a, -b), (-a, b)] {
            let other = hkv_constant(p, &CoefPair::new(x, y).unwrap(), &cfg()).unwrap().b_p;
            prop_assert!((other - base).abs() <= 1e-9 * base);
        }
    }

    #[test]
    fn scale_law(p in 1.1f64..6.0, a in -1.0f64..1.0, b in 0.05f64..1.0, lambda in 0.1f64..10.0) {
        let base = hkv_constant(p, &CoefPair::new(a, b).unwrap(), &cfg()).unwrap().b_p;
        let scaled = hkv_constant(p, &CoefPair::new(lambda * a, lambda * b).unwrap(), &cfg()).unwrap().b_p;
        let want = lambda.powf(p) * base;
        prop_assert!((scaled - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn b_p_dominates_trivial_lower_bounds(p in 1.1f64..6.0, a in -1.0f64..1.0, b in 0.05f64..1.0) {
        let c = hkv_constant(p, &CoefPair::new(a, b).unwrap(), &cfg()).unwrap();
        prop_assert!(c.b_p >= a.abs().powf(p) * (1.0 - 1e-12));
        // an L^p multiplier norm is at least the sup of the symbol
        prop_assert!(c.b_p >= (a * a + b * b).powf(p / 2.0) * (1.0 - 1e-12));
    }
}
