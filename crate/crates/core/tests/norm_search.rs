use std::f64::consts::{FRAC_1_SQRT_2, PI};

use proptest::prelude::*;
use sharpmart_core::norm_search::*;
use sharpmart_core::quadrature::QuadConfig;
use sharpmart_core::sequence_ops::{AveragingKernel, KernelSpec, RealSequence, Taper};

const H: f64 = FRAC_1_SQRT_2;

fn quick(n: usize, model: Model) -> AscentConfig {
    AscentConfig { n_max: n, model, structured_starts: 8, random_starts: 2, max_steps: 150, ..AscentConfig::default() }
}

#[test]
fn delta_through_d_is_a_partial_zeta_sum() {
    let (n, margin) = (64, 64);
    let op = LinearOp::build(&OperatorDesc::D, 2.0, Model::Windowed { margin }, n, &QuadConfig::default()).unwrap();
    let r = rayleigh_ratio(&op, &RealSequence::delta(0), 2.0).unwrap();
    // the output window is [-(n + margin), n + margin]
    let reach = (n + margin) as i64;
    let direct: f64 = (1..=reach).map(|k| 2.0 / (PI * k as f64).powi(2)).sum::<f64>().sqrt();
    assert!((r.quotient - direct).abs() < 1e-13, "{} vs {direct}", r.quotient);
    assert!(r.lower == r.quotient && r.upper >= r.quotient);
    // untruncated: sum over k != 0 of 1/(pi k)^2 is 1/3
    assert!(r.upper >= (1.0f64 / 3.0).sqrt() - 1e-12);
}

#[test]
fn identity_multiples() {
    let x = RealSequence::from_fn(-10, 10, |n| (0.3 * n as f64).sin() + 0.1);
    for (a, p) in [(1.0, 3.0), (-0.4, 1.5)] {
        let op = LinearOp::build(&OperatorDesc::IdentityPlusD { a, b: 0.0 }, p, Model::Windowed { margin: 16 }, 16, &QuadConfig::default())
            .unwrap();
        assert!((rayleigh_ratio(&op, &x, p).unwrap().quotient - a.abs()).abs() < 1e-13);
    }
}

#[test]
fn ascent_on_d_at_p_two_finds_unit_norm() {
    let est = ascend(&OperatorDesc::D, 2.0, &quick(512, Model::Windowed { margin: 512 })).unwrap();
    assert!((est.lower_bound - 1.0).abs() <= 0.02, "{est:?}");
    assert!(est.lower_bound <= 1.0 + 1e-12);
}

#[test]
fn ascent_on_identity_plus_d_at_p_two_matches_symbol_sup() {
    for (a, b) in [(H, H), (0.6, 0.8), (1.0, -0.5)] {
        let est = ascend(&OperatorDesc::IdentityPlusD { a, b }, 2.0, &quick(512, Model::Windowed { margin: 512 })).unwrap();
        // symbol a + i b (pi - theta)/pi on (0, 2 pi): modulus sup sqrt(a^2 + b^2) at theta -> 0
        let oracle = (a * a + b * b).sqrt();
        assert!((est.lower_bound / oracle - 1.0).abs() <= 0.02, "({a},{b}): {} vs {oracle}", est.lower_bound);
        assert!((est.target - oracle).abs() < 1e-9);
    }
}

#[test]
fn symbol_sups() {
    let id = KernelSpec::identity();
    assert!((multiplier_sup(1.0, &id, 0.0, &id, 64).unwrap().sup - 1.0).abs() < 1e-15);

    let d = KernelSpec::hilbert_d(4096, Taper::Jackson).unwrap();
    let s = multiplier_sup(0.0, &id, 1.0, &d, 1 << 16).unwrap();
    assert!(s.sup >= 0.99 && s.sup <= 1.0, "{s:?}");

    // a I + b D approaches sqrt(a^2 + b^2) near theta = 0
    let s = multiplier_sup(0.6, &id, 0.8, &d, 1 << 16).unwrap();
    assert!(s.sup <= 1.0 && s.sup >= 0.99, "{s:?}");
    assert!(s.theta.min(2.0 * PI - s.theta) < 0.05);
}

#[test]
fn sharp_truncation_overshoots_by_gibbs() {
    let id = KernelSpec::identity();
    let d = KernelSpec::hilbert_d(1024, Taper::Sharp).unwrap();
    let s = multiplier_sup(0.0, &id, 1.0, &d, 1 << 14).unwrap();
    // the overshoot is that of the sine integral, about 1.179, and must sit inside the slack
    assert!(s.sup > 1.1 && s.sup < 1.2, "{s:?}");
}

#[test]
fn j_and_averaged_operators_stay_below_the_sharp_constant() {
    let quad = QuadConfig::default();
    for p in [1.5, 3.0] {
        let descs = [
            OperatorDesc::IdentityPlusJ { a: H, b: H },
            OperatorDesc::IdentityPlusJ { a: 0.0, b: 1.0 },
            OperatorDesc::AveragingPlusD { a: H, b: H, kernel: AveragingKernel::Geometric { q: 0.5 } },
            OperatorDesc::AveragingPlusD { a: H, b: H, kernel: AveragingKernel::Gaussian { sigma: 2.0 } },
        ];
        for desc in descs {
            let cfg = AscentConfig { quad, ..quick(256, Model::Truncated { taper: Taper::Sharp, support: 256 }) };
            let est = ascend(&desc, p, &cfg).unwrap();
            assert!(
                est.quotient <= est.target + est.truncation_slack,
                "{} p={p}: {} > {} + {}",
                desc.label(),
                est.quotient,
                est.target,
                est.truncation_slack
            );
        }
    }
}

#[test]
fn windowed_bounds_never_exceed_the_sharp_constant() {
    for p in [1.5, 3.0] {
        let est = ascend(&OperatorDesc::IdentityPlusD { a: H, b: H }, p, &quick(256, Model::Windowed { margin: 256 })).unwrap();
        assert!(est.lower_bound <= est.target, "p={p}: {est:?}");
        assert!(est.fraction > 0.5 && est.fraction <= 1.0);
    }
}

#[test]
fn sweep_is_monotone_in_n() {
    let cfg = quick(0, Model::Windowed { margin: 0 });
    let rows = conjecture_sweep(&OperatorDesc::IdentityPlusD { a: H, b: H }, 3.0, &[32, 64, 128, 256], &cfg).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].best_quotient >= w[0].best_quotient - 1e-6, "{rows:?}");
    }
    for r in &rows {
        assert!((r.gap - (r.target - r.best_quotient)).abs() < 1e-15);
    }
}

#[test]
fn seeded_runs_are_identical() {
    let cfg = AscentConfig { seed: 42, ..quick(128, Model::Windowed { margin: 128 }) };
    let desc = OperatorDesc::IdentityPlusD { a: 0.6, b: 0.8 };
    let a = ascend(&desc, 1.5, &cfg).unwrap();
    let b = ascend(&desc, 1.5, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn witness_reproduces_reported_quotient() {
    let cfg = quick(128, Model::Windowed { margin: 128 });
    let desc = OperatorDesc::IdentityPlusD { a: H, b: H };
    let est = ascend(&desc, 3.0, &cfg).unwrap();
    let op = LinearOp::build(&desc, 3.0, cfg.model, cfg.n_max, &cfg.quad).unwrap();
    let r = rayleigh_ratio(&op, &est.witness, 3.0).unwrap();
    assert!((r.quotient - est.quotient).abs() <= 1e-12 * est.quotient);
}

#[test]
fn bad_inputs() {
    assert!(LinearOp::build(&OperatorDesc::D, 1.0, Model::Windowed { margin: 4 }, 4, &QuadConfig::default()).is_err());
    assert!(LinearOp::build(&OperatorDesc::D, 2.0, Model::Windowed { margin: 4 }, 0, &QuadConfig::default()).is_err());
    assert!(
        LinearOp::build(&OperatorDesc::D, 2.0, Model::Truncated { taper: Taper::Sharp, support: 0 }, 4, &QuadConfig::default())
            .is_err()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn quotient_is_scale_invariant(k in -20i32..20, neg in any::<bool>(), lambda in 0.01f64..100.0) {
        let op = LinearOp::build(&OperatorDesc::IdentityPlusD { a: H, b: H }, 3.0, Model::Windowed { margin: 32 }, 32, &QuadConfig::default())
            .unwrap();
        let x = RealSequence::from_fn(-20, 20, |n| 1.0 / (n as f64 + 0.5));
        let q = rayleigh_ratio(&op, &x, 3.0).unwrap().quotient;
        // powers of two scale every floating-point operation exactly
        let s = if neg { -(2f64.powi(k)) } else { 2f64.powi(k) };
        prop_assert_eq!(rayleigh_ratio(&op, &x.scaled(s), 3.0).unwrap().quotient, q);
        let ql = rayleigh_ratio(&op, &x.scaled(lambda), 3.0).unwrap().quotient;
        prop_assert!((ql - q).abs() <= 1e-13 * q);
    }
}
