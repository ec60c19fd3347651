use ionjunction::junction::{
    banned_region_tangency, simple_trap_stable, transfer_stable, FailureMechanism, JunctionParams, PathFamily,
};
use ionjunction::mathieu::{
    boundary_curve, characteristic_exponent, floquet_stable, hill_determinant, is_stable, Curve, MathieuParams,
    DEFAULT_TRUNCATION,
};
use ionjunction::BoundaryCurves;
use proptest::prelude::*;

/// Independent classifier: RK4 monodromy at a much finer step than the
/// library default.
fn oracle(u: f64, v: f64) -> f64 {
    floquet_stable(MathieuParams::new(u, v), 16384).monodromy_trace
}

#[test]
fn hill_matches_floquet_on_a_coarse_grid() {
    let mut agree = 0;
    let mut total = 0;
    for i in 0..40 {
        for j in 0..40 {
            let u = -1.5 + 4.0 * (i as f64 + 0.5) / 40.0;
            let v = 2.0 * (j as f64 + 0.5) / 40.0;
            let trace = oracle(u, v);
            // skip points whose trace is within the oracle's own error of ±2
            if (trace.abs() - 2.0).abs() < 1e-6 {
                continue;
            }
            total += 1;
            if is_stable(u, v) == (trace.abs() <= 2.0) {
                agree += 1;
            }
        }
    }
    assert_eq!(agree, total);
}

#[test]
fn cos_form_matches_monodromy() {
    for &(u, v) in &[(0.3, 0.2), (-0.4, 0.8), (1.7, 0.4), (2.5, 1.5), (0.05, 1.9)] {
        let r = characteristic_exponent(MathieuParams::new(u, v));
        assert!((r.cos_arg - 0.5 * oracle(u, v)).abs() < 1e-8, "({u}, {v})");
    }
}

#[test]
fn truncation_converges() {
    for &(u, v) in &[(0.3, 0.5), (-0.8, 1.5), (2.2, 1.0)] {
        let p = MathieuParams::new(u, v);
        let a = hill_determinant(p, DEFAULT_TRUNCATION).unwrap();
        let b = hill_determinant(p, 2 * DEFAULT_TRUNCATION).unwrap();
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }
}

#[test]
fn axis_boundary_near_0_908() {
    let v = bisect(0.5, 1.2, |v| oracle(0.0, v).abs() <= 2.0);
    assert!((v - 0.908).abs() < 0.01, "{v}");
    let v = bisect(0.5, 1.2, |v| is_stable(0.0, v));
    assert!((v - 0.908).abs() < 0.01, "{v}");
}

fn bisect(mut lo: f64, mut hi: f64, inside: impl Fn(f64) -> bool) -> f64 {
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn boundaries_separate_stable_and_unstable() {
    for &v in &[0.1, 0.4, 0.8, 1.2, 1.8] {
        let a0 = boundary_curve(Curve::A0, v).unwrap();
        let b1 = boundary_curve(Curve::B1, v).unwrap();
        let a1 = boundary_curve(Curve::A1, v).unwrap();
        assert!(b1 <= a1);
        assert!(!is_stable(a0 - 1e-3, v) && is_stable(a0 + 1e-3, v));
        assert!(is_stable(b1 - 1e-3, v) && !is_stable(b1 + 1e-3, v));
        assert!(!is_stable(a1 - 1e-3, v) && is_stable(a1 + 1e-3, v));
    }
}

#[test]
fn tabulated_curves_track_bisection() {
    let curves = BoundaryCurves::shared();
    for &v in &[0.123, 0.777, 1.555] {
        for c in Curve::ALL {
            assert!((curves.eval(c, v).unwrap() - boundary_curve(c, v).unwrap()).abs() < 1e-4);
        }
    }
}

#[test]
fn moving_pair_dips_below_a0() {
    // Simple-stable, but the x pair passes (−0.065, 0.3) with a0(0.3) ≈ −0.045.
    let jp = JunctionParams::new(0.6, -0.15, 0.02).unwrap();
    assert!(simple_trap_stable(&jp).stable);
    let r = transfer_stable(&jp, 256);
    assert!(!r.stable && r.crosses_below_a0);
    assert_eq!(r.failing_pair, Some(PathFamily::Moving));
    assert_eq!(r.mechanism, Some(FailureMechanism::BelowA0));
    let t = r.first_failure_t.unwrap();
    assert!(t > 0.0 && t < 0.5);
    let before = jp.path_point(t - 1e-3);
    let after = jp.path_point(t + 1e-3);
    assert!(is_stable(before.0, before.1) && !is_stable(after.0, after.1));
    assert!(banned_region_tangency(&jp).unwrap());
}

fn junction() -> impl Strategy<Value = JunctionParams> {
    (0.02..1.2f64, -0.6..0.6f64, 0.0..1.4f64).prop_map(|(m, b, a)| JunctionParams::new(m, b, a).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stability_is_even_in_v(u in -1.5..4.0f64, v in 0.01..2.0f64) {
        prop_assert_eq!(is_stable(u, v), is_stable(u, -v));
    }

    #[test]
    fn transfer_implies_simple(jp in junction()) {
        if transfer_stable(&jp, 256).stable {
            prop_assert!(simple_trap_stable(&jp).stable);
        }
    }

    #[test]
    fn mu_sign_is_irrelevant(jp in junction()) {
        let flipped = JunctionParams { mu: -jp.mu, ..jp };
        prop_assert_eq!(transfer_stable(&jp, 256).stable, transfer_stable(&flipped, 256).stable);
        prop_assert_eq!(simple_trap_stable(&jp), simple_trap_stable(&flipped));
    }

    #[test]
    fn refinement_only_reveals_failures(jp in junction()) {
        if transfer_stable(&jp, 1024).stable {
            prop_assert!(transfer_stable(&jp, 128).stable);
        }
    }

    #[test]
    fn path_endpoints_are_trap_axes(jp in junction()) {
        prop_assert_eq!(jp.path_point(0.0), (jp.alpha, 0.0));
        prop_assert_eq!(jp.path_point(1.0), (jp.beta, jp.mu.abs()));
        let r = transfer_stable(&jp, 256);
        let s = simple_trap_stable(&jp);
        if !s.vertical {
            prop_assert!(!r.stable);
            prop_assert_eq!(r.failing_pair, Some(PathFamily::Vertical));
        }
        if s.vertical && !(s.axial && s.transverse) {
            prop_assert!(!r.stable);
        }
    }

    #[test]
    fn tangency_flags_only_moving_failures(jp in junction()) {
        let s = simple_trap_stable(&jp);
        if s.stable {
            if let Ok(true) = banned_region_tangency(&jp) {
                prop_assert!(transfer_stable(&jp, 1024).crosses_below_a0);
            }
        }
    }
}
