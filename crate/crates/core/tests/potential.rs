use ionjunction::junction::JunctionParams;
use ionjunction::potential::{JunctionPotential, ProfileKind, TransferProfile, TwoLayerGeometry};
use ionjunction::Vec3;
use proptest::prelude::*;

fn point() -> impl Strategy<Value = Vec3> {
    (-5.0..5.0f64, -5.0..5.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn potential() -> impl Strategy<Value = JunctionPotential> {
    (0.05..1.0f64, -0.5..0.5f64, 0.0..1.2f64, 0.5..3.0f64).prop_map(|(m, b, a, s)| {
        JunctionPotential::new(TwoLayerGeometry::new(s).unwrap(), JunctionParams::new(m, b, a).unwrap())
    })
}

fn fd_gradient(phi: &JunctionPotential, p: &Vec3, t: f64, f: f64, h: f64) -> Vec3 {
    Vec3::from_fn(|i, _| {
        let mut hi = *p;
        let mut lo = *p;
        hi[i] += h;
        lo[i] -= h;
        (phi.value(&hi, t, f) - phi.value(&lo, t, f)) / (2.0 * h)
    })
}

proptest! {
    #[test]
    fn laplacian_vanishes(phi in potential(), p in point(), t in 0.0..4.0f64, f in 0.0..=1.0f64) {
        let h = 1e-3;
        let c = phi.value(&p, t, f);
        let mut lap = 0.0;
        for i in 0..3 {
            let mut hi = p;
            let mut lo = p;
            hi[i] += h;
            lo[i] -= h;
            lap += (phi.value(&hi, t, f) - 2.0 * c + phi.value(&lo, t, f)) / (h * h);
        }
        prop_assert!(lap.abs() < 1e-5 * (1.0 + c.abs()));
        prop_assert!(phi.hessian_diagonal(t, f).sum().abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_differences(phi in potential(), p in point(), t in 0.0..4.0f64, f in 0.0..=1.0f64) {
        let g = phi.gradient(&p, t, f);
        let d = fd_gradient(&phi, &p, t, f, 1e-4);
        prop_assert!((g - d).norm() <= 1e-6 * g.norm().max(1.0), "{g} vs {d}");
    }

    #[test]
    fn upper_trap_is_rotoreflected_lower(phi in potential(), p in point(), t in 0.0..4.0f64) {
        let upper = phi.value(&p, t, 1.0);
        let lower = phi.value(&TwoLayerGeometry::rotoreflect(&p), t, 0.0);
        prop_assert!((upper - lower).abs() <= 1e-12 * upper.abs().max(1.0));
    }

    #[test]
    fn gradient_vanishes_at_null(phi in potential(), t in 0.0..4.0f64, f in 0.0..=1.0f64) {
        let null = Vec3::new(0.0, 0.0, phi.geometry.null_height(f));
        prop_assert!(phi.gradient(&null, t, f).norm() < 1e-14);
    }

    #[test]
    fn profiles_are_monotone_and_pinned(t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
        for kind in [ProfileKind::Heaviside, ProfileKind::Linear, ProfileKind::ThreePhase, ProfileKind::Smoothstep] {
            let p = TransferProfile::new(kind, 1.0).unwrap();
            prop_assert_eq!(p.eval(0.0), 0.0);
            prop_assert_eq!(p.eval(1.0), 1.0);
            let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(p.eval(a) <= p.eval(b));
        }
    }
}
