use dpda::align::{
    align, align_cagrad, align_gradvac, align_pcgrad, AlignerRegistry, AlignmentMethod, AlignmentParams, GradVacState,
    PHI_TARGET_MAX,
};
use dpda::numkit::{cosine, dot, norm, ParamVector};
use proptest::prelude::*;

fn pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..=max_dim).prop_flat_map(|n| (prop::collection::vec(-3.0..3.0f64, n), prop::collection::vec(-3.0..3.0f64, n)))
}

fn pv(v: &[f64]) -> ParamVector {
    ParamVector::new(v.to_vec()).unwrap()
}

proptest! {
    #[test]
    fn pcgrad_orthogonal_or_identity((a, b) in pair(512)) {
        let (a, b) = (pv(&a), pv(&b));
        prop_assume!(norm(&a) > 1e-6 && norm(&b) > 1e-6);
        let (pa, pb) = align_pcgrad(&a, &b).unwrap();
        if dot(&a, &b).unwrap() < 0.0 {
            let tol = 1e-9 * norm(&a) * norm(&b);
            prop_assert!(dot(&pa, &b).unwrap().abs() <= tol);
            prop_assert!(dot(&pb, &a).unwrap().abs() <= tol);
        } else {
            prop_assert_eq!(pa, a);
            prop_assert_eq!(pb, b);
        }
    }

    #[test]
    fn gradvac_target_hit_when_firing((a, b) in pair(64), target in 0.05..0.95f64) {
        let (a, b) = (pv(&a), pv(&b));
        prop_assume!(norm(&a) > 1e-3 && norm(&b) > 1e-3);
        let phi = cosine(&a, &b).unwrap();
        let (ca, cb, _) = align_gradvac(&a, &b, GradVacState::new(target), 0.0).unwrap();
        if phi < target {
            prop_assert!((cosine(&ca, &b).unwrap() - target).abs() < 1e-6);
            prop_assert!((cosine(&cb, &a).unwrap() - target).abs() < 1e-6);
        } else {
            prop_assert_eq!(ca, a);
            prop_assert_eq!(cb, b);
        }
    }

    #[test]
    fn gradvac_target_stays_in_unit_interval(
        init in 0.0..1.0f64,
        beta in 0.0..=1.0f64,
        phis in prop::collection::vec(-0.999..=1.0f64, 1..200),
    ) {
        let mut st = GradVacState::new(init);
        for phi in phis {
            st = st.observe(phi, beta);
            prop_assert!(st.phi_target >= 0.0 && st.phi_target < 1.0);
            prop_assert!(st.phi_target <= PHI_TARGET_MAX);
        }
    }

    #[test]
    fn cagrad_feasible_and_binding((a, b) in pair(16), c in 0.01..0.99f64) {
        let (a, b) = (pv(&a), pv(&b));
        let g0 = ParamVector::midpoint(&a, &b);
        prop_assume!(norm(&g0) > 1e-6 && a != b);
        let g = align_cagrad(&a, &b, c).unwrap();
        let r = norm(&g.sub(&g0));
        let radius = c * norm(&g0);
        prop_assert!(r <= radius + 1e-9);
        prop_assert!((r - radius).abs() <= 1e-6 * radius.max(1.0));
    }

    #[test]
    fn noalign_dispatch_is_the_mean((a, b) in pair(64)) {
        let (a, b) = (pv(&a), pv(&b));
        let out = align(&a, &b, &AlignmentMethod::NoAlign, &mut GradVacState::default()).unwrap();
        for i in 0..a.len() {
            prop_assert!((out.g_final[i] - 0.5 * (a[i] + b[i])).abs() <= 1e-15);
        }
    }
}

#[test]
fn pcgrad_applied_only_on_conflict() {
    let reg = AlignerRegistry::with_builtins();
    let mut pc = reg.create("pcgrad", &AlignmentParams::default()).unwrap();
    let mut rng = dpda::Rng::new(11);
    for _ in 0..500 {
        let a = pv(&(0..8).map(|_| rng.normal()).collect::<Vec<_>>());
        let b = pv(&(0..8).map(|_| rng.normal()).collect::<Vec<_>>());
        let out = pc.align(&a, &b).unwrap();
        assert!(!out.alignment_applied || out.conflict_detected);
        assert_eq!(out.conflict_detected, dot(&a, &b).unwrap() < 0.0);
    }
}

#[test]
fn gradvac_may_fire_without_conflict() {
    let reg = AlignerRegistry::with_builtins();
    let params = AlignmentParams { gradvac_phi_init: 0.9, ..Default::default() };
    let mut gv = reg.create("gradvac", &params).unwrap();
    let out = gv.align(&pv(&[1.0, 0.0]), &pv(&[1.0, 1.0])).unwrap();
    assert!(!out.conflict_detected);
    assert!(out.alignment_applied);
    assert!(out.cosine_after > out.cosine_before);
}

#[test]
fn registry_names_every_builtin() {
    let reg = AlignerRegistry::with_builtins();
    for name in ["none", "pcgrad", "gradvac", "cagrad"] {
        let a = reg.create(name, &AlignmentParams::default()).unwrap();
        assert_eq!(a.name(), name);
    }
    assert!(reg.create("mgda", &AlignmentParams::default()).is_err());
}
