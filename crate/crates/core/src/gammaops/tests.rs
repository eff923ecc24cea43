use nalgebra::Complex;
use proptest::prelude::*;

use super::*;
use crate::matcore::{cx, haar_unitary, seeded_rng};
use crate::polydisc::{in_gamma, symmetrize};

type M = CMatrix<f64>;

fn diag(v: &[Complex<f64>]) -> M {
    M::from_fn(v.len(), v.len(), |i, j| if i == j { v[i] } else { cx(0.0, 0.0) })
}

/// Finite section of the weighted shift `T e₁ = αe₂, T e_j = e_{j+1}` and its symmetrized tuple.
fn weighted_shift_tuple(m: usize, n: usize, alpha: f64) -> GammaTuple<f64> {
    let mut t = M::zeros(m, m);
    t[(1, 0)] = cx(alpha, 0.0);
    for j in 1..m - 1 {
        t[(j + 1, j)] = cx(1.0, 0.0);
    }
    let mut ops = vec![M::identity(m, m); n - 2];
    ops.push(t.clone());
    ops.push(t);
    symmetrize_operators(&ops).unwrap()
}

fn small_probe(n: usize) -> VnProbe<f64> {
    VnProbe::new(
        n,
        VnConfig {
            samples: 40,
            resolution: 24,
            ..VnConfig::default()
        },
    )
    .unwrap()
}

#[test]
fn defect_of_zero_and_unitary() {
    let tol = Tolerances::default();
    let d = defect_pair(&M::zeros(3, 3), &tol).unwrap();
    assert!(op_norm(&(&d.d_p - M::identity(3, 3))) < 1e-14);
    assert_eq!(d.defect.dim(), 3);
    let u: M = haar_unitary(4, &mut seeded_rng(2));
    let d = defect_pair(&u, &tol).unwrap();
    assert_eq!(d.defect.dim(), 0);
    assert_eq!(d.defect_star.dim(), 0);
}

#[test]
fn defect_of_truncated_shift_square() {
    let tol = Tolerances::default();
    let g = weighted_shift_tuple(8, 3, 0.5);
    let d = defect_pair(g.p(), &tol).unwrap();
    // Oracle: P*P = diag(α², 1, …, 1, 0, 0) for the 8×8 section of T².
    let mut want = vec![cx(0.0, 0.0); 8];
    want[0] = cx(0.75f64.sqrt(), 0.0);
    want[6] = cx(1.0, 0.0);
    want[7] = cx(1.0, 0.0);
    assert!(op_norm(&(&d.d_p - diag(&want))) < 1e-12);
    assert_eq!(d.defect.dim(), 3);
    assert!(d.intertwining_residual < 1e-12);
    assert!(matches!(
        defect_pair(&(M::identity(2, 2) * cx(1.5, 0.0)), &tol),
        Err(LabError::NotContraction { .. })
    ));
}

#[test]
fn unitary_p_has_empty_fundamental_tuple() {
    let tol = Tolerances::default();
    let p = diag(&[cx(0.0, 1.0), cx(-1.0, 0.0)]);
    let s1 = diag(&[cx(0.3, 0.0), cx(0.1, 0.2)]);
    let s2 = diag(&[cx(-0.2, 0.5), cx(0.4, 0.0)]);
    let g = GammaTuple::new(vec![s1.clone(), s2.clone()], p.clone()).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    assert_eq!(f.k(), 0);
    assert!(f.a.iter().all(|a| a.shape() == (0, 0)));
    let want1 = op_norm(&(&s1 - s2.adjoint() * &p));
    let want2 = op_norm(&(&s2 - s1.adjoint() * &p));
    assert!((f.residuals[0] - want1).abs() < 1e-14);
    assert!((f.residuals[1] - want2).abs() < 1e-14);
    let id = verify_fundamental_identity(&g, &f, &tol).unwrap();
    assert!(id.max < 1e-14);
}

#[test]
fn weighted_shift_first_operator_on_e1() {
    let tol = Tolerances::default();
    for n in [3, 4] {
        let g = weighted_shift_tuple(8, n, 0.5);
        let f = fo_tuple(&g, &tol).unwrap();
        // Oracle: ⟨(S₁ − S_{n−1}*P)e₁, e₁⟩ = (n−2)(1 − α²), divided by D_P² = 1 − α² on e₁.
        let a1 = f.embedded(1);
        assert!((a1[(0, 0)] - cx((n - 2) as f64, 0.0)).norm() < 1e-10, "{}", a1[(0, 0)]);
        let id = verify_fundamental_identity(&g, &f, &tol).unwrap();
        assert!(id.max < 1e-8);
    }
}

#[test]
fn ando_corpus_fundamental_identities() {
    let tol = Tolerances::default();
    let g = gen_symmetrized_ando::<f64>(6, 3, 1).unwrap();
    g.validate(&tol).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    assert!(!f.leakage_detected);
    for i in 1..3 {
        assert!(f.residuals[i - 1] <= 1e-8 * (1.0 + op_norm(g.s(i))));
    }
    assert!(verify_fundamental_identity(&g, &f, &tol).unwrap().max <= 1e-8);
}

#[test]
fn solve_is_basis_independent() {
    let tol = Tolerances::default();
    let g = gen_symmetrized_ando::<f64>(5, 4, 11).unwrap();
    let dp = defect_pair(g.p(), &tol).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    let w: M = haar_unitary(f.k(), &mut seeded_rng(77));
    let other = fo_tuple_in_basis(&g, &dp.d_p, &(&dp.defect.basis * &w), &tol).unwrap();
    let expected = f.rebased(&w);
    for (a, b) in other.a.iter().zip(&expected.a) {
        assert!(op_norm(&(a - b)) < 1e-8);
    }
}

#[test]
fn double_adjoint_round_trip() {
    let tol = Tolerances::default();
    let g = gen_symmetrized_ando::<f64>(4, 3, 8).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    let f2 = fo_tuple(&g.adjoint().adjoint(), &tol).unwrap();
    for (a, b) in f.a.iter().zip(&f2.a) {
        assert!(op_norm(&(a - b)) < 1e-8);
    }
}

#[test]
fn leakage_flags_non_members() {
    let tol = Tolerances::default();
    // A random commuting tuple that is not a Γ₃-contraction: S_i unrelated to P's defect.
    let p = diag(&[cx(1.0, 0.0), cx(0.5, 0.0)]);
    let s1 = diag(&[cx(0.0, 0.0), cx(0.0, 0.0)]);
    let s2 = diag(&[cx(0.9, 0.0), cx(0.0, 0.0)]);
    let g = GammaTuple::new(vec![s1, s2], p).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    assert!(f.leakage_detected);
    assert!(matches!(f.require_clean(), Err(LabError::LeakageDetected { .. })));
}

#[test]
fn vn_on_points_and_oversized_p() {
    let tol = Tolerances::default();
    let pt = symmetrize(&[cx(0.3, 0.1), cx(-0.5, 0.2), cx(0.0, 0.9)]);
    let g = GammaTuple::from_point(&pt);
    match vn_falsify_with(&g, &small_probe(3), &tol).unwrap() {
        VnVerdict::NotFalsified { max_ratio, .. } => assert!(max_ratio <= 1.0 + 1e-6),
        v => panic!("scalar point falsified: {v:?}"),
    }
    let g = GammaTuple::new(vec![M::zeros(2, 2)], M::identity(2, 2) * cx(1.5, 0.0)).unwrap();
    match vn_falsify_with(&g, &small_probe(2), &tol).unwrap() {
        VnVerdict::Falsified { index, ratio, witness } => {
            assert_eq!(index, 1);
            assert_eq!(witness, MultiPoly::coordinate(2, 1));
            assert!((ratio - 1.5).abs() < 1e-9);
        }
        v => panic!("expected falsification, got {v:?}"),
    }
}

#[test]
fn vn_does_not_falsify_ando_tuple() {
    let tol = Tolerances::default();
    let g = gen_symmetrized_ando::<f64>(8, 4, 3).unwrap();
    let v = vn_falsify(&g, VnConfig::default(), &tol).unwrap();
    assert!(!v.is_falsified(), "{v:?}");
}

#[test]
fn probe_sup_of_first_coordinate_is_n() {
    // sup over Γₙ of |s₁| is n, attained at (1, …, 1).
    let probe = small_probe(3);
    assert!((probe.sups[0] - 3.0).abs() < 1e-9);
    assert!((probe.sups[2] - 1.0).abs() < 1e-9);
}

#[test]
fn sufficiency_examples() {
    let tol = Tolerances::default();
    let cfg = VnConfig {
        samples: 30,
        ..VnConfig::default()
    };
    // n = 2: conditions reduce to norm bounds.
    let g = gen_diagonal_normal::<f64>(3, 2, 4).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    let fa = fo_tuple(&g.adjoint(), &tol).unwrap();
    let r = sufficient_condition_check(&g, &f, &fa, 16, cfg, &tol).unwrap();
    assert!(r.certified);
    let g = gen_diagonal_normal::<f64>(4, 3, 5).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    let fa = fo_tuple(&g.adjoint(), &tol).unwrap();
    let r = sufficient_condition_check(&g, &f, &fa, 16, cfg, &tol).unwrap();
    assert!(r.certified, "{r:?}");
    let mut bad = f.clone();
    bad.a[0] *= cx(10.0, 0.0);
    let r = sufficient_condition_check(&g, &bad, &fa, 16, cfg, &tol).unwrap();
    assert!(!r.certified && !r.sigma1.passed);
}

#[test]
fn classification_examples() {
    let tol = Tolerances::default();
    let probe = small_probe(3);
    let g = gen_diagonal_unitary::<f64>(4, 3, 9).unwrap();
    assert_eq!(classify_with(&g, &probe, &tol).unwrap().class, GammaClass::GammaUnitary);
    let g = weighted_shift_tuple(8, 3, 0.5);
    assert_eq!(
        classify_with(&g, &probe, &tol).unwrap().class,
        GammaClass::GammaContractionNotFalsified
    );
    let g = GammaTuple::new(vec![M::identity(2, 2) * cx(2.0, 0.0), M::zeros(2, 2)], M::zeros(2, 2)).unwrap();
    let r = classify_with(&g, &probe, &tol).unwrap();
    assert_eq!(r.class, GammaClass::Falsified);
}

#[test]
fn cnu_split_examples() {
    let tol = Tolerances::default();
    let g = gen_diagonal_unitary::<f64>(3, 3, 1).unwrap();
    let s = cnu_part(&g, &tol).unwrap();
    assert_eq!((s.unitary.dim(), s.cnu.dim()), (3, 0));

    let p = diag(&[cx(1.0, 0.0), cx(0.5, 0.0)]);
    let s1 = diag(&[cx(2.0, 0.0), cx(1.5, 0.0)]);
    let g = GammaTuple::new(vec![s1], p).unwrap();
    let s = cnu_part(&g, &tol).unwrap();
    assert_eq!((s.unitary.dim(), s.cnu.dim()), (1, 1));
    assert!((s.unitary.basis[(0, 0)].norm() - 1.0).abs() < 1e-12);

    let u = gen_diagonal_unitary::<f64>(2, 3, 4).unwrap();
    let e = weighted_shift_tuple(8, 3, 0.5);
    let sum = u.direct_sum(&e).unwrap();
    let s = cnu_part(&sum, &tol).unwrap();
    // Oracle: the projector onto the first two coordinates.
    let want = diag(&[1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0].map(|x| cx(x, 0.0)));
    assert!(op_norm(&(s.unitary.projector() - want)) < 1e-8);
}

#[test]
fn generator_edge_cases() {
    let tol = Tolerances::default();
    for n in 2..6 {
        let g = gen_symmetrized_ando::<f64>(1, n, 3).unwrap();
        let pt = crate::polydisc::GammaPoint::new(g.entries().iter().map(|m| m[(0, 0)]).collect());
        assert!(in_gamma(&pt, &tol).unwrap().inside);
    }
    let g = gen_symmetrized_ando::<f64>(6, 3, 42).unwrap();
    assert!(!vn_falsify_with(&g, &small_probe(3), &tol).unwrap().is_falsified());
    assert!(gen_diagonal_normal::<f64>(0, 3, 1).is_err());
}

#[test]
fn json_round_trip() {
    let g = gen_symmetrized_ando::<f64>(3, 4, 6).unwrap();
    let s = serde_json::to_string(&g).unwrap();
    let back: GammaTuple<f64> = serde_json::from_str(&s).unwrap();
    assert_eq!(back, g);
    let bad = r#"{"n": 3, "S": [], "P": {"rows":1,"cols":1,"data":[[0,0]]}}"#;
    assert!(serde_json::from_str::<GammaTuple<f64>>(bad).is_err());
}

#[test]
fn single_precision_pipeline() {
    let tol = Tolerances::new(1e-4, 1e-6, 1e-3).unwrap();
    let g = gen_symmetrized_ando::<f32>(4, 3, 2).unwrap();
    let f = fo_tuple(&g, &tol).unwrap();
    assert!(f.max_residual() < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_tuples_satisfy_fundamental_equations(dim in 2usize..7, n in 3usize..6, seed in 0u64..1000, diag_kind in any::<bool>()) {
        let tol = Tolerances::default();
        let g = if diag_kind { gen_diagonal_normal::<f64>(dim, n, seed) } else { gen_symmetrized_ando::<f64>(dim, n, seed) }.unwrap();
        let f = fo_tuple(&g, &tol).unwrap();
        for i in 1..n {
            prop_assert!(f.residuals[i - 1] <= 1e-8 * (1.0 + op_norm(g.s(i))));
        }
        prop_assert!(verify_fundamental_identity(&g, &f, &tol).unwrap().max <= 1e-8);
    }

    #[test]
    fn unimodular_diagonals_are_unitary(dim in 1usize..5, n in 2usize..5, seed in 0u64..1000) {
        let tol = Tolerances::default();
        let g = gen_diagonal_unitary::<f64>(dim, n, seed).unwrap();
        let r = classify_with(&g, &small_probe(n), &tol).unwrap();
        prop_assert_eq!(r.class, GammaClass::GammaUnitary);
    }
}
