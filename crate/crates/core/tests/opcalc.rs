use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfcw::model::{g1, tricritical_field, ModelParams, ScalingCase};
use rfcw::opcalc::*;
use rfcw::verify::{
    make_admissible, random_extended_ops, random_standard_ops, structural_failures,
};
use rfcw::Error;

fn op(kind: OpKind, k: u32, m: u32, a: f64) -> OperatorSpec {
    OperatorSpec::new(kind, k, m, a).unwrap()
}

#[test]
fn operators_act_on_monomials() {
    // x²·y·ψ′
    let e = VExpression::from_terms(vec![VTerm::new(1.0, 2, 1, 1)]);
    // 3·x·y·∂ₓ: 3(2x²y² ψ′ + x³y² ψ″)
    let got = apply_operator(&op(OpKind::Plus, 2, 2, 3.0), &e);
    assert_eq!(
        got.terms(),
        &[VTerm::new(6.0, 2, 2, 1), VTerm::new(3.0, 3, 2, 2)]
    );
    // 2·x²·∂_y: 2x⁴ψ′
    let got = apply_operator(&op(OpKind::Minus, 2, 2, 2.0), &e);
    assert_eq!(got.terms(), &[VTerm::new(2.0, 4, 0, 1)]);
    // x³·∂ₓ: 2x⁴yψ′ + x⁵yψ″
    let got = apply_operator(&op(OpKind::Zero, 3, 3, 1.0), &e);
    assert_eq!(
        got.terms(),
        &[VTerm::new(2.0, 4, 1, 1), VTerm::new(1.0, 5, 1, 2)]
    );
    // 5·x²·y·∂_y: 5x⁴yψ′
    let got = apply_operator(&op(OpKind::One, 3, 3, 5.0), &e);
    assert_eq!(got.terms(), &[VTerm::new(5.0, 4, 1, 1)]);
}

#[test]
fn projections_split_by_y() {
    let e = VExpression::from_terms(vec![
        VTerm::new(2.0, 1, 0, 1),
        VTerm::new(4.0, 1, 2, 0),
        VTerm::new(3.0, 0, 1, 1),
    ]);
    assert_eq!(project_p0(&e).terms(), &[VTerm::new(2.0, 1, 0, 1)]);
    let p = project_p(&e, 2.0).unwrap();
    assert_eq!(
        p.terms(),
        &[VTerm::new(-1.5, 0, 1, 1), VTerm::new(-1.0, 1, 2, 0)]
    );
    assert!(matches!(project_p(&e, 0.0), Err(Error::SingularProjection)));
}

#[test]
fn like_terms_merge_and_cancel() {
    let e = VExpression::from_terms(vec![
        VTerm::new(1.0, 1, 0, 1),
        VTerm::new(2.0, 1, 0, 1),
        VTerm::new(1e3, 0, 0, 0),
    ]);
    assert_eq!(e.coefficient(1, 0, 1), 3.0);
    let z = e.sub(&e);
    assert!(z.is_zero());
    assert_eq!(e.max_dpsi(), 1);
}

#[test]
fn operator_spec_rules() {
    assert!(OperatorSpec::new(OpKind::Plus, 3, 3, 1.0).is_err());
    assert!(OperatorSpec::new(OpKind::Zero, 2, 2, 1.0).is_err());
    assert!(OperatorSpec::new(OpKind::One, 2, 3, 1.0).is_err());
    assert!(OperatorSpec::new(OpKind::Zero, 1, 1, 0.5).is_err());
    assert!(OperatorSpec::new(OpKind::Zero, 1, 1, 0.0).is_ok());
    assert!(OperatorSpec::new(OpKind::One, 6, 5, 1.0).is_err());
}

#[test]
fn expression_json_is_term_array() {
    let e = VExpression::from_terms(vec![VTerm::new(-0.5, 3, 0, 1), VTerm::new(2.0, 1, 1, 2)]);
    let s = serde_json::to_string(&e).unwrap();
    assert_eq!(s, "[[-0.5,3.0,0.0,1.0],[2.0,1.0,1.0,2.0]]");
    let back: VExpression = serde_json::from_str(&s).unwrap();
    assert_eq!(back, e);
    assert!(serde_json::from_str::<VExpression>("[[1.0,0.5,0.0,0.0]]").is_err());
}

#[test]
fn critical_curve_cubic_coefficient() {
    // cosh(β g1) = √β on the curve
    for beta in [1.1, 1.25, 2.0, 3.0] {
        let p = ModelParams::new(beta, g1(beta).unwrap()).unwrap();
        let res = perturb(&build_standard_q(&p), 2).unwrap();
        let want = 2.0 / 3.0 * beta * (2.0 * beta - 3.0) * beta.sqrt();
        let got = res.drift_poly[&3];
        assert!(
            (got - want).abs() < 1e-12 * want.abs(),
            "beta={beta}: {got} vs {want}"
        );
        assert!(res.warnings.is_empty());
    }
    assert!(
        (perturb(
            &build_standard_q(&ModelParams::new(2.0, g1(2.0).unwrap()).unwrap()),
            2
        )
        .unwrap()
        .drift_poly[&3]
            - 4.0 * 2f64.sqrt() / 3.0)
            .abs()
            < 1e-12
    );
}

#[test]
fn tricritical_layers_vanish_up_to_fourth_order() {
    let p = ModelParams::new(1.5, tricritical_field()).unwrap();
    let res = perturb(&build_standard_q(&p), 4).unwrap();
    assert!(res.p0(2).is_zero());
    assert_eq!(res.drift_poly.keys().copied().collect::<Vec<_>>(), vec![5]);
    assert!((res.drift_poly[&5] + 0.9 * 1.5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn perturb_rejects_bad_orders() {
    let ops = random_standard_ops(&mut ChaCha8Rng::seed_from_u64(1));
    assert!(matches!(perturb(&ops, 3), Err(Error::Precondition(_))));
    let empty = OperatorSet::default();
    assert!(matches!(perturb(&empty, 2), Err(Error::SingularProjection)));
}

#[test]
fn closed_form_refuses_when_hypothesis_fails() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let ops = random_standard_ops(&mut rng);
    assert!(matches!(
        conjecture_drift(&ops, 4),
        Err(Error::Precondition(_))
    ));
    let mut adm = ops.clone();
    make_admissible(&mut adm);
    let want = conjecture_drift(&adm, 4).unwrap();
    let got = perturb(&adm, 4).unwrap().drift_poly[&5];
    assert!((got - want).abs() < 1e-10 * want.abs().max(1.0));
}

#[test]
fn extended_closed_form_rejects_mixed_parity() {
    let mut ops = random_extended_ops(&mut ChaCha8Rng::seed_from_u64(3));
    make_admissible(&mut ops);
    ops.ops.push(OperatorSpec {
        kind: OpKind::Zero,
        k: 4,
        m: 1,
        a: 0.3,
    });
    assert!(matches!(
        conjecture_drift_extended(&ops, 4),
        Err(Error::Precondition(_))
    ));
}

/// 2β/cosh(βB) − 2cosh(βB)
fn linear_rate(beta: f64, b: f64) -> f64 {
    2.0 * beta / (beta * b).cosh() - 2.0 * (beta * b).cosh()
}

#[test]
fn zero_order_corrections_match_finite_differences() {
    let beta = 1.25;
    let b = g1(beta).unwrap();
    let (k, th) = (0.7, -0.4);
    let h = 1e-4;
    let f = |s: f64| linear_rate(beta + s * k, b + s * th);
    let first = (f(h) - f(-h)) / (2.0 * h);
    let second = (f(h) - 2.0 * f(0.0) + f(-h)) / (2.0 * h * h);

    let p2 = ModelParams::new(beta, b)
        .unwrap()
        .with_perturbation(k, th, ScalingCase::BnMinus2)
        .unwrap();
    let ops = build_extended_q(&p2, CurveConstraint::Free).unwrap();
    assert!(
        (ops.coeff(OpKind::Zero, 3, 1) - first).abs() < 1e-7,
        "{} vs {first}",
        ops.coeff(OpKind::Zero, 3, 1)
    );
    assert!(
        (ops.coeff(OpKind::Zero, 5, 1) - second).abs() < 1e-5,
        "{} vs {second}",
        ops.coeff(OpKind::Zero, 5, 1)
    );

    let on = build_extended_q(&p2, CurveConstraint::OnCurve).unwrap();
    assert_eq!(on.coeff(OpKind::Zero, 3, 1), 0.0);
    assert_eq!(on.coeff(OpKind::Zero, 5, 1), 0.0);

    let p4 = p2.with_perturbation(k, th, ScalingCase::BnMinus4).unwrap();
    let ops4 = build_extended_q(&p4, CurveConstraint::Free).unwrap();
    assert!((ops4.coeff(OpKind::Zero, 5, 1) - first).abs() < 1e-7);
    assert_eq!(ops4.coeff(OpKind::Zero, 3, 1), 0.0);

    let none = ModelParams::new(beta, b).unwrap();
    assert!(matches!(
        build_extended_q(&none, CurveConstraint::Free),
        Err(Error::Precondition(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn second_order_drift_formula(seed in any::<u64>()) {
        let ops = random_standard_ops(&mut ChaCha8Rng::seed_from_u64(seed));
        let res = perturb(&ops, 2).unwrap();
        let want = ops.coeff(OpKind::Zero, 3, 3)
            - ops.coeff(OpKind::Minus, 2, 2) * ops.coeff(OpKind::Plus, 2, 2) / ops.a11();
        let got = res.drift_poly.get(&3).copied().unwrap_or(0.0);
        prop_assert!((got - want).abs() < 1e-12 * want.abs().max(1.0));
        prop_assert!(res.warnings.is_empty());
    }

    #[test]
    fn standard_structure(seed in any::<u64>()) {
        let mut ops = random_standard_ops(&mut ChaCha8Rng::seed_from_u64(seed));
        make_admissible(&mut ops);
        let fail = structural_failures(&ops, false).unwrap();
        prop_assert!(fail.is_none(), "{:?}", fail);
    }

    #[test]
    fn extended_structure(seed in any::<u64>()) {
        let mut ops = random_extended_ops(&mut ChaCha8Rng::seed_from_u64(seed));
        make_admissible(&mut ops);
        let fail = structural_failures(&ops, true).unwrap();
        prop_assert!(fail.is_none(), "{:?}", fail);
    }

    #[test]
    fn p_inverts_fast_relaxation(a11 in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0], c in -5.0f64..5.0, xp in 0u32..5, yp in 1u32..4, d in 0u32..4) {
        let e = VExpression::from_terms(vec![VTerm::new(c, xp, yp, d)]);
        let back = apply_operator(&op(OpKind::One, 1, 1, a11), &project_p(&e, a11).unwrap());
        // Q₁¹ P = −id on the y-dependent part
        prop_assert!(back.add(&e).max_abs_coeff() < 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn weighted_degree_rises_by_m_minus_one(kind_ix in 0usize..4, c in -3.0f64..3.0, xp in 0u32..4, yp in 0u32..3, d in 0u32..3) {
        let (kind, k, m) = [(OpKind::Plus, 4, 2), (OpKind::Minus, 4, 4), (OpKind::Zero, 5, 3), (OpKind::One, 3, 1)][kind_ix];
        let e = VExpression::from_terms(vec![VTerm::new(c, xp, yp, d)]);
        let out = apply_operator(&op(kind, k, m, 1.0), &e);
        let base = xp as i64 + yp as i64 - d as i64;
        for t in out.terms() {
            prop_assert_eq!(t.xpow as i64 + t.ypow as i64 - t.dpsi as i64, base + m as i64 - 1);
        }
    }
}
