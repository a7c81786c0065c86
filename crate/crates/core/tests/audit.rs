use kklab::problem::{BoundClass, ClassKind, IterationParams};
use kklab::verify::{demonstrate_r5_failure, stock_evaluator, verify_remainder_class, AuditParams};
use kklab::Execution;

fn class(kind: ClassKind) -> BoundClass {
    BoundClass::new(kind).unwrap()
}

#[test]
fn stock_classes_are_stable() {
    let params = AuditParams::default();
    for kind in [ClassKind::R1, ClassKind::R2, ClassKind::R3, ClassKind::R4, ClassKind::R5] {
        let rep = verify_remainder_class(stock_evaluator(class(kind)), class(kind), &params, 12, 3, Execution::default()).unwrap();
        assert!(rep.stable(), "{kind:?}: {:?}", rep.per_lambda);
        assert!(rep.per_k_constants.iter().all(|c| c.is_finite() && *c > 0.0));
    }
}

#[test]
fn higher_derivative_class_is_stable() {
    let r6 = BoundClass::r6(2, 1).unwrap();
    let params = AuditParams { k_max: 1, ..AuditParams::default() };
    let rep = verify_remainder_class(stock_evaluator(r6), r6, &params, 10, 5, Execution::default()).unwrap();
    assert!(rep.stable(), "{:?}", rep.per_lambda);
}

#[test]
fn misdeclared_self_interaction_is_unstable() {
    let rep = verify_remainder_class(
        stock_evaluator(class(ClassKind::R5)),
        class(ClassKind::R2),
        &AuditParams::default(),
        12,
        3,
        Execution::default(),
    )
    .unwrap();
    assert!(!rep.stable());
    for k in 0..=2 {
        let row: Vec<f64> = rep.per_lambda.iter().map(|r| r[k]).collect();
        assert!(row.windows(2).all(|w| w[1] > 1.5 * w[0]), "{row:?}");
    }
}

#[test]
fn audits_are_reproducible_and_schedule_independent() {
    let c = class(ClassKind::R3);
    let p = AuditParams::default();
    let a = verify_remainder_class(stock_evaluator(c), c, &p, 16, 9, Execution::Sequential).unwrap();
    let b = verify_remainder_class(stock_evaluator(c), c, &p, 16, 9, Execution::Parallel).unwrap();
    let again = verify_remainder_class(stock_evaluator(c), c, &p, 16, 9, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(b, again);
    let other = verify_remainder_class(stock_evaluator(c), c, &p, 16, 10, Execution::Parallel).unwrap();
    assert_ne!(a, other);
}

#[test]
fn self_interaction_stalls_decay() {
    let p = IterationParams::new(64, 2.0, 8, 2, 6);
    let cmp = demonstrate_r5_failure(&p, 0.1, 1.0, 2).unwrap();
    assert!(!cmp.no_effect);
    assert!((cmp.clean.slope / -(128f64.ln()) - 1.0).abs() < 0.15, "{:?}", cmp.clean);
    assert!(cmp.slope_ratio() < 0.5, "{cmp:?}");
}

#[test]
fn doubling_lambda_worsens_only_the_self_interaction_run() {
    let base = demonstrate_r5_failure(&IterationParams::new(64, 2.0, 8, 2, 6), 0.1, 1.0, 2).unwrap();
    let doubled = demonstrate_r5_failure(&IterationParams::new(128, 1.0, 8, 2, 6), 0.1, 1.0, 2).unwrap();
    assert!(doubled.with_r5.slope > base.with_r5.slope);
    assert!((doubled.clean.slope / base.clean.slope - 1.0).abs() < 0.15);
}
