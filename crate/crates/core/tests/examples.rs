use viabilitykit_core::dynamics::{Guard, Piece};
use viabilitykit_core::verify::{theorem_verdict, Check, VerdictKind};
use viabilitykit_core::{BoxRegion, Expr, PolytopeMap, SetExpr, System, VerifyConfig};

fn corner_under_parabola() -> System {
    System::new(
        PolytopeMap::single(2, &[&["1", "0"]]).unwrap(),
        SetExpr::sublevel(2, "x2 - x1^2").unwrap(),
        SetExpr::intersection(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "-x2").unwrap(),
        ])
        .unwrap(),
        BoxRegion::cube(2, 1.0),
    )
    .unwrap()
}

fn tangential_meet() -> System {
    let f = PolytopeMap::new(
        2,
        vec![
            Piece {
                guard: Guard::parse("x1 <= 0").unwrap(),
                vertices: vec![vec![Expr::constant(1.0), Expr::constant(0.0)]],
            },
            Piece {
                guard: Guard::always(),
                vertices: vec![vec![Expr::constant(1.0), Expr::parse("0 - x1").unwrap()]],
            },
        ],
    )
    .unwrap();
    System::new(
        f,
        SetExpr::union(vec![
            SetExpr::sublevel(2, "x1").unwrap(),
            SetExpr::sublevel(2, "x2 + x1^2/2").unwrap(),
        ])
        .unwrap(),
        SetExpr::sublevel(2, "-x2").unwrap(),
        BoxRegion::cube(2, 1.0),
    )
    .unwrap()
}

fn origin(x: &[f64]) -> bool {
    x.iter().all(|v| v.abs() < 1e-3)
}

#[test]
fn corner_fails_the_first_assumption_and_escapes() {
    let rep = theorem_verdict(&corner_under_parabola(), &VerifyConfig::default());
    assert!(rep.nagumo.check.holds());
    assert_eq!(rep.critical_set.points.len(), 1);
    assert!(origin(&rep.critical_set.points[0]));
    assert!(matches!(&rep.assumptions.a1, Check::Fails { x, .. } if origin(x)));
    assert!(rep.assumptions.a2.holds());
    assert!(rep.assumptions.a3.check.holds());
    assert_eq!(rep.verdict.kind, VerdictKind::Inapplicable);
    assert!(rep.verdict.empirical_violation);
    assert_eq!(rep.verdict.exit_code, 1);
    assert!(rep.star_consistency.inconsistent.is_empty());
}

#[test]
fn tangential_meet_fails_transversality_and_escapes() {
    let rep = theorem_verdict(&tangential_meet(), &VerifyConfig::default());
    assert!(rep.nagumo.check.holds());
    assert!(rep.assumptions.a1.holds());
    assert!(rep.assumptions.a2.holds());
    assert!(rep.assumptions.a3.check.fails());
    assert_eq!(rep.verdict.kind, VerdictKind::Inapplicable);
    assert_eq!(rep.verdict.exit_code, 1);
    // The escaping solution starts along ∂K outside int(C): its initial
    // speed (1, 0) is tangent to ∂K \ int(C) but not to ∂K ∩ C.
    let f = rep.fphi.iter().find(|f| origin(&f.x0)).unwrap();
    assert_eq!(f.centers.len(), 1);
    assert!((f.centers[0][0] - 1.0).abs() < 1e-3 && f.centers[0][1].abs() < 1e-3);
    assert_eq!(f.in_boundary_minus_int_c, vec![true]);
    assert_eq!(f.in_boundary_meet_c, vec![false]);
}

#[test]
fn rotating_disk_is_invariant() {
    let sys = System::new(
        PolytopeMap::single(2, &[&["0 - x2", "x1"]]).unwrap(),
        SetExpr::sublevel(2, "x1^2 + x2^2 - 4").unwrap(),
        SetExpr::sublevel(2, "x1^2 + x2^2 - 1").unwrap(),
        BoxRegion::cube(2, 2.5),
    )
    .unwrap();
    let cfg = VerifyConfig {
        h: 0.01,
        horizon: 1.0,
        ..VerifyConfig::default()
    };
    let rep = theorem_verdict(&sys, &cfg);
    assert!(rep.critical_set.points.is_empty());
    assert_eq!(rep.verdict.kind, VerdictKind::Invariant);
    assert_eq!(rep.verdict.exit_code, 0);
}
