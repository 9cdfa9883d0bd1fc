mod common;

use rand::seq::SliceRandom;
use sos_core::qp::{QpOptions, QpSolution, QuadraticProgram};

fn assert_kkt(qp: &QuadraticProgram, s: &QpSolution) {
    let scale = 1.0 + s.objective.abs();
    assert!(s.primal_residual <= 1e-6 * scale, "primal {}", s.primal_residual);
    assert!(s.dual_residual <= 1e-6 * scale, "dual {}", s.dual_residual);
    assert!(s.complementarity <= 1e-6 * scale, "comp {}", s.complementarity);
    assert!(s.multipliers.iter().all(|&l| l >= 0.0));
    assert!(s.duality_gap().abs() <= 1e-6 * scale, "gap {}", s.duality_gap());
    assert_eq!(s.multipliers.len(), qp.rows().len());
}

#[test]
fn agrees_with_dual_reference() {
    let mut rng = common::rng(21);
    for case in 0..240 {
        let qp = common::random_qp(&mut rng, case % 4 != 0);
        let s = qp.solve(&QpOptions::default()).unwrap_or_else(|e| panic!("case {case}: {e}\n{}", qp.dump()));
        assert_kkt(&qp, &s);
        let r = common::qp_ref::solve(&qp, 20_000);
        let rel = (s.objective - r.dual_value).abs() / (1.0 + s.objective.abs());
        assert!(rel <= 1e-5, "case {case}: active set {} vs reference {}", s.objective, r.dual_value);
    }
}

#[test]
fn objective_grows_as_rows_are_added() {
    let mut rng = common::rng(22);
    for _ in 0..50 {
        let full = common::random_qp(&mut rng, true);
        let mut qp = QuadraticProgram::with_slack(full.dim(), full.slack_cost().unwrap()).unwrap();
        let mut last = f64::NEG_INFINITY;
        let mut warm: Option<QpSolution> = None;
        for r in &full.rows()[1..] {
            qp.add_row(r.a.clone(), r.slack, r.h).unwrap();
            let s = qp.solve_warm(&QpOptions::default(), warm.as_ref()).unwrap();
            assert_kkt(&qp, &s);
            let cold = qp.solve(&QpOptions::default()).unwrap();
            assert!((s.objective - cold.objective).abs() <= 1e-7 * (1.0 + cold.objective.abs()));
            assert!(s.objective >= last - 1e-9 * (1.0 + last.abs()));
            last = s.objective;
            warm = Some(s);
        }
    }
}

#[test]
fn row_order_does_not_matter() {
    let mut rng = common::rng(23);
    for _ in 0..50 {
        let qp = common::random_qp(&mut rng, true);
        let mut rows = qp.rows()[1..].to_vec();
        rows.shuffle(&mut rng);
        let mut shuffled = QuadraticProgram::with_slack(qp.dim(), qp.slack_cost().unwrap()).unwrap();
        for r in rows {
            shuffled.add_row(r.a, r.slack, r.h).unwrap();
        }
        let a = qp.solve(&QpOptions::default()).unwrap();
        let b = shuffled.solve(&QpOptions::default()).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-7 * (1.0 + a.objective.abs()));
        for (x, y) in a.w.iter().zip(&b.w) {
            assert!((x - y).abs() <= 1e-5);
        }
    }
}
