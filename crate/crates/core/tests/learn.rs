mod common;

use common::micro::{enumerate_rows, full_one_slack, micro_problem, n_slack_dual};
use sos_core::energy::Labeling;
use sos_core::learn::{
    hamming_loss, materialize_energy, psi, train_structured, CliqueInstance, CliqueType, FeatureSchema, Instance,
    SosLearner, SparseRows, TrainConfig,
};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn psi_matches_materialized_energy() {
    let mut rng = common::rng(31);
    for _ in 0..300 {
        let schema = common::random_schema(&mut rng);
        let x = common::random_instance(&mut rng, &schema, 6);
        let w: Vec<f64> = (0..schema.dim()).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let e = materialize_energy(&schema, &w, &x).unwrap();
        for _ in 0..5 {
            let y = common::random_labeling(&mut rng, 6);
            let direct = e.evaluate(&y).unwrap();
            assert!((dot(&w, &psi(&schema, &x, &y).unwrap()) - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }
}

#[test]
fn submodular_blocks_give_submodular_energies() {
    let mut rng = common::rng(32);
    for _ in 0..300 {
        let schema = common::random_schema(&mut rng);
        let x = common::random_instance(&mut rng, &schema, 6);
        let w = common::random_weights(&mut rng, &schema);
        assert_eq!(schema.max_submodularity_violation(&w), 0.0);
        materialize_energy(&schema, &w, &x).unwrap().check_submodular(0.0).unwrap();
        assert_eq!(materialize_energy(&schema, &vec![0.0; schema.dim()], &x).unwrap().scale(), 1.0);
    }
}

#[test]
fn loss_augmented_inference_matches_enumeration() {
    let mut rng = common::rng(33);
    for case in 0..500 {
        let schema = common::random_schema(&mut rng);
        let n = 1 + case % 8;
        let x = common::random_instance(&mut rng, &schema, n);
        let w = common::random_weights(&mut rng, &schema);
        let y = common::random_labeling(&mut rng, n);
        let mut learner = SosLearner::new(schema.clone());
        learner.normalize_loss = false;
        let (y_hat, value) = learner.loss_augmented_inference(&w, &x, &y).unwrap();
        let e = materialize_energy(&schema, &w, &x).unwrap();
        let best = (0..1u64 << n)
            .map(|m| {
                let z = Labeling::from_mask(n, m);
                e.evaluate(&z).unwrap() - hamming_loss(&y, &z, false).unwrap()
            })
            .fold(f64::INFINITY, f64::min);
        assert_eq!(value, best, "case {case}");
        assert_eq!(e.evaluate(&y_hat).unwrap() - hamming_loss(&y, &y_hat, false).unwrap(), best);
    }
}

#[test]
fn huge_margin_reproduces_truth() {
    let schema = FeatureSchema {
        clique_types: vec![],
        unary_features: vec!["sign".into()],
        params: vec![],
    };
    let y = Labeling::from_bitstring("0110").unwrap();
    let x = Instance {
        num_vars: 4,
        cliques: vec![],
        unary1: SparseRows::from_dense(&[vec![1.0], vec![-1.0], vec![-1.0], vec![1.0]]),
        unary0: None,
        clamps: vec![],
    };
    let learner = SosLearner::new(schema);
    let (y_hat, _) = learner.loss_augmented_inference(&[10.0], &x, &y).unwrap();
    assert_eq!(y_hat, y);
    assert_eq!(learner.predict(&[10.0], &x).unwrap(), y);
}

#[test]
fn one_slack_matches_enumerated_qps() {
    let mut rng = common::rng(34);
    for case in 0..12 {
        let n_examples = 1 + case % 2;
        let (learner, data) = micro_problem(&mut rng, n_examples);
        let c = [0.5, 2.0, 10.0][case % 3];
        let cfg = TrainConfig {
            c,
            eps: 1e-9,
            ..TrainConfig::default()
        };
        let (w, report) = learner.train(&data, &cfg).unwrap();
        assert!(report.final_violation <= report.xi + cfg.eps);
        let rows = enumerate_rows(&learner, &data);
        let one = full_one_slack(&learner, &rows, c);
        let nslack = n_slack_dual(&learner, &rows, c);
        let tol = 1e-5 * (1.0 + one.abs());
        assert!((report.objective - one).abs() <= tol, "case {case}: {} vs {one}", report.objective);
        assert!((nslack - one).abs() <= tol, "case {case}: n-slack {nslack} vs {one}");
        assert!(learner.schema.max_submodularity_violation(&w) <= 1e-6);
    }
}

#[test]
fn separable_pair_is_learned_exactly() {
    // Two variables that always agree, with the unary feature pointing at the
    // label: the learned model reproduces the truth.
    let schema = FeatureSchema {
        clique_types: vec![CliqueType {
            name: "pair".into(),
            size: 2,
            phi: "const".into(),
            params: vec![],
        }],
        unary_features: vec!["evidence".into()],
        params: vec![],
    };
    let x = Instance {
        num_vars: 2,
        cliques: vec![CliqueInstance {
            clique_type: 0,
            members: vec![0, 1],
            phi: 1.0,
        }],
        unary1: SparseRows::from_dense(&[vec![-1.0], vec![1.0]]),
        unary0: None,
        clamps: vec![],
    };
    let y = Labeling::from_bitstring("10").unwrap();
    let mut learner = SosLearner::new(schema);
    learner.normalize_loss = false;
    let cfg = TrainConfig {
        c: 100.0,
        eps: 1e-3,
        ..TrainConfig::default()
    };
    let (w, report) = learner.train(&[(x.clone(), y.clone())], &cfg).unwrap();
    assert!(report.xi <= cfg.eps);
    assert_eq!(learner.predict(&w, &x).unwrap(), y);
    let e = materialize_energy(&learner.schema, &w, &x).unwrap();
    let (_, bf) = e.brute_force_minimize().unwrap();
    assert_eq!(bf, y);
}

#[test]
fn large_epsilon_stops_quickly() {
    let mut rng = common::rng(35);
    let (learner, data) = micro_problem(&mut rng, 2);
    let cfg = TrainConfig {
        eps: 10.0,
        ..TrainConfig::default()
    };
    let (_, report) = learner.train(&data, &cfg).unwrap();
    assert!(report.iterations() <= 2);
}

#[test]
fn margin_holds_after_training() {
    let mut rng = common::rng(36);
    for _ in 0..5 {
        let (learner, data) = micro_problem(&mut rng, 2);
        let cfg = TrainConfig {
            c: 5.0,
            eps: 1e-4,
            ..TrainConfig::default()
        };
        let (w, report) = learner.train(&data, &cfg).unwrap();
        let objectives: Vec<f64> = report.log.iter().map(|l| l.objective).collect();
        assert!(objectives.windows(2).all(|p| p[1] >= p[0] - 1e-9 * (1.0 + p[0].abs())));
        // Constraint (3) with the shared slack, averaged over the examples.
        for _ in 0..50 {
            let mut lhs = 0.0;
            let mut rhs = 0.0;
            for (x, y) in &data {
                let z = common::random_labeling(&mut rng, x.num_vars);
                let d: Vec<f64> = psi(&learner.schema, x, &z)
                    .unwrap()
                    .iter()
                    .zip(psi(&learner.schema, x, y).unwrap())
                    .map(|(a, b)| a - b)
                    .collect();
                lhs += dot(&w, &d) / 2.0;
                rhs += hamming_loss(y, &z, false).unwrap() / 2.0;
            }
            assert!(lhs >= rhs - report.xi - cfg.eps - 1e-5);
        }
    }
}

#[test]
fn generic_trainer_rejects_bad_config() {
    let mut rng = common::rng(37);
    let (learner, data) = micro_problem(&mut rng, 1);
    let bad = TrainConfig {
        eps: 0.0,
        ..TrainConfig::default()
    };
    assert!(train_structured(&learner, &data, &bad).is_err());
    assert!(learner.train(&[], &TrainConfig::default()).is_err());
}
