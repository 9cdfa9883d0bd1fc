mod common;

use rand::Rng;
use sos_core::energy::Labeling;
use sos_core::flow::{self, FlowOptions};
use sos_core::learn::{train_structured, CliqueInstance, CliqueType, FeatureSchema, Instance, SparseRows, TrainConfig};
use sos_core::multilabel::{
    alpha_expansion, expansion_subproblem, pn_potts, MultiLabelEnergy, MultiLabelLearner, MultiLabeling,
};

fn switched(y: &MultiLabeling, s: &Labeling, alpha: usize) -> MultiLabeling {
    let mut z = y.clone();
    for i in s.members() {
        z.0[i] = alpha;
    }
    z
}

#[test]
fn expansion_tables_are_submodular() {
    let mut rng = common::rng(41);
    for _ in 0..1000 {
        let e = common::random_multilabel(&mut rng, 5, 3, 3, 3);
        let y = common::random_multilabeling(&mut rng, 5, 3);
        let alpha = rng.random_range(0..3);
        let b = expansion_subproblem(&e, &y, alpha).unwrap();
        b.check_submodular(0.0).unwrap();
    }
}

#[test]
fn expansion_energy_equals_switched_energy() {
    let mut rng = common::rng(42);
    for _ in 0..200 {
        let e = common::random_multilabel(&mut rng, 6, 3, 4, 4);
        let y = common::random_multilabeling(&mut rng, 6, 3);
        let alpha = rng.random_range(0..3);
        let b = expansion_subproblem(&e, &y, alpha).unwrap();
        for m in 0..1u64 << 6 {
            let s = Labeling::from_mask(6, m);
            assert_eq!(b.evaluate(&s).unwrap(), e.evaluate(&switched(&y, &s, alpha)).unwrap());
        }
    }
}

#[test]
fn potts_matches_definition_exhaustively() {
    for size in 1..=3 {
        for labels in 1..=3usize {
            let lambda: Vec<f64> = (0..labels).map(|l| l as f64 + 0.5).collect();
            let lambda_max = 7.0;
            let tables = pn_potts(size, &lambda, lambda_max).unwrap();
            let mut e = MultiLabelEnergy::new(size, labels).unwrap();
            e.add_clique(&(0..size).collect::<Vec<_>>(), tables).unwrap();
            let mut y = vec![0usize; size];
            loop {
                let potts = if y.iter().all(|&l| l == y[0]) { lambda[y[0]] } else { lambda_max };
                assert_eq!(e.evaluate(&MultiLabeling(y.clone())).unwrap() + lambda_max, potts);
                let mut i = 0;
                while i < size {
                    y[i] += 1;
                    if y[i] < labels {
                        break;
                    }
                    y[i] = 0;
                    i += 1;
                }
                if i == size {
                    break;
                }
            }
        }
    }
}

#[test]
fn potts_expansion_move_is_exact() {
    let mut rng = common::rng(43);
    for _ in 0..100 {
        let n = 10;
        let labels = 3;
        let mut e = MultiLabelEnergy::new(n, labels).unwrap();
        for i in 0..n {
            let costs: Vec<f64> = (0..labels).map(|_| rng.random_range(0..=4) as f64).collect();
            e.set_unary(i, &costs).unwrap();
        }
        for start in [0, 3, 6] {
            let lambda: Vec<f64> = (0..labels).map(|_| rng.random_range(0..=3) as f64).collect();
            e.add_clique(&[start, start + 1, start + 2, start + 3], pn_potts(4, &lambda, 5.0).unwrap())
                .unwrap();
        }
        let y = common::random_multilabeling(&mut rng, n, labels);
        let mut counts = [0; 3];
        y.0.iter().for_each(|&l| counts[l] += 1);
        let alpha = (0..labels).max_by_key(|&l| (counts[l], std::cmp::Reverse(l))).unwrap();
        let b = expansion_subproblem(&e, &y, alpha).unwrap();
        let r = flow::minimize(&b).unwrap();
        let best = (0..1u64 << n)
            .map(|m| e.evaluate(&switched(&y, &Labeling::from_mask(n, m), alpha)).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.min_value, best);
    }
}

#[test]
fn expansion_trace_decreases_and_never_worsens() {
    let mut rng = common::rng(44);
    for _ in 0..300 {
        let e = common::random_multilabel(&mut rng, 7, 3, 6, 4);
        let y0 = common::random_multilabeling(&mut rng, 7, 3);
        let start = e.evaluate(&y0).unwrap();
        let r = alpha_expansion(&e, Some(y0), &FlowOptions::default()).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] < w[0]));
        assert!(r.energy <= start);
        assert_eq!(e.evaluate(&r.labeling).unwrap(), r.energy);
        // A local optimum is returned unchanged after one cycle.
        let again = alpha_expansion(&e, Some(r.labeling.clone()), &FlowOptions::default()).unwrap();
        assert_eq!(again.labeling, r.labeling);
        assert_eq!(again.cycles, 1);
    }
}

#[test]
fn two_labels_reach_the_global_minimum() {
    let mut rng = common::rng(45);
    for _ in 0..300 {
        let e = common::random_multilabel(&mut rng, 9, 2, 8, 4);
        let r = alpha_expansion(&e, None, &FlowOptions::default()).unwrap();
        let (best, _) = e.brute_force_minimize().unwrap();
        assert_eq!(r.energy, best);
    }
}

#[test]
fn multilabel_training_converges_on_a_toy_problem() {
    let schema = FeatureSchema {
        clique_types: vec![CliqueType {
            name: "pair".into(),
            size: 2,
            phi: "const".into(),
            params: vec![],
        }],
        unary_features: vec!["a".into(), "b".into(), "c".into()],
        params: vec![],
    };
    let learner = MultiLabelLearner::new(schema, 3);
    let mut rng = common::rng(46);
    let mut data = Vec::new();
    for _ in 0..3 {
        let n = 6;
        let y = common::random_multilabeling(&mut rng, n, 3);
        let rows: Vec<Vec<f64>> = y
            .0
            .iter()
            .map(|&l| (0..3).map(|f| if f == l { 1.0 } else { 0.0 }).collect())
            .collect();
        let x = Instance {
            num_vars: n,
            cliques: (0..n - 1)
                .map(|i| CliqueInstance {
                    clique_type: 0,
                    members: vec![i, i + 1],
                    phi: 1.0,
                })
                .collect(),
            unary1: SparseRows::from_dense(&rows),
            unary0: None,
            clamps: vec![],
        };
        data.push((x, y));
    }
    let cfg = TrainConfig {
        c: 50.0,
        eps: 1e-3,
        ..TrainConfig::default()
    };
    let (w, report) = train_structured(&learner, &data, &cfg).unwrap();
    assert!(report.approximate_separation);
    assert!(report.max_materialized_violation <= 1e-6);
    for (x, y) in &data {
        assert_eq!(&learner.predict(&w, x).unwrap(), y);
    }
}
