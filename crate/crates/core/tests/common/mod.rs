#![allow(dead_code)]

pub mod micro;
pub mod qp_ref;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sos_core::energy::{table_violations, SoSEnergy};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random integer-valued submodular table on `k` members, built as a sum of
/// cut, concave-of-count, negated-AND and modular pieces.
pub fn submodular_table(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let size = 1usize << k;
    let mut t = vec![0.0; size];
    let pieces = rng.random_range(1..=4);
    for _ in 0..pieces {
        match rng.random_range(0..5) {
            0 if k >= 2 => {
                let i = rng.random_range(0..k);
                let mut j = rng.random_range(0..k);
                while j == i {
                    j = rng.random_range(0..k);
                }
                let w = rng.random_range(0..=6) as f64;
                for (m, v) in t.iter_mut().enumerate() {
                    if (m >> i & 1) != (m >> j & 1) {
                        *v += w;
                    }
                }
            }
            1 => {
                let subset: usize = rng.random_range(1..size);
                let w = rng.random_range(0..=5) as f64;
                let cap = rng.random_range(1..=k) as u32;
                for (m, v) in t.iter_mut().enumerate() {
                    *v += w * (m & subset).count_ones().min(cap) as f64;
                }
            }
            2 => {
                let subset: usize = rng.random_range(1..size);
                let w = rng.random_range(0..=5) as f64;
                for (m, v) in t.iter_mut().enumerate() {
                    if m & subset == subset {
                        *v -= w;
                    }
                }
            }
            3 => {
                let mods: Vec<f64> = (0..k).map(|_| rng.random_range(-4..=4) as f64).collect();
                for (m, v) in t.iter_mut().enumerate() {
                    *v += (0..k).filter(|p| m >> p & 1 == 1).map(|p| mods[p]).sum::<f64>();
                }
            }
            _ => {
                let c = rng.random_range(-3..=3) as f64;
                t.iter_mut().for_each(|v| *v += c);
            }
        }
    }
    debug_assert!(table_violations(&t, 0.0).is_empty());
    t
}

pub fn random_energy(rng: &mut impl Rng, n: usize, max_cliques: usize, max_k: usize) -> SoSEnergy {
    let mut e = SoSEnergy::new(n);
    for i in 0..n {
        let a = rng.random_range(-6..=6) as f64;
        let b = rng.random_range(-6..=6) as f64;
        e.set_unary(i, a, b).unwrap();
    }
    let count = rng.random_range(0..=max_cliques);
    let vars: Vec<usize> = (0..n).collect();
    for _ in 0..count {
        let k = rng.random_range(1..=max_k.min(n));
        let members: Vec<usize> = vars.choose_multiple(rng, k).copied().collect();
        let table = submodular_table(rng, k);
        e.add_clique(&members, table).unwrap();
    }
    e
}

/// Random QP with a known feasible point. With `slack`, margin rows are
/// random; plain rows always admit the feasible point `w_f`.
pub fn random_qp(rng: &mut impl Rng, slack: bool) -> sos_core::qp::QuadraticProgram {
    use rand_distr::{Distribution, StandardNormal};
    use sos_core::qp::QuadraticProgram;
    let dim = rng.random_range(1..=20);
    let normal = |rng: &mut dyn rand::RngCore| -> f64 { StandardNormal.sample(rng) };
    let w_f: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
    let mut qp = if slack {
        QuadraticProgram::with_slack(dim, rng.random_range(0.1..20.0)).unwrap()
    } else {
        QuadraticProgram::without_slack(dim)
    };
    let plain = rng.random_range(0..=dim + 4);
    for _ in 0..plain {
        let a: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
        let at: f64 = a.iter().zip(&w_f).map(|(x, y)| x * y).sum();
        let h = if slack && rng.random_bool(0.5) {
            0.0f64.min(at)
        } else {
            at - rng.random_range(0.0..1.0)
        };
        qp.add_row(a, false, h).unwrap();
    }
    if slack {
        for _ in 0..rng.random_range(1..=12) {
            let a: Vec<f64> = (0..dim).map(|_| normal(rng)).collect();
            qp.add_row(a, true, rng.random_range(0.0..3.0)).unwrap();
        }
    }
    qp
}

pub fn random_schema(rng: &mut impl Rng) -> sos_core::learn::FeatureSchema {
    use sos_core::learn::{CliqueType, FeatureSchema};
    let types = rng.random_range(1..=2);
    FeatureSchema {
        clique_types: (0..types)
            .map(|t| CliqueType {
                name: format!("t{t}"),
                size: rng.random_range(2..=3),
                phi: "table".into(),
                params: vec![],
            })
            .collect(),
        unary_features: vec!["f0".into(), "f1".into()],
        params: vec![],
    }
}

/// Integer-valued instance on `n` variables for `schema`.
pub fn random_instance(
    rng: &mut impl Rng,
    schema: &sos_core::learn::FeatureSchema,
    n: usize,
) -> sos_core::learn::Instance {
    use sos_core::learn::{CliqueInstance, Instance, SparseRows};
    let vars: Vec<usize> = (0..n).collect();
    let mut cliques = Vec::new();
    for _ in 0..rng.random_range(0..=6) {
        let t = rng.random_range(0..schema.clique_types.len());
        let k = schema.clique_types[t].size;
        if k > n {
            continue;
        }
        cliques.push(CliqueInstance {
            clique_type: t,
            members: vars.choose_multiple(rng, k).copied().collect(),
            phi: rng.random_range(0..=2) as f64,
        });
    }
    let feats = |rng: &mut dyn rand::RngCore| -> SparseRows {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.random_range(0..=3) as f64).collect())
            .collect();
        SparseRows::from_dense(&rows)
    };
    let unary1 = feats(rng);
    let unary0 = if rng.random_bool(0.5) { Some(feats(rng)) } else { None };
    Instance {
        num_vars: n,
        cliques,
        unary1,
        unary0,
        clamps: vec![],
    }
}

/// Integer weights with submodular clique blocks.
pub fn random_weights(rng: &mut impl Rng, schema: &sos_core::learn::FeatureSchema) -> Vec<f64> {
    let mut w = Vec::new();
    for t in &schema.clique_types {
        w.extend(submodular_table(rng, t.size));
    }
    for _ in &schema.unary_features {
        w.push(rng.random_range(-3..=3) as f64);
    }
    w
}

pub fn random_labeling(rng: &mut impl Rng, n: usize) -> sos_core::energy::Labeling {
    sos_core::energy::Labeling::from_bits((0..n).map(|_| rng.random_bool(0.5)).collect())
}

pub fn random_multilabel(
    rng: &mut impl Rng,
    n: usize,
    labels: usize,
    max_cliques: usize,
    max_k: usize,
) -> sos_core::multilabel::MultiLabelEnergy {
    let mut e = sos_core::multilabel::MultiLabelEnergy::new(n, labels).unwrap();
    for i in 0..n {
        let costs: Vec<f64> = (0..labels).map(|_| rng.random_range(-5..=5) as f64).collect();
        e.set_unary(i, &costs).unwrap();
    }
    let vars: Vec<usize> = (0..n).collect();
    for _ in 0..rng.random_range(0..=max_cliques) {
        let k = rng.random_range(1..=max_k.min(n));
        let members: Vec<usize> = vars.choose_multiple(rng, k).copied().collect();
        let tables = (0..labels).map(|_| submodular_table(rng, k)).collect();
        e.add_clique(&members, tables).unwrap();
    }
    e
}

pub fn random_multilabeling(rng: &mut impl Rng, n: usize, labels: usize) -> sos_core::multilabel::MultiLabeling {
    sos_core::multilabel::MultiLabeling((0..n).map(|_| rng.random_range(0..labels)).collect())
}
