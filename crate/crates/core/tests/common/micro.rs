//! Micro learning problems small enough to enumerate every labeling, and
//! the full n-slack and 1-slack QPs built from them.

use rand::Rng;
use sos_core::energy::Labeling;
use sos_core::learn::{hamming_loss, psi, CliqueInstance, CliqueType, FeatureSchema, Instance, SosLearner};
use sos_core::qp::{QpOptions, QuadraticProgram};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn micro_problem(rng: &mut impl Rng, n_examples: usize) -> (SosLearner, Vec<(Instance, Labeling)>) {
    let schema = FeatureSchema {
        clique_types: vec![CliqueType {
            name: "pair".into(),
            size: 2,
            phi: "const".into(),
            params: vec![],
        }],
        unary_features: vec!["f0".into(), "f1".into()],
        params: vec![],
    };
    let mut data = Vec::new();
    for _ in 0..n_examples {
        let n = rng.random_range(2..=4);
        let mut x = super::random_instance(rng, &schema, n);
        x.cliques = (0..n - 1)
            .map(|i| CliqueInstance {
                clique_type: 0,
                members: vec![i, i + 1],
                phi: 1.0,
            })
            .collect();
        let y = super::random_labeling(rng, n);
        data.push((x, y));
    }
    let mut learner = SosLearner::new(schema);
    learner.normalize_loss = false;
    (learner, data)
}

/// All rows `w·δΨ_i(ŷ) ≥ Δ_i(ŷ) − ξ_i` of the n-slack QP, per example.
pub fn enumerate_rows(learner: &SosLearner, data: &[(Instance, Labeling)]) -> Vec<Vec<(Vec<f64>, f64)>> {
    data.iter()
        .map(|(x, y)| {
            let truth = psi(&learner.schema, x, y).unwrap();
            (0..1u64 << x.num_vars)
                .map(|m| {
                    let z = Labeling::from_mask(x.num_vars, m);
                    let p = psi(&learner.schema, x, &z).unwrap();
                    let a: Vec<f64> = p.iter().zip(&truth).map(|(u, v)| u - v).collect();
                    (a, hamming_loss(y, &z, false).unwrap())
                })
                .collect()
        })
        .collect()
}

pub fn full_one_slack(learner: &SosLearner, rows: &[Vec<(Vec<f64>, f64)>], c: f64) -> f64 {
    let dim = learner.schema.dim();
    let mut qp = QuadraticProgram::with_slack(dim, c).unwrap();
    for r in learner.schema.submodularity_rows() {
        qp.add_row(r, false, 0.0).unwrap();
    }
    let n = rows.len() as f64;
    let mut tuple = vec![0usize; rows.len()];
    loop {
        let mut a = vec![0.0; dim];
        let mut h = 0.0;
        for (i, &k) in tuple.iter().enumerate() {
            for (s, v) in a.iter_mut().zip(&rows[i][k].0) {
                *s += v / n;
            }
            h += rows[i][k].1 / n;
        }
        qp.add_row(a, true, h).unwrap();
        let mut i = 0;
        while i < tuple.len() {
            tuple[i] += 1;
            if tuple[i] < rows[i].len() {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
        if i == tuple.len() {
            break;
        }
    }
    qp.solve(&QpOptions::default()).unwrap().objective
}

/// Dual of the n-slack QP by projected gradient: per-example multipliers on
/// simplices scaled to `c/n`, submodularity multipliers nonnegative.
pub fn n_slack_dual(learner: &SosLearner, rows: &[Vec<(Vec<f64>, f64)>], c: f64) -> f64 {
    let sub = learner.schema.submodularity_rows();
    let n = rows.len() as f64;
    let mut all: Vec<(&[f64], f64, Option<usize>)> = Vec::new();
    for (i, group) in rows.iter().enumerate() {
        for (a, h) in group {
            all.push((a, *h, Some(i)));
        }
    }
    for r in &sub {
        all.push((r, 0.0, None));
    }
    let dim = learner.schema.dim();
    let w_of = |lam: &[f64]| {
        let mut w = vec![0.0; dim];
        for ((a, _, _), l) in all.iter().zip(lam) {
            for (wi, ai) in w.iter_mut().zip(a.iter()) {
                *wi += l * ai;
            }
        }
        w
    };
    let value = |lam: &[f64]| {
        let w = w_of(lam);
        all.iter().zip(lam).map(|((_, h, _), l)| l * h).sum::<f64>() - 0.5 * dot(&w, &w)
    };
    let project = |lam: &mut [f64]| {
        for g in 0..rows.len() {
            let idx: Vec<usize> = (0..all.len()).filter(|&k| all[k].2 == Some(g)).collect();
            let mut v: Vec<f64> = idx.iter().map(|&k| lam[k]).collect();
            let mut s = v.clone();
            s.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let (mut cum, mut theta) = (0.0, 0.0);
            for (k, &u) in s.iter().enumerate() {
                cum += u;
                let t = (cum - c / n) / (k + 1) as f64;
                if u - t > 0.0 {
                    theta = t;
                }
            }
            for x in v.iter_mut() {
                *x = (*x - theta).max(0.0);
            }
            for (&k, x) in idx.iter().zip(v) {
                lam[k] = x;
            }
        }
        for (k, l) in lam.iter_mut().enumerate() {
            if all[k].2.is_none() {
                *l = l.max(0.0);
            }
        }
    };
    let lip: f64 = all.iter().map(|(a, _, _)| dot(a, a)).sum::<f64>().max(1e-12);
    let mut x = vec![0.0; all.len()];
    project(&mut x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut best = value(&x);
    for _ in 0..60_000 {
        let w = w_of(&y);
        let mut next: Vec<f64> = y
            .iter()
            .zip(&all)
            .map(|(l, (a, h, _))| l + (h - dot(a, &w)) / lip)
            .collect();
        project(&mut next);
        let v = value(&next);
        let restart = v < value(&x);
        best = best.max(v);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let m = (t - 1.0) / t_next;
        y = next.iter().zip(&x).map(|(a, b)| if restart { *a } else { a + m * (a - b) }).collect();
        x = next;
        t = if restart { 1.0 } else { t_next };
    }
    best
}
