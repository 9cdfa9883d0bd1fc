//! Slow reference for `qp`: accelerated projected gradient ascent on the
//! dual. Slack-row multipliers live on the simplex scaled to `c`, plain-row
//! multipliers on the nonnegative orthant.

use sos_core::qp::QuadraticProgram;

pub struct Reference {
    pub dual_value: f64,
    pub w: Vec<f64>,
}

fn project_scaled_simplex(v: &mut [f64], total: f64) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - total) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn primal_of(qp: &QuadraticProgram, lambda: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; qp.dim()];
    for (r, &l) in qp.rows().iter().zip(lambda) {
        for (wi, a) in w.iter_mut().zip(&r.a) {
            *wi += l * a;
        }
    }
    w
}

fn dual_value(qp: &QuadraticProgram, lambda: &[f64]) -> f64 {
    let w = primal_of(qp, lambda);
    let lin: f64 = qp.rows().iter().zip(lambda).map(|(r, l)| l * r.h).sum();
    lin - 0.5 * w.iter().map(|x| x * x).sum::<f64>()
}

fn project(qp: &QuadraticProgram, lambda: &mut [f64]) {
    let slack: Vec<usize> = (0..lambda.len()).filter(|&i| qp.rows()[i].slack).collect();
    if let Some(c) = qp.slack_cost() {
        let mut part: Vec<f64> = slack.iter().map(|&i| lambda[i]).collect();
        project_scaled_simplex(&mut part, c);
        for (&i, v) in slack.iter().zip(part) {
            lambda[i] = v;
        }
    }
    for (i, l) in lambda.iter_mut().enumerate() {
        if !qp.rows()[i].slack {
            *l = l.max(0.0);
        }
    }
}

pub fn solve(qp: &QuadraticProgram, iterations: usize) -> Reference {
    let m = qp.rows().len();
    let lip: f64 = qp
        .rows()
        .iter()
        .map(|r| r.a.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .max(1e-12);
    let step = 1.0 / lip;
    let mut x = vec![0.0; m];
    project(qp, &mut x);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut best = (dual_value(qp, &x), x.clone());
    for _ in 0..iterations {
        let w = primal_of(qp, &y);
        let mut next: Vec<f64> = y
            .iter()
            .zip(qp.rows())
            .map(|(l, r)| l + step * (r.h - r.a.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()))
            .collect();
        project(qp, &mut next);
        let value = dual_value(qp, &next);
        if value > best.0 {
            best = (value, next.clone());
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        // Restart momentum when the dual value drops.
        let restart = value < dual_value(qp, &x);
        y = next
            .iter()
            .zip(&x)
            .map(|(n, o)| if restart { *n } else { n + momentum * (n - o) })
            .collect();
        x = next;
        t = if restart { 1.0 } else { t_next };
    }
    Reference {
        dual_value: best.0,
        w: primal_of(qp, &best.1),
    }
}
