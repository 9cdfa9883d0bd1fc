//! Thin QR factorization `Aᵀ = Q·R` of a growing and shrinking set of
//! constraint normals, stored column by column.

use super::{axpy, dot};

pub(super) struct Factor {
    dim: usize,
    /// Orthonormal columns of `Q`.
    q: Vec<Vec<f64>>,
    /// `r[j]` is column `j` of `R`, of length `j + 1`.
    r: Vec<Vec<f64>>,
}

/// Relative size below which a new column counts as dependent.
const DEPENDENT: f64 = 1e-10;

impl Factor {
    pub fn new(dim: usize) -> Self {
        Factor {
            dim,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    /// Appends a column. Returns `false`, leaving the factor unchanged, when
    /// `v` is numerically in the span of the existing columns.
    pub fn push(&mut self, v: &[f64]) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        let norm = dot(v, v).sqrt();
        if norm == 0.0 {
            return false;
        }
        let mut u = v.to_vec();
        let mut coef = vec![0.0; self.q.len()];
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let p = dot(qk, &u);
                coef[k] += p;
                axpy(-p, qk, &mut u);
            }
        }
        let rest = dot(&u, &u).sqrt();
        if rest <= DEPENDENT * norm {
            return false;
        }
        u.iter_mut().for_each(|x| *x /= rest);
        coef.push(rest);
        self.q.push(u);
        self.r.push(coef);
        true
    }

    /// Deletes column `k`, restoring triangularity with Givens rotations.
    pub fn remove(&mut self, k: usize) {
        self.r.remove(k);
        let m = self.r.len();
        for j in k..m {
            // Column j now has a subdiagonal entry at row j + 1.
            let (a, b) = (self.r[j][j], self.r[j][j + 1]);
            let h = a.hypot(b);
            let (c, s) = if h == 0.0 { (1.0, 0.0) } else { (a / h, b / h) };
            for col in &mut self.r[j..] {
                let (x, y) = (col[j], col[j + 1]);
                col[j] = c * x + s * y;
                col[j + 1] = -s * x + c * y;
            }
            self.r[j].truncate(j + 1);
            let (left, right) = self.q.split_at_mut(j + 1);
            for (x, y) in left[j].iter_mut().zip(right[0].iter_mut()) {
                let (qx, qy) = (*x, *y);
                *x = c * qx + s * qy;
                *y = -s * qx + c * qy;
            }
        }
        self.q.truncate(m);
    }

    /// Solves `Rᵀ z = b`.
    pub fn solve_rt(&self, b: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut z = vec![0.0; m];
        for j in 0..m {
            let col = &self.r[j];
            let s: f64 = (0..j).map(|i| col[i] * z[i]).sum();
            z[j] = (b[j] - s) / col[j];
        }
        z
    }

    /// Solves `R x = z`.
    pub fn solve_r(&self, z: &[f64]) -> Vec<f64> {
        let m = self.len();
        let mut x = z.to_vec();
        for j in (0..m).rev() {
            x[j] /= self.r[j][j];
            let xj = x[j];
            for (i, xi) in x.iter_mut().enumerate().take(j) {
                *xi -= self.r[j][i] * xj;
            }
        }
        x
    }

    /// `Q z`.
    pub fn apply_q(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (qk, &zk) in self.q.iter().zip(z) {
            axpy(zk, qk, &mut out);
        }
        out
    }
}
