//! Reference solvers shared by the integration tests.

use nalgebra::{DMatrix, DVector};

/// Dense convex QP `min ½xᵀHx + gᵀx` s.t. `A_eq x = b_eq`,
/// `A_in x ≤ b_in`, `lo ≤ x ≤ up`, solved by trying every combination of
/// active bounds and inequalities. Each combination becomes an equality
/// constrained problem solved with a dense LU; the best feasible candidate
/// is the global minimizer because the problem is convex.
pub struct BruteForceQp<'a> {
    pub h: &'a DMatrix<f64>,
    pub g: &'a DVector<f64>,
    pub a_eq: &'a DMatrix<f64>,
    pub b_eq: &'a DVector<f64>,
    pub a_in: &'a DMatrix<f64>,
    pub b_in: &'a DVector<f64>,
    pub lo: &'a DVector<f64>,
    pub up: &'a DVector<f64>,
}

impl BruteForceQp<'_> {
    pub fn solve(&self) -> Option<DVector<f64>> {
        let n = self.g.len();
        let me = self.b_eq.len();
        let mi = self.b_in.len();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for code in 0..3usize.pow(n as u32) {
            let mut pinned = vec![None; n];
            let mut c = code;
            for (i, p) in pinned.iter_mut().enumerate() {
                *p = match c % 3 {
                    0 => None,
                    1 if self.lo[i].is_finite() => Some(self.lo[i]),
                    2 if self.up[i].is_finite() => Some(self.up[i]),
                    _ => None,
                };
                c /= 3;
            }
            for mask in 0..(1usize << mi) {
                let rows: Vec<(DVector<f64>, f64)> = (0..me)
                    .map(|r| (self.a_eq.row(r).transpose(), self.b_eq[r]))
                    .chain((0..mi).filter(|r| mask >> r & 1 == 1).map(|r| (self.a_in.row(r).transpose(), self.b_in[r])))
                    .collect();
                let m = rows.len();
                let dim = n + m;
                let mut k = DMatrix::zeros(dim, dim);
                let mut rhs = DVector::zeros(dim);
                for i in 0..n {
                    match pinned[i] {
                        Some(v) => {
                            k[(i, i)] = 1.0;
                            rhs[i] = v;
                        }
                        None => {
                            for j in 0..n {
                                k[(i, j)] = self.h[(i, j)];
                            }
                            for (r, (a, _)) in rows.iter().enumerate() {
                                k[(i, n + r)] = a[i];
                            }
                            rhs[i] = -self.g[i];
                        }
                    }
                }
                for (r, (a, b)) in rows.iter().enumerate() {
                    for j in 0..n {
                        k[(n + r, j)] = a[j];
                    }
                    rhs[n + r] = *b;
                }
                let Some(sol) = k.lu().solve(&rhs) else { continue };
                let x = sol.rows(0, n).into_owned();
                if !self.feasible(&x, 1e-9) {
                    continue;
                }
                let f = 0.5 * x.dot(&(self.h * &x)) + self.g.dot(&x);
                if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                    best = Some((f, x));
                }
            }
        }
        best.map(|b| b.1)
    }

    pub fn feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        let box_ok = (0..x.len()).all(|i| x[i] >= self.lo[i] - tol && x[i] <= self.up[i] + tol);
        let eq_ok = self.b_eq.is_empty() || (self.a_eq * x - self.b_eq).amax() <= tol;
        let in_ok = self.b_in.is_empty() || (self.a_in * x - self.b_in).max() <= tol;
        box_ok && eq_ok && in_ok
    }
}
