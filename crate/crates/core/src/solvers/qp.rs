//! Dense convex QP: `min ½xᵀHx + gᵀx s.t. A_eq x = b_eq, A_in x ≤ b_in, l ≤ x ≤ u`.
//!
//! Equality-only problems go through a single symmetric indefinite KKT
//! factorization. Everything else uses a primal active-set method with a
//! null-space step; a feasible start is found by a regularized phase-one
//! problem solved with the same machinery.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::kkt::{kkt_residual, KktPoint};
use super::linalg::{null_space, Ldlt};
use super::{ActiveConstraint, KktResidual, SolveReport, SolveStatus, SolverError};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.dim();
        let dim = |what: &str| Err(SolverError::Dimension(what.to_string()));
        if self.h.nrows() != n || self.h.ncols() != n {
            return dim("H must be n×n");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return dim("A_eq/b_eq");
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.b_in.len() {
            return dim("A_in/b_in");
        }
        if self.lower.len() != n || self.upper.len() != n {
            return dim("bounds");
        }
        let asym = (&self.h - self.h.transpose()).amax();
        if asym > 1e-10 * self.h.amax().max(1.0) {
            return Err(SolverError::NotSymmetric(asym));
        }
        Ok(())
    }

    /// KKT residuals of a candidate primal-dual point, computed from the
    /// problem data alone.
    pub fn kkt_residual(
        &self,
        x: &DVector<f64>,
        eq_mult: &DVector<f64>,
        ineq_mult: &DVector<f64>,
        lower_mult: &DVector<f64>,
        upper_mult: &DVector<f64>,
    ) -> KktResidual {
        let grad = &self.h * x + &self.g;
        let eq_resid = &self.a_eq * x - &self.b_eq;
        let ineq_val = &self.a_in * x - &self.b_in;
        kkt_residual(&KktPoint {
            x,
            grad: &grad,
            eq_jac: &self.a_eq,
            eq_resid: &eq_resid,
            ineq_val: &ineq_val,
            ineq_jac: &self.a_in,
            lower: &self.lower,
            upper: &self.upper,
            eq_mult,
            ineq_mult,
            lower_mult,
            upper_mult,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowKind {
    Ineq(usize),
    Upper(usize),
    Lower(usize),
}

/// Inequality row `a·x ≤ b`.
#[derive(Debug, Clone)]
struct Row {
    a: DVector<f64>,
    b: f64,
    kind: RowKind,
}

struct ActiveSetOutcome {
    x: DVector<f64>,
    eq_mult: DVector<f64>,
    row_mult: Vec<f64>,
    working: Vec<usize>,
    status: SolveStatus,
    iterations: usize,
}

pub fn solve_qp(problem: &QpProblem, tol: f64) -> Result<SolveReport, SolverError> {
    problem.validate()?;
    let n = problem.dim();
    if problem.h.iter().chain(problem.g.iter()).any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite("QP data"));
    }

    let rows = collect_rows(problem);
    if rows.is_empty() {
        if let Some(report) = solve_equality_only(problem, tol)? {
            return Ok(report);
        }
    }

    // feasible starting point
    let x0 = match equality_point(&problem.a_eq, &problem.b_eq, n, tol) {
        Some(x) => x,
        None => return Ok(failure_report(problem, DVector::zeros(n), SolveStatus::Infeasible, 0)),
    };
    let max_viol = rows.iter().map(|r| r.a.dot(&x0) - r.b).fold(0.0, f64::max);
    let feas_tol = tol * (1.0 + problem.b_in.amax().max(finite_amax(&problem.lower)).max(finite_amax(&problem.upper)));
    let (start, phase1_iters) = if max_viol <= feas_tol {
        (x0, 0)
    } else {
        match phase_one(problem, &rows, x0, max_viol, tol) {
            Some((x, it)) if feasibility(&rows, &problem.a_eq, &problem.b_eq, &x) <= feas_tol => (x, it),
            Some((x, it)) => return Ok(failure_report(problem, x, SolveStatus::Infeasible, it)),
            None => return Ok(failure_report(problem, DVector::zeros(n), SolveStatus::Infeasible, 0)),
        }
    };

    let initial: Vec<usize> =
        rows.iter().enumerate().filter(|(_, r)| (r.b - r.a.dot(&start)).abs() <= feas_tol).map(|(i, _)| i).collect();
    let out = active_set(&problem.h, &problem.g, &problem.a_eq, &problem.b_eq, &rows, start, &initial, tol);
    Ok(assemble(problem, &rows, out, phase1_iters))
}

fn finite_amax(v: &DVector<f64>) -> f64 {
    v.iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
}

fn collect_rows(p: &QpProblem) -> Vec<Row> {
    let n = p.dim();
    let mut rows = Vec::new();
    for i in 0..p.a_in.nrows() {
        rows.push(Row { a: p.a_in.row(i).transpose(), b: p.b_in[i], kind: RowKind::Ineq(i) });
    }
    for i in 0..n {
        if p.upper[i].is_finite() {
            let mut a = DVector::zeros(n);
            a[i] = 1.0;
            rows.push(Row { a, b: p.upper[i], kind: RowKind::Upper(i) });
        }
        if p.lower[i].is_finite() {
            let mut a = DVector::zeros(n);
            a[i] = -1.0;
            rows.push(Row { a, b: -p.lower[i], kind: RowKind::Lower(i) });
        }
    }
    rows
}

fn feasibility(rows: &[Row], a_eq: &DMatrix<f64>, b_eq: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let ineq = rows.iter().map(|r| r.a.dot(x) - r.b).fold(0.0, f64::max);
    let eq = if a_eq.nrows() > 0 { (a_eq * x - b_eq).amax() } else { 0.0 };
    ineq.max(eq)
}

/// Minimum-norm solution of `A x = b`, or `None` if inconsistent.
fn equality_point(a: &DMatrix<f64>, b: &DVector<f64>, n: usize, tol: f64) -> Option<DVector<f64>> {
    if a.nrows() == 0 {
        return Some(DVector::zeros(n));
    }
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1.0);
    let x = svd.solve(b, eps).ok()?;
    if (a * &x - b).amax() > tol * (1.0 + b.amax()) {
        return None;
    }
    Some(x)
}

/// Equality-only problems: one LDLᵀ factorization of the KKT matrix. Returns
/// `None` if the KKT matrix is singular or has the wrong inertia, in which
/// case the caller falls back to the null-space active-set route.
fn solve_equality_only(p: &QpProblem, tol: f64) -> Result<Option<SolveReport>, SolverError> {
    let n = p.dim();
    let m = p.a_eq.nrows();
    let (x, mu) = match solve_kkt(&p.h, &p.g, &p.a_eq, &p.b_eq) {
        Ok(sol) => sol,
        Err(SolverError::Singular) => return Ok(None),
        Err(e) => return Err(e),
    };
    let zeros_n = DVector::zeros(n);
    let kkt = p.kkt_residual(&x, &mu, &DVector::zeros(0), &zeros_n, &zeros_n);
    if kkt.max() > tol.max(1e-9) {
        return Ok(None);
    }
    let _ = m;
    Ok(Some(SolveReport {
        objective: p.objective(&x),
        x,
        eq_multipliers: mu,
        ineq_multipliers: DVector::zeros(0),
        lower_multipliers: zeros_n.clone(),
        upper_multipliers: zeros_n,
        active_set: Vec::new(),
        iterations: 1,
        status: SolveStatus::Success,
        kkt,
        hessian: None,
    }))
}

/// Solves `[H Aᵀ; A 0] [x; μ] = [-g; b]` with one Bunch-Kaufman factorization.
/// Fails with `Singular` when the matrix is singular or its inertia shows that
/// `H` is not positive definite on the null space of `A`.
pub fn solve_kkt(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>), SolverError> {
    let n = g.len();
    let m = a.nrows();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    if m > 0 {
        k.view_mut((n, 0), (m, n)).copy_from(a);
        k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-g));
    if m > 0 {
        rhs.rows_mut(n, m).copy_from(b);
    }
    // symmetric Ruiz equilibration: blocks of very different magnitude
    // must not read as singular pivots
    let mut d = DVector::from_element(n + m, 1.0);
    for _ in 0..20 {
        let mut done = true;
        for i in 0..n + m {
            let r = k.row(i).amax();
            if r > 0.0 {
                let s = 1.0 / r.sqrt();
                if (r - 1.0).abs() > 1e-3 {
                    done = false;
                }
                d[i] *= s;
                k.row_mut(i).scale_mut(s);
                k.column_mut(i).scale_mut(s);
            }
        }
        if done {
            break;
        }
    }
    let f = Ldlt::factor(&k, 1e-13)?;
    let inertia = f.inertia();
    if inertia.positive != n || inertia.negative != m {
        return Err(SolverError::Singular);
    }
    let sol = f.solve(&rhs.component_mul(&d)).component_mul(&d);
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

/// Phase one: `min t + δ/2 ‖x - x0‖² + δ/2 t²` over `(x, t)` subject to
/// `a_i·x - t ≤ b_i`, `t ≥ 0` and the equalities. `(x0, max_viol)` is feasible.
fn phase_one(p: &QpProblem, rows: &[Row], x0: DVector<f64>, max_viol: f64, tol: f64) -> Option<(DVector<f64>, usize)> {
    let n = p.dim();
    let delta = 1e-8;
    let h = DMatrix::from_diagonal_element(n + 1, n + 1, delta);
    let mut g = DVector::zeros(n + 1);
    g.rows_mut(0, n).copy_from(&(-&x0 * delta));
    g[n] = 1.0;
    let mut a_eq = DMatrix::zeros(p.a_eq.nrows(), n + 1);
    if p.a_eq.nrows() > 0 {
        a_eq.view_mut((0, 0), (p.a_eq.nrows(), n)).copy_from(&p.a_eq);
    }
    let mut ext: Vec<Row> = rows
        .iter()
        .map(|r| {
            let mut a = DVector::zeros(n + 1);
            a.rows_mut(0, n).copy_from(&r.a);
            a[n] = -1.0;
            Row { a, b: r.b, kind: r.kind }
        })
        .collect();
    let mut t_row = DVector::zeros(n + 1);
    t_row[n] = -1.0;
    ext.push(Row { a: t_row, b: 0.0, kind: RowKind::Lower(n) });

    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(&x0);
    start[n] = max_viol;
    let initial: Vec<usize> = ext
        .iter()
        .enumerate()
        .filter(|(_, r)| (r.b - r.a.dot(&start)).abs() <= 1e-14 * (1.0 + max_viol))
        .map(|(i, _)| i)
        .take(1)
        .collect();
    let out = active_set(&h, &g, &a_eq, &p.b_eq, &ext, start, &initial, tol);
    if out.status == SolveStatus::Unbounded {
        return None;
    }
    Some((out.x.rows(0, n).into_owned(), out.iterations))
}

/// Primal active-set iterations from a feasible `x`.
#[allow(clippy::too_many_arguments)]
fn active_set(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
    rows: &[Row],
    mut x: DVector<f64>,
    initial: &[usize],
    tol: f64,
) -> ActiveSetOutcome {
    let n = g.len();
    let m_eq = a_eq.nrows();
    let _ = b_eq;
    let h_scale = h.amax().max(1e-300);
    let mut working: Vec<usize> = Vec::new();
    for &i in initial {
        let mut trial = working.clone();
        trial.push(i);
        if super::linalg::rank(&working_matrix(a_eq, rows, &trial), 1e-10) == m_eq + trial.len() {
            working = trial;
        }
    }
    let max_iter = 50 * (n + rows.len()) + 100;
    // set after a full unblocked step: x minimizes over the working set
    let mut at_minimizer = false;

    for it in 0..max_iter {
        let a_w = working_matrix(a_eq, rows, &working);
        let grad = h * &x + g;
        let z = null_space(&a_w, n, 1e-10);

        let mut ray = false;
        let p = if z.ncols() == 0 || at_minimizer {
            DVector::zeros(n)
        } else {
            let hr = z.transpose() * h * &z;
            let gr = z.transpose() * &grad;
            let eig = SymmetricEigen::new((&hr + hr.transpose()) * 0.5);
            let curv_tol = 1e-11 * h_scale;
            let mut step = DVector::zeros(z.ncols());
            let mut descent_ray: Option<DVector<f64>> = None;
            for (k, &lam) in eig.eigenvalues.iter().enumerate() {
                let v = eig.eigenvectors.column(k);
                let c = v.dot(&gr);
                if lam > curv_tol {
                    step -= v * (c / lam);
                } else if c.abs() > 1e-12 * grad.amax().max(1.0) || lam < -curv_tol {
                    let dir = if c > 0.0 { -v.clone_owned() } else { v.clone_owned() };
                    descent_ray = Some(descent_ray.map_or(dir.clone(), |d| d + dir));
                }
            }
            match descent_ray {
                Some(d) => {
                    ray = true;
                    &z * d
                }
                None => &z * step,
            }
        };

        if !ray && p.amax() <= 1e-12 * (1.0 + x.amax()) {
            // multipliers from A_Wᵀ μ = -grad
            let mu = if a_w.nrows() > 0 {
                let svd = a_w.transpose().svd(true, true);
                svd.solve(&(-&grad), 1e-14).unwrap_or_else(|_| DVector::zeros(a_w.nrows()))
            } else {
                DVector::zeros(0)
            };
            let drop_tol = -tol.max(1e-12) * grad.amax().max(1.0);
            let candidate = working
                .iter()
                .enumerate()
                .map(|(k, &row)| (k, row, mu[m_eq + k]))
                .filter(|&(_, _, v)| v < drop_tol)
                .min_by(|a, b| a.2.total_cmp(&b.2));
            match candidate {
                None => {
                    let mut row_mult = vec![0.0; rows.len()];
                    for (k, &row) in working.iter().enumerate() {
                        row_mult[row] = mu[m_eq + k].max(0.0);
                    }
                    return ActiveSetOutcome {
                        x,
                        eq_mult: mu.rows(0, m_eq).into_owned(),
                        row_mult,
                        working,
                        status: SolveStatus::Success,
                        iterations: it + 1,
                    };
                }
                Some((k, _, _)) => {
                    working.remove(k);
                    at_minimizer = false;
                    continue;
                }
            }
        }

        // ratio test over rows not in the working set
        let mut alpha = if ray { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for (i, r) in rows.iter().enumerate() {
            if working.contains(&i) {
                continue;
            }
            let ap = r.a.dot(&p);
            if ap > 1e-14 * r.a.amax() * p.amax() {
                let step = (r.b - r.a.dot(&x)).max(0.0) / ap;
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
        }
        if ray && blocking.is_none() {
            return ActiveSetOutcome {
                x,
                eq_mult: DVector::zeros(m_eq),
                row_mult: vec![0.0; rows.len()],
                working,
                status: SolveStatus::Unbounded,
                iterations: it + 1,
            };
        }
        x += &p * alpha;
        match blocking {
            Some(i) => working.push(i),
            None => at_minimizer = true,
        }
    }

    ActiveSetOutcome {
        x,
        eq_mult: DVector::zeros(m_eq),
        row_mult: vec![0.0; rows.len()],
        working,
        status: SolveStatus::MaxIter,
        iterations: max_iter,
    }
}

fn working_matrix(a_eq: &DMatrix<f64>, rows: &[Row], working: &[usize]) -> DMatrix<f64> {
    let n = a_eq.ncols();
    let m = a_eq.nrows() + working.len();
    let mut a = DMatrix::zeros(m, n);
    if a_eq.nrows() > 0 {
        a.view_mut((0, 0), (a_eq.nrows(), n)).copy_from(a_eq);
    }
    for (k, &i) in working.iter().enumerate() {
        a.set_row(a_eq.nrows() + k, &rows[i].a.transpose());
    }
    a
}

fn assemble(p: &QpProblem, rows: &[Row], out: ActiveSetOutcome, extra_iters: usize) -> SolveReport {
    let n = p.dim();
    let mut ineq = DVector::zeros(p.a_in.nrows());
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    for (i, r) in rows.iter().enumerate() {
        let v = out.row_mult[i];
        match r.kind {
            RowKind::Ineq(j) => ineq[j] = v,
            RowKind::Upper(j) => upper[j] = v,
            RowKind::Lower(j) => lower[j] = v,
        }
    }
    let active_set = out
        .working
        .iter()
        .map(|&i| match rows[i].kind {
            RowKind::Ineq(j) => ActiveConstraint::Inequality(j),
            RowKind::Upper(j) => ActiveConstraint::Upper(j),
            RowKind::Lower(j) => ActiveConstraint::Lower(j),
        })
        .collect();
    let kkt = p.kkt_residual(&out.x, &out.eq_mult, &ineq, &lower, &upper);
    SolveReport {
        objective: p.objective(&out.x),
        x: out.x,
        eq_multipliers: out.eq_mult,
        ineq_multipliers: ineq,
        lower_multipliers: lower,
        upper_multipliers: upper,
        active_set,
        iterations: out.iterations + extra_iters,
        status: out.status,
        kkt,
        hessian: None,
    }
}

fn failure_report(p: &QpProblem, x: DVector<f64>, status: SolveStatus, iterations: usize) -> SolveReport {
    let n = p.dim();
    let kkt = p.kkt_residual(
        &x,
        &DVector::zeros(p.a_eq.nrows()),
        &DVector::zeros(p.a_in.nrows()),
        &DVector::zeros(n),
        &DVector::zeros(n),
    );
    SolveReport {
        objective: p.objective(&x),
        x,
        eq_multipliers: DVector::zeros(p.a_eq.nrows()),
        ineq_multipliers: DVector::zeros(p.a_in.nrows()),
        lower_multipliers: DVector::zeros(n),
        upper_multipliers: DVector::zeros(n),
        active_set: Vec::new(),
        iterations,
        status,
        kkt,
        hessian: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }
    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn bound_by_inequality() {
        // min (x-1)^2 s.t. x <= 0
        let p = QpProblem::new(m(1, 1, &[2.0]), v(&[-2.0])).with_inequalities(m(1, 1, &[1.0]), v(&[0.0]));
        let r = solve_qp(&p, 1e-10).unwrap();
        assert_eq!(r.status, SolveStatus::Success);
        assert!(r.x[0].abs() < 1e-12);
        assert_relative_eq!(r.ineq_multipliers[0], 2.0, epsilon = 1e-10);
        assert_eq!(r.active_set, vec![ActiveConstraint::Inequality(0)]);
    }

    #[test]
    fn symmetric_equality() {
        let p = QpProblem::new(m(2, 2, &[2.0, 0.0, 0.0, 2.0]), v(&[0.0, 0.0]))
            .with_equalities(m(1, 2, &[1.0, 1.0]), v(&[2.0]));
        let r = solve_qp(&p, 1e-10).unwrap();
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.x[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.eq_multipliers[0], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn unconstrained() {
        let p = QpProblem::new(m(1, 1, &[2.0]), v(&[-6.0]));
        let r = solve_qp(&p, 1e-10).unwrap();
        assert_relative_eq!(r.x[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let p = QpProblem::new(m(1, 1, &[1.0]), v(&[0.0])).with_inequalities(m(2, 1, &[1.0, -1.0]), v(&[-1.0, -1.0]));
        assert_eq!(solve_qp(&p, 1e-10).unwrap().status, SolveStatus::Infeasible);

        let p = QpProblem::new(m(1, 1, &[0.0]), v(&[1.0]));
        assert_eq!(solve_qp(&p, 1e-10).unwrap().status, SolveStatus::Unbounded);

        // linear objective bounded by a box is fine
        let p = QpProblem::new(m(1, 1, &[0.0]), v(&[1.0])).with_bounds(v(&[-2.0]), v(&[5.0]));
        let r = solve_qp(&p, 1e-10).unwrap();
        assert_eq!(r.status, SolveStatus::Success);
        assert_relative_eq!(r.x[0], -2.0);
        assert_relative_eq!(r.lower_multipliers[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_start_needs_phase_one() {
        // min x^2 + y^2 s.t. x + y >= 3, x <= 1 → (1, 2)
        let p = QpProblem::new(m(2, 2, &[2.0, 0.0, 0.0, 2.0]), v(&[0.0, 0.0]))
            .with_inequalities(m(1, 2, &[-1.0, -1.0]), v(&[-3.0]))
            .with_bounds(v(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), v(&[1.0, f64::INFINITY]));
        let r = solve_qp(&p, 1e-10).unwrap();
        assert_eq!(r.status, SolveStatus::Success);
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(r.x[1], 2.0, epsilon = 1e-9);
        assert!(r.kkt.certifies(1e-9), "{:?}", r.kkt);
    }

    #[test]
    fn rejects_asymmetric_hessian() {
        let p = QpProblem::new(m(2, 2, &[1.0, 0.5, 0.0, 1.0]), v(&[0.0, 0.0]));
        assert!(matches!(solve_qp(&p, 1e-10), Err(SolverError::NotSymmetric(_))));
    }
}
