//! SQP for small NLPs `min f(x) s.t. c(x) ≤ 0, l ≤ x ≤ u`.
//!
//! Each iteration solves a convex QP built from a damped-BFGS approximation
//! of the Lagrangian Hessian, then backtracks on the ℓ1 merit function
//! `f + ν Σ max(0, c_i)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use super::kkt::{kkt_residual, KktPoint};
use super::linalg::regularize_spd;
use super::qp::{solve_qp, QpProblem};
use super::{is_active, ActiveConstraint, KktResidual, SolveReport, SolveStatus, SolverError};

pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn objective(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn num_inequalities(&self) -> usize {
        0
    }
    /// Inequality functions, feasible when `≤ 0`.
    fn inequalities(&self, _x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn inequality_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(0, self.dim())
    }

    fn lower(&self) -> DVector<f64>;
    fn upper(&self) -> DVector<f64>;

    /// Optional curvature model used to seed (and reset) the quasi-Newton
    /// matrix.
    fn hessian_hint(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NlpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NlpOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

type ScalarFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type MatrixFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Closure-backed problem, convenient for tests and one-off problems.
pub struct FnNlp {
    pub objective: ScalarFn,
    pub gradient: VectorFn,
    pub inequalities: Option<(usize, VectorFn, MatrixFn)>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl fmt::Debug for FnNlp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnNlp").field("lower", &self.lower).field("upper", &self.upper).finish()
    }
}

impl FnNlp {
    pub fn new(
        objective: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        lower: DVector<f64>,
        upper: DVector<f64>,
    ) -> Self {
        Self { objective: Box::new(objective), gradient: Box::new(gradient), inequalities: None, lower, upper }
    }

    pub fn with_inequalities(
        mut self,
        count: usize,
        values: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.inequalities = Some((count, Box::new(values), Box::new(jacobian)));
        self
    }
}

impl NlpProblem for FnNlp {
    fn dim(&self) -> usize {
        self.lower.len()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        (self.objective)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
    fn num_inequalities(&self) -> usize {
        self.inequalities.as_ref().map_or(0, |c| c.0)
    }
    fn inequalities(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inequalities.as_ref().map_or_else(|| DVector::zeros(0), |c| (c.1)(x))
    }
    fn inequality_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inequalities.as_ref().map_or_else(|| DMatrix::zeros(0, self.dim()), |c| (c.2)(x))
    }
    fn lower(&self) -> DVector<f64> {
        self.lower.clone()
    }
    fn upper(&self) -> DVector<f64> {
        self.upper.clone()
    }
}

/// KKT residuals of an NLP at a primal-dual point, from the problem's own
/// functions.
pub fn nlp_kkt_residual<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    ineq_mult: &DVector<f64>,
    lower_mult: &DVector<f64>,
    upper_mult: &DVector<f64>,
) -> KktResidual {
    let n = problem.dim();
    let grad = problem.gradient(x);
    let c = problem.inequalities(x);
    let jac = problem.inequality_jacobian(x);
    kkt_residual(&KktPoint {
        x,
        grad: &grad,
        eq_jac: &DMatrix::zeros(0, n),
        eq_resid: &DVector::zeros(0),
        ineq_val: &c,
        ineq_jac: &jac,
        lower: &problem.lower(),
        upper: &problem.upper(),
        eq_mult: &DVector::zeros(0),
        ineq_mult,
        lower_mult,
        upper_mult,
    })
}

/// Constraints within the activity tolerance at `x`.
pub fn active_constraints<P: NlpProblem + ?Sized>(problem: &P, x: &DVector<f64>) -> Vec<ActiveConstraint> {
    let mut active = Vec::new();
    for (i, c) in problem.inequalities(x).iter().enumerate() {
        if *c >= 0.0 || is_active(*c, 0.0) {
            active.push(ActiveConstraint::Inequality(i));
        }
    }
    let (lo, up) = (problem.lower(), problem.upper());
    for i in 0..problem.dim() {
        if lo[i].is_finite() && is_active(x[i] - lo[i], lo[i]) {
            active.push(ActiveConstraint::Lower(i));
        }
        if up[i].is_finite() && is_active(up[i] - x[i], up[i]) {
            active.push(ActiveConstraint::Upper(i));
        }
    }
    active
}

struct Quasi {
    b: DMatrix<f64>,
    damped_in_a_row: usize,
}

impl Quasi {
    fn initial<P: NlpProblem + ?Sized>(problem: &P, x: &DVector<f64>, scale: f64) -> DMatrix<f64> {
        let n = problem.dim();
        match problem.hessian_hint(x) {
            Some(h) => regularize_spd(&h, 1e-8 * h.amax().max(1e-300)),
            None => DMatrix::identity(n, n) * scale,
        }
    }

    /// Powell-damped BFGS update. Two consecutive damped updates trigger a
    /// reset.
    fn update<P: NlpProblem + ?Sized>(&mut self, problem: &P, x: &DVector<f64>, s: &DVector<f64>, y: &DVector<f64>) {
        let bs = &self.b * s;
        let sbs = s.dot(&bs);
        let sy = s.dot(y);
        if !(sbs > 0.0) || !sbs.is_finite() || !sy.is_finite() {
            return;
        }
        let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
        let r = y * theta + &bs * (1.0 - theta);
        let sr = s.dot(&r);
        if !(sr > 0.0) {
            return;
        }
        self.b = &self.b - &bs * bs.transpose() / sbs + &r * r.transpose() / sr;
        self.b = (&self.b + self.b.transpose()) * 0.5;
        if theta < 1.0 {
            self.damped_in_a_row += 1;
            if self.damped_in_a_row >= 2 {
                let scale = if sy > 0.0 { y.dot(y) / sy } else { 1.0 };
                self.b = Self::initial(problem, x, scale.max(1e-8));
                self.damped_in_a_row = 0;
            }
        } else {
            self.damped_in_a_row = 0;
        }
    }
}

/// Clamps into `[lo, up]` and removes the rounding left by `x + (bound - x)`.
fn snap_to_bounds(v: f64, lo: f64, up: f64) -> f64 {
    const SNAP: f64 = 1e-12;
    let v = v.clamp(lo, up);
    if lo.is_finite() && v - lo <= SNAP * (1.0 + lo.abs()) {
        lo
    } else if up.is_finite() && up - v <= SNAP * (1.0 + up.abs()) {
        up
    } else {
        v
    }
}

pub fn solve_nlp<P: NlpProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    options: NlpOptions,
) -> Result<SolveReport, SolverError> {
    let n = problem.dim();
    let (lo, up) = (problem.lower(), problem.upper());
    if x0.len() != n || lo.len() != n || up.len() != n {
        return Err(SolverError::Dimension(format!("NLP of dimension {n}")));
    }
    if (0..n).any(|i| x0[i] < lo[i] || x0[i] > up[i]) {
        return Err(SolverError::StartOutsideBox);
    }
    let m = problem.num_inequalities();
    let tol = options.tol;

    let mut x = x0.clone();
    for i in 0..n {
        x[i] = snap_to_bounds(x[i], lo[i], up[i]);
    }
    let mut quasi = Quasi { b: Quasi::initial(problem, &x, 1.0), damped_in_a_row: 0 };
    let mut nu = 0.0_f64;
    let mut ineq_mult = DVector::zeros(m);
    let mut lower_mult = DVector::zeros(n);
    let mut upper_mult = DVector::zeros(n);
    let mut just_reset = false;

    let finish = |x: DVector<f64>, im: DVector<f64>, lm: DVector<f64>, um: DVector<f64>, it, status, b| {
        let kkt = nlp_kkt_residual(problem, &x, &im, &lm, &um);
        SolveReport {
            objective: problem.objective(&x),
            active_set: active_constraints(problem, &x),
            x,
            eq_multipliers: DVector::zeros(0),
            ineq_multipliers: im,
            lower_multipliers: lm,
            upper_multipliers: um,
            iterations: it,
            status,
            kkt,
            hessian: Some(b),
        }
    };

    for it in 0..options.max_iter {
        let f = problem.objective(&x);
        let g = problem.gradient(&x);
        let c = problem.inequalities(&x);
        let jac = problem.inequality_jacobian(&x);
        if !f.is_finite() || g.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite("NLP evaluation"));
        }

        let qp = QpProblem::new(quasi.b.clone(), g.clone())
            .with_inequalities(jac.clone(), -&c)
            .with_bounds(&lo - &x, &up - &x);
        let sub = solve_qp(&qp, 1e-13)?;
        match sub.status {
            SolveStatus::Success => {}
            SolveStatus::Infeasible => {
                return Ok(finish(x, ineq_mult, lower_mult, upper_mult, it, SolveStatus::Infeasible, quasi.b))
            }
            _ => {
                quasi.b = Quasi::initial(problem, &x, 1.0);
                continue;
            }
        }
        let d = sub.x;
        ineq_mult = sub.ineq_multipliers;
        lower_mult = sub.lower_multipliers;
        upper_mult = sub.upper_multipliers;

        let kkt = nlp_kkt_residual(problem, &x, &ineq_mult, &lower_mult, &upper_mult);
        if kkt.max() <= tol {
            return Ok(finish(x, ineq_mult, lower_mult, upper_mult, it, SolveStatus::Success, quasi.b));
        }
        // a vanishing step cannot improve the point any further
        if d.amax() <= f64::EPSILON * (1.0 + x.amax()) {
            let status = if kkt.certifies(tol) { SolveStatus::Success } else { SolveStatus::Stalled };
            return Ok(finish(x, ineq_mult, lower_mult, upper_mult, it, status, quasi.b));
        }

        // ℓ1 merit line search
        nu = nu.max(1.1 * ineq_mult.amax() + 1e-8);
        let viol = |c: &DVector<f64>| c.iter().map(|v| v.max(0.0)).sum::<f64>();
        let phi0 = f + nu * viol(&c);
        let slope = g.dot(&d) - nu * viol(&c);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-12 {
            let mut trial = &x + &d * alpha;
            for i in 0..n {
                trial[i] = snap_to_bounds(trial[i], lo[i], up[i]);
            }
            let phi = problem.objective(&trial) + nu * viol(&problem.inequalities(&trial));
            // near the solution the decrease can fall below the rounding
            // level of the merit value itself
            let noise = 1e2 * f64::EPSILON * phi0.abs().max(1.0);
            let roundoff = alpha == 1.0 && -slope <= noise && (phi - phi0).abs() <= noise;
            if phi.is_finite() && (phi <= phi0 + 1e-4 * alpha * slope.min(0.0) || roundoff) {
                accepted = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(x_new) = accepted else {
            if just_reset {
                return Ok(finish(x, ineq_mult, lower_mult, upper_mult, it, SolveStatus::Stalled, quasi.b));
            }
            quasi.b = Quasi::initial(problem, &x, 1.0);
            just_reset = true;
            continue;
        };
        just_reset = false;

        let g_new = problem.gradient(&x_new);
        let jac_new = problem.inequality_jacobian(&x_new);
        let grad_lag = |g: &DVector<f64>, j: &DMatrix<f64>| {
            if m > 0 {
                g + j.transpose() * &ineq_mult
            } else {
                g.clone()
            }
        };
        let y = grad_lag(&g_new, &jac_new) - grad_lag(&g, &jac);
        let s = &x_new - &x;
        quasi.update(problem, &x_new, &s, &y);
        x = x_new;
    }

    // one last multiplier estimate at the final iterate
    let g = problem.gradient(&x);
    let c = problem.inequalities(&x);
    let jac = problem.inequality_jacobian(&x);
    let qp = QpProblem::new(quasi.b.clone(), g).with_inequalities(jac, -&c).with_bounds(&lo - &x, &up - &x);
    if let Ok(sub) = solve_qp(&qp, 1e-13) {
        if sub.status.is_success() {
            ineq_mult = sub.ineq_multipliers;
            lower_mult = sub.lower_multipliers;
            upper_mult = sub.upper_multipliers;
        }
    }
    let status = if nlp_kkt_residual(problem, &x, &ineq_mult, &lower_mult, &upper_mult).max() <= tol {
        SolveStatus::Success
    } else {
        SolveStatus::MaxIter
    };
    Ok(finish(x, ineq_mult, lower_mult, upper_mult, options.max_iter, status, quasi.b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn disk_constraint() {
        // min (x-2)^2 s.t. x^2 <= 1 → x = 1, multiplier 1
        let p = FnNlp::new(|x| (x[0] - 2.0).powi(2), |x| v(&[2.0 * (x[0] - 2.0)]), v(&[-10.0]), v(&[10.0]))
            .with_inequalities(1, |x| v(&[x[0] * x[0] - 1.0]), |x| DMatrix::from_element(1, 1, 2.0 * x[0]));
        let r = solve_nlp(&p, &v(&[0.0]), NlpOptions { tol: 1e-10, max_iter: 200 }).unwrap();
        assert_eq!(r.status, SolveStatus::Success);
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(r.ineq_multipliers[0], 1.0, epsilon = 1e-6);
        assert!(r.active_set.contains(&ActiveConstraint::Inequality(0)));
    }

    #[test]
    fn linear_on_box() {
        let p = FnNlp::new(|x| x[0], |_| v(&[1.0]), v(&[0.0]), v(&[1.0]));
        let r = solve_nlp(&p, &v(&[0.5]), NlpOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Success);
        assert_eq!(r.x[0], 0.0);
        assert_eq!(r.active_set, vec![ActiveConstraint::Lower(0)]);
        assert_relative_eq!(r.lower_multipliers[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rosenbrock() {
        let p = FnNlp::new(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            |x| v(&[-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])]),
            v(&[f64::NEG_INFINITY, f64::NEG_INFINITY]),
            v(&[f64::INFINITY, f64::INFINITY]),
        );
        let r = solve_nlp(&p, &v(&[-1.2, 1.0]), NlpOptions { tol: 1e-10, max_iter: 200 }).unwrap();
        assert_eq!(r.status, SolveStatus::Success, "{r:?}");
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(r.x[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn start_outside_box_is_rejected() {
        let p = FnNlp::new(|x| x[0], |_| v(&[1.0]), v(&[0.0]), v(&[1.0]));
        assert_eq!(solve_nlp(&p, &v(&[2.0]), NlpOptions::default()).unwrap_err(), SolverError::StartOutsideBox);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let p = FnNlp::new(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            |x| v(&[-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])]),
            v(&[-5.0, -5.0]),
            v(&[5.0, 5.0]),
        );
        let r = solve_nlp(&p, &v(&[-1.2, 1.0]), NlpOptions { tol: 1e-12, max_iter: 3 }).unwrap();
        assert_eq!(r.status, SolveStatus::MaxIter);
        assert!(r.objective < 24.2);
    }
}
