//! Independent first-order optimality measurement.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Residuals of the KKT conditions at a primal-dual point.
///
/// Stationarity is relative to `max(1, ‖∇f‖∞)`; feasibility is the largest
/// constraint violation; complementarity the largest `|multiplier·slack|`;
/// dual infeasibility the most negative inequality or bound multiplier.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub dual_infeasibility: f64,
}

impl KktResidual {
    /// Stationarity within `10·tol`, everything else within `tol`.
    pub fn certifies(&self, tol: f64) -> bool {
        self.stationarity <= 10.0 * tol
            && self.feasibility <= tol
            && self.complementarity <= tol
            && self.dual_infeasibility <= tol
    }

    pub fn max(&self) -> f64 {
        self.stationarity.max(self.feasibility).max(self.complementarity).max(self.dual_infeasibility)
    }
}

/// Everything needed to evaluate the KKT conditions of
/// `min f s.t. A_eq x = b_eq, c(x) ≤ 0, l ≤ x ≤ u` at one point.
pub struct KktPoint<'a> {
    pub x: &'a DVector<f64>,
    pub grad: &'a DVector<f64>,
    pub eq_jac: &'a DMatrix<f64>,
    pub eq_resid: &'a DVector<f64>,
    /// Values of the inequality functions `c(x)` (≤ 0 when feasible).
    pub ineq_val: &'a DVector<f64>,
    pub ineq_jac: &'a DMatrix<f64>,
    pub lower: &'a DVector<f64>,
    pub upper: &'a DVector<f64>,
    pub eq_mult: &'a DVector<f64>,
    pub ineq_mult: &'a DVector<f64>,
    pub lower_mult: &'a DVector<f64>,
    pub upper_mult: &'a DVector<f64>,
}

pub fn kkt_residual(p: &KktPoint<'_>) -> KktResidual {
    let n = p.x.len();
    let mut r = p.grad.clone();
    if p.eq_jac.nrows() > 0 {
        r += p.eq_jac.transpose() * p.eq_mult;
    }
    if p.ineq_jac.nrows() > 0 {
        r += p.ineq_jac.transpose() * p.ineq_mult;
    }
    r -= p.lower_mult;
    r += p.upper_mult;
    let stationarity = r.amax() / p.grad.amax().max(1.0);

    let mut feas: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for v in p.eq_resid.iter() {
        feas = feas.max(v.abs());
    }
    for (i, &c) in p.ineq_val.iter().enumerate() {
        feas = feas.max(c);
        comp = comp.max((p.ineq_mult[i] * c).abs());
        dual = dual.max(-p.ineq_mult[i]);
    }
    for i in 0..n {
        let (x, l, u) = (p.x[i], p.lower[i], p.upper[i]);
        if l.is_finite() {
            feas = feas.max(l - x);
            comp = comp.max((p.lower_mult[i] * (x - l)).abs());
        } else {
            comp = comp.max(p.lower_mult[i].abs());
        }
        if u.is_finite() {
            feas = feas.max(x - u);
            comp = comp.max((p.upper_mult[i] * (u - x)).abs());
        } else {
            comp = comp.max(p.upper_mult[i].abs());
        }
        dual = dual.max(-p.lower_mult[i]).max(-p.upper_mult[i]);
    }
    KktResidual { stationarity, feasibility: feas.max(0.0), complementarity: comp, dual_infeasibility: dual.max(0.0) }
}
