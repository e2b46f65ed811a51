//! Dense optimization kernels: an active-set QP solver, an SQP solver for
//! small box- and inequality-constrained NLPs, and finite-difference helpers.
//!
//! Sign convention for multipliers: the Lagrangian is
//! `f(x) + μ_eqᵀ(A_eq x - b_eq) + μ_inᵀ(A_in x - b_in) - z_lᵀ(x - l) + z_uᵀ(x - u)`
//! with `μ_in, z_l, z_u ≥ 0` at a KKT point.

pub mod fd;
pub mod kkt;
pub mod linalg;
pub mod nlp;
pub mod qp;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fd::{fd_gradient, fd_hessian, fd_jacobian};
pub use kkt::KktResidual;
pub use nlp::{solve_nlp, NlpOptions, NlpProblem};
pub use qp::{solve_qp, QpProblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Hessian is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("singular KKT matrix")]
    Singular,
    #[error("starting point is outside the box")]
    StartOutsideBox,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Success,
    Infeasible,
    Unbounded,
    MaxIter,
    /// Line search could not make progress; the best iterate is returned.
    Stalled,
}

impl SolveStatus {
    pub fn is_success(self) -> bool {
        self == SolveStatus::Success
    }
}

/// Identifies a constraint in the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActiveConstraint {
    /// Row of the general inequality block (`A_in` or `h`).
    Inequality(usize),
    Lower(usize),
    Upper(usize),
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: DVector<f64>,
    pub objective: f64,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    pub lower_multipliers: DVector<f64>,
    pub upper_multipliers: DVector<f64>,
    pub active_set: Vec<ActiveConstraint>,
    pub iterations: usize,
    pub status: SolveStatus,
    pub kkt: KktResidual,
    /// Final quasi-Newton approximation of the Lagrangian Hessian, when the
    /// solver maintains one.
    pub hessian: Option<DMatrix<f64>>,
}

/// A constraint is treated as active when its slack is within
/// `ACTIVE_TOL * (1 + |bound|)`.
pub const ACTIVE_TOL: f64 = 1e-6;

pub fn is_active(slack: f64, bound: f64) -> bool {
    slack.abs() <= ACTIVE_TOL * (1.0 + bound.abs())
}
