//! ALADIN coordination of agents sharing one affine resource constraint
//! `Σ_j q_j = Q·1` (one entry per horizon stage).
//!
//! Every iteration runs
//!
//! 1. local proximal NLPs `min f_j(q) + λᵀq + ρ/2‖q - y_j‖²_Σ` (in parallel),
//! 2. the termination test on coupling and primal residuals,
//! 3. sensitivities: gradient, positive-definite Hessian and the Jacobian of
//!    the constraints active at the local solution (in parallel),
//! 4. the equality-constrained coordination QP with a slack on the coupling,
//! 5. the primal/dual update.
//!
//! Agents are plain [`NlpProblem`]s; the artificial sink that absorbs unused
//! resource is just another agent ([`SinkAgent`]).

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solvers::linalg::{min_eigenvalue, regularize_spd};
use crate::solvers::nlp::{active_constraints, nlp_kkt_residual};
use crate::solvers::qp::{solve_kkt, solve_qp, QpProblem};
use crate::solvers::{
    fd_hessian, solve_nlp, ActiveConstraint, KktResidual, NlpOptions, NlpProblem, SolveReport, SolverError,
};

/// Smallest eigenvalue enforced on every agent Hessian.
pub const HESSIAN_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AladinError {
    #[error("local solve of agent {agent} failed: {source}")]
    Local { agent: usize, source: SolverError },
    #[error("degenerate coordination: singular KKT system (rank-deficient active sets)")]
    DegenerateCoordination,
    #[error("invalid ALADIN setup: {0}")]
    Setup(String),
}

/// One agent of the coordinated problem. Its variable is the agent's share
/// of the resource at every horizon stage.
pub trait AgentSubproblem: NlpProblem + Sync {}

impl<T: NlpProblem + Sync> AgentSubproblem for T {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HessianSource {
    /// Symmetrized finite differences of the analytic Lagrangian gradient.
    Exact,
    /// Damped-BFGS matrix of the local SQP with the proximal term removed.
    Bfgs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AladinConfig {
    pub rho0: f64,
    pub mu0: f64,
    /// Diagonal of the proximal scaling Σ; `None` means identity.
    pub sigma: Option<Vec<f64>>,
    pub epsilon: f64,
    pub max_iter: usize,
    /// Per-iteration multiplicative growth of ρ.
    pub rho_growth: f64,
    /// Per-iteration multiplicative growth of μ.
    pub mu_growth: f64,
    pub max_penalty: f64,
    pub hessian: HessianSource,
    pub local_tol: f64,
    /// Also require every agent's proximal term `ρ‖Σ(q_j - y_j)‖∞` within ε
    /// before stopping, so the returned point satisfies each local KKT system.
    pub dual_check: bool,
    pub parallel: bool,
    /// Full steps are `(1, 1, 1)`.
    pub steps: [f64; 3],
}

impl Default for AladinConfig {
    fn default() -> Self {
        Self {
            rho0: 1e2,
            mu0: 1e3,
            sigma: None,
            epsilon: 1e-5,
            max_iter: 50,
            rho_growth: 1.0,
            mu_growth: 1.0,
            max_penalty: 1e8,
            hessian: HessianSource::Exact,
            local_tol: 1e-6,
            dual_check: true,
            parallel: true,
            steps: [1.0, 1.0, 1.0],
        }
    }
}

impl AladinConfig {
    pub fn validate(&self) -> Result<(), AladinError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !(pos(self.rho0) && pos(self.mu0) && pos(self.epsilon) && pos(self.max_penalty)) {
            return Err(AladinError::Setup("rho0, mu0, epsilon and max_penalty must be positive".into()));
        }
        if !(pos(self.rho_growth) && pos(self.mu_growth)) {
            return Err(AladinError::Setup("growth factors must be positive".into()));
        }
        if let Some(s) = &self.sigma {
            if s.iter().any(|&v| !pos(v)) {
                return Err(AladinError::Setup("Σ must be positive definite".into()));
            }
        }
        if self.max_iter == 0 {
            return Err(AladinError::Setup("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    fn sigma_vec(&self, n: usize) -> DVector<f64> {
        match &self.sigma {
            Some(s) => DVector::from_column_slice(s),
            None => DVector::from_element(n, 1.0),
        }
    }
}

/// Sink agent absorbing unused resource at cost `weight·‖q‖²`, `q ≥ 0`.
#[derive(Debug, Clone, Copy)]
pub struct SinkAgent {
    pub horizon: usize,
    pub weight: f64,
}

impl NlpProblem for SinkAgent {
    fn dim(&self) -> usize {
        self.horizon
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.weight * x.norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x * (2.0 * self.weight)
    }
    fn lower(&self) -> DVector<f64> {
        DVector::zeros(self.horizon)
    }
    fn upper(&self) -> DVector<f64> {
        DVector::from_element(self.horizon, f64::INFINITY)
    }
    fn hessian_hint(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(DMatrix::identity(self.horizon, self.horizon) * (2.0 * self.weight))
    }
}

/// Separable convex quadratic agent `½qᵀPq + cᵀq` on a box.
#[derive(Debug, Clone)]
pub struct QuadraticAgent {
    pub p: DMatrix<f64>,
    pub c: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl NlpProblem for QuadraticAgent {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.c.dot(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x + &self.c
    }
    fn lower(&self) -> DVector<f64> {
        self.lower.clone()
    }
    fn upper(&self) -> DVector<f64> {
        self.upper.clone()
    }
    fn hessian_hint(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.p.clone())
    }
}

/// The local problem of step 1: the agent's objective plus the dual and
/// proximal terms.
struct Augmented<'a> {
    inner: &'a dyn AgentSubproblem,
    lambda: &'a DVector<f64>,
    y: &'a DVector<f64>,
    rho: f64,
    sigma: &'a DVector<f64>,
}

impl NlpProblem for Augmented<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        let d = x - self.y;
        self.inner.objective(x) + self.lambda.dot(x) + 0.5 * self.rho * d.component_mul(&d).dot(self.sigma)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.gradient(x) + self.lambda + (x - self.y).component_mul(self.sigma) * self.rho
    }
    fn num_inequalities(&self) -> usize {
        self.inner.num_inequalities()
    }
    fn inequalities(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.inequalities(x)
    }
    fn inequality_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.inequality_jacobian(x)
    }
    fn lower(&self) -> DVector<f64> {
        self.inner.lower()
    }
    fn upper(&self) -> DVector<f64> {
        self.inner.upper()
    }
    fn hessian_hint(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let n = self.dim();
        let prox = DMatrix::from_diagonal(&(self.sigma * self.rho));
        Some(self.inner.hessian_hint(x).unwrap_or_else(|| DMatrix::zeros(n, n)) + prox)
    }
}

/// Step 1 for one agent.
pub fn local_step(
    subproblem: &dyn AgentSubproblem,
    y: &DVector<f64>,
    lambda: &DVector<f64>,
    rho: f64,
    sigma: &DVector<f64>,
    tol: f64,
) -> Result<SolveReport, SolverError> {
    let aug = Augmented { inner: subproblem, lambda, y, rho, sigma };
    let (lo, up) = (subproblem.lower(), subproblem.upper());
    let x0 = DVector::from_iterator(y.len(), (0..y.len()).map(|i| y[i].clamp(lo[i], up[i])));
    solve_nlp(&aug, &x0, NlpOptions { tol, max_iter: 200 })
}

/// Step 2: coupling residual and summed primal residual both within ε.
pub fn check_termination(solutions: &[DVector<f64>], y: &[DVector<f64>], q_total: f64, epsilon: f64) -> bool {
    let (coupling, primal) = residuals(solutions, y, q_total);
    coupling <= epsilon && primal <= epsilon
}

/// `(‖Σ q_j - Q·1‖, ‖Σ (q_j - y_j)‖)`.
pub fn residuals(solutions: &[DVector<f64>], y: &[DVector<f64>], q_total: f64) -> (f64, f64) {
    let n = solutions[0].len();
    let mut coupling = DVector::from_element(n, -q_total);
    let mut primal = DVector::zeros(n);
    for (q, yj) in solutions.iter().zip(y) {
        coupling += q;
        primal += q - yj;
    }
    (coupling.norm(), primal.norm())
}

/// Largest proximal term `ρ‖Σ(q_j - y_j)‖∞` over agents.
pub fn dual_residual(solutions: &[DVector<f64>], y: &[DVector<f64>], rho: f64, sigma: &DVector<f64>) -> f64 {
    solutions.iter().zip(y).map(|(q, yj)| rho * (q - yj).component_mul(sigma).amax()).fold(0.0, f64::max)
}

/// Step 3 output for one agent.
#[derive(Debug, Clone)]
pub struct Sensitivities {
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
    /// Jacobian rows of the active general inequality constraints.
    pub active_jacobian: DMatrix<f64>,
    /// Box limits on the coordination step, `lower - q` and `upper - q`.
    pub step_lower: DVector<f64>,
    pub step_upper: DVector<f64>,
}

impl Sensitivities {
    /// Sensitivities of an agent without constraints.
    pub fn unconstrained(gradient: DVector<f64>, hessian: DMatrix<f64>) -> Self {
        let n = gradient.len();
        Self {
            gradient,
            hessian,
            active_jacobian: DMatrix::zeros(0, n),
            step_lower: DVector::from_element(n, f64::NEG_INFINITY),
            step_upper: DVector::from_element(n, f64::INFINITY),
        }
    }
}

/// Step 3 for one agent, evaluated at its local solution.
pub fn sensitivities(
    subproblem: &dyn AgentSubproblem,
    report: &SolveReport,
    source: HessianSource,
    rho: f64,
    sigma: &DVector<f64>,
) -> Sensitivities {
    let x = &report.x;
    let n = x.len();
    let gradient = subproblem.gradient(x);
    let raw = match source {
        HessianSource::Exact => {
            let kappa = report.ineq_multipliers.clone();
            let has_ineq = subproblem.num_inequalities() > 0;
            let lag_grad = |z: &DVector<f64>| {
                let g = subproblem.gradient(z);
                if has_ineq {
                    g + subproblem.inequality_jacobian(z).transpose() * &kappa
                } else {
                    g
                }
            };
            let h = 1e-6 * (1.0 + x.amax());
            fd_hessian(lag_grad, x, h)
        }
        HessianSource::Bfgs => {
            let b = report.hessian.clone().unwrap_or_else(|| DMatrix::identity(n, n));
            b - DMatrix::from_diagonal(&(sigma * rho))
        }
    };
    let hessian = if min_eigenvalue(&raw) >= HESSIAN_FLOOR { raw } else { regularize_spd(&raw, HESSIAN_FLOOR) };

    let active: Vec<usize> = active_constraints(subproblem, x)
        .into_iter()
        .filter_map(|a| match a {
            ActiveConstraint::Inequality(i) => Some(i),
            _ => None,
        })
        .collect();
    let mut active_jacobian = DMatrix::zeros(active.len(), n);
    if !active.is_empty() {
        let jac = subproblem.inequality_jacobian(x);
        for (r, &i) in active.iter().enumerate() {
            active_jacobian.set_row(r, &jac.row(i));
        }
    }
    Sensitivities {
        gradient,
        hessian,
        active_jacobian,
        step_lower: subproblem.lower() - x,
        step_upper: subproblem.upper() - x,
    }
}

#[derive(Debug, Clone)]
pub struct Coordination {
    pub steps: Vec<DVector<f64>>,
    pub slack: DVector<f64>,
    pub lambda_qp: DVector<f64>,
}

/// Step 4: the coordination QP
///
/// ```text
///   min Σ_j ½Δq_jᵀH_jΔq_j + g_jᵀΔq_j + λᵀs + μ/2‖s‖²
///   s.t. Σ_j (q_j + Δq_j) - Q·1 = s,   G_j Δq_j = 0,
///        l_j ≤ q_j + Δq_j ≤ u_j
/// ```
///
/// `G_j` holds the active general inequalities. Without finite box limits
/// the QP is solved as one KKT system.
pub fn coordination_step(
    sens: &[Sensitivities],
    solutions: &[DVector<f64>],
    lambda: &DVector<f64>,
    mu: f64,
    q_total: f64,
) -> Result<Coordination, AladinError> {
    let horizon = lambda.len();
    let agents = sens.len();
    let nv = agents * horizon + horizon;
    let n_active: usize = sens.iter().map(|s| s.active_jacobian.nrows()).sum();
    let ne = horizon + n_active;

    let mut h = DMatrix::zeros(nv, nv);
    let mut g = DVector::zeros(nv);
    let mut a = DMatrix::zeros(ne, nv);
    let mut b = DVector::zeros(ne);
    let s_off = agents * horizon;
    for (j, s) in sens.iter().enumerate() {
        let off = j * horizon;
        h.view_mut((off, off), (horizon, horizon)).copy_from(&s.hessian);
        g.rows_mut(off, horizon).copy_from(&s.gradient);
    }
    for k in 0..horizon {
        h[(s_off + k, s_off + k)] = mu;
        g[s_off + k] = lambda[k];
    }
    // coupling rows: Σ_j Δq_j[k] - s_k = Q - Σ_j q_j[k]
    for k in 0..horizon {
        for j in 0..agents {
            a[(k, j * horizon + k)] = 1.0;
        }
        a[(k, s_off + k)] = -1.0;
        b[k] = q_total - solutions.iter().map(|q| q[k]).sum::<f64>();
    }
    let mut row = horizon;
    for (j, s) in sens.iter().enumerate() {
        for r in 0..s.active_jacobian.nrows() {
            for c in 0..horizon {
                a[(row, j * horizon + c)] = s.active_jacobian[(r, c)];
            }
            row += 1;
        }
    }
    let boxed = sens.iter().any(|s| s.step_lower.iter().chain(s.step_upper.iter()).any(|v| v.is_finite()));
    let (x, mult) = if boxed {
        let mut lower = DVector::from_element(nv, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(nv, f64::INFINITY);
        for (j, s) in sens.iter().enumerate() {
            lower.rows_mut(j * horizon, horizon).copy_from(&s.step_lower.map(|v| v.min(0.0)));
            upper.rows_mut(j * horizon, horizon).copy_from(&s.step_upper.map(|v| v.max(0.0)));
        }
        let qp = QpProblem::new(h, g).with_equalities(a, b).with_bounds(lower, upper);
        match solve_qp(&qp, 1e-13) {
            Ok(r) if r.status.is_success() => (r.x, r.eq_multipliers),
            Ok(_) | Err(SolverError::Singular) => return Err(AladinError::DegenerateCoordination),
            Err(e) => return Err(AladinError::Setup(e.to_string())),
        }
    } else {
        match solve_kkt(&h, &g, &a, &b) {
            Ok(sol) => sol,
            Err(SolverError::Singular) => return Err(AladinError::DegenerateCoordination),
            Err(e) => return Err(AladinError::Setup(e.to_string())),
        }
    };
    let steps = (0..agents).map(|j| x.rows(j * horizon, horizon).into_owned()).collect();
    Ok(Coordination {
        steps,
        slack: x.rows(s_off, horizon).into_owned(),
        lambda_qp: mult.rows(0, horizon).into_owned(),
    })
}

/// Primal guesses and coupling multiplier carried between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AladinIterate {
    pub y: Vec<DVector<f64>>,
    pub lambda: DVector<f64>,
}

/// Step 5: `y⁺ = y + β₁(q - y) + β₂Δq`, `λ⁺ = λ + β₃(λ_QP - λ)`.
pub fn primal_dual_update(
    iterate: &AladinIterate,
    solutions: &[DVector<f64>],
    steps: &[DVector<f64>],
    lambda_qp: &DVector<f64>,
    beta: [f64; 3],
) -> AladinIterate {
    let y =
        iterate.y.iter().zip(solutions).zip(steps).map(|((y, q), dq)| y + (q - y) * beta[0] + dq * beta[1]).collect();
    let lambda = &iterate.lambda + (lambda_qp - &iterate.lambda) * beta[2];
    AladinIterate { y, lambda }
}

/// Per-iteration trace record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub coupling_residual: f64,
    pub primal_residual: f64,
    pub lambda_norm: f64,
    pub rho: f64,
    pub mu: f64,
    pub nlp_time: f64,
    pub sens_time: f64,
    pub qp_time: f64,
}

/// Wall-clock seconds accumulated over all iterations of one solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AladinTimings {
    /// Local NLP time per agent.
    pub nlp: Vec<f64>,
    /// Sensitivity evaluation time per agent.
    pub sens: Vec<f64>,
    /// Coordination QP time.
    pub qp: f64,
}

#[derive(Debug, Clone)]
pub struct AladinResult {
    pub solutions: Vec<DVector<f64>>,
    pub lambda: DVector<f64>,
    /// The primal guesses the returned solutions were computed from.
    pub y: Vec<DVector<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub timings: AladinTimings,
    pub trace: Vec<TraceRow>,
    /// Local reports of the returned solutions.
    pub local_reports: Vec<SolveReport>,
    /// Whether every local SQP return during the solve was certified.
    pub all_local_certified: bool,
}

impl AladinResult {
    pub fn final_iterate(&self) -> AladinIterate {
        AladinIterate { y: self.solutions.clone(), lambda: self.lambda.clone() }
    }
}

pub fn aladin_solve(
    agents: &[&dyn AgentSubproblem],
    q_total: f64,
    config: &AladinConfig,
    warm_start: Option<&AladinIterate>,
) -> Result<AladinResult, AladinError> {
    config.validate()?;
    if agents.is_empty() {
        return Err(AladinError::Setup("at least one agent is required".into()));
    }
    if !(q_total > 0.0) {
        return Err(AladinError::Setup(format!("resource total must be positive, got {q_total}")));
    }
    let horizon = agents[0].dim();
    if agents.iter().any(|a| a.dim() != horizon) {
        return Err(AladinError::Setup("all agents must share the horizon length".into()));
    }
    let sigma = config.sigma_vec(horizon);
    if sigma.len() != horizon {
        return Err(AladinError::Setup("Σ diagonal does not match the horizon".into()));
    }

    let mut it = match warm_start {
        Some(w) if w.y.len() == agents.len() && w.lambda.len() == horizon => w.clone(),
        Some(_) => return Err(AladinError::Setup("warm start does not match the agents".into())),
        None => AladinIterate {
            y: agents
                .iter()
                .map(|a| {
                    let (lo, up) = (a.lower(), a.upper());
                    DVector::from_iterator(horizon, (0..horizon).map(|k| 0.0_f64.clamp(lo[k], up[k])))
                })
                .collect(),
            lambda: DVector::zeros(horizon),
        },
    };

    let mut rho = config.rho0;
    let mut mu = config.mu0;
    let mut timings = AladinTimings { nlp: vec![0.0; agents.len()], sens: vec![0.0; agents.len()], qp: 0.0 };
    let mut trace = Vec::new();
    let mut all_certified = true;
    let mut best: Option<(f64, Vec<SolveReport>, AladinIterate)> = None;
    let mut last_coupling = f64::INFINITY;
    let mut increases = 0;

    for p in 0..config.max_iter {
        // step 1
        let run_local = |(j, agent): (usize, &&dyn AgentSubproblem)| {
            let t0 = Instant::now();
            let r = local_step(*agent, &it.y[j], &it.lambda, rho, &sigma, config.local_tol);
            (r, t0.elapsed().as_secs_f64())
        };
        let locals: Vec<_> = if config.parallel {
            agents.par_iter().enumerate().map(run_local).collect()
        } else {
            agents.iter().enumerate().map(run_local).collect()
        };
        let mut reports = Vec::with_capacity(agents.len());
        let mut nlp_time = 0.0;
        for (j, (r, dt)) in locals.into_iter().enumerate() {
            timings.nlp[j] += dt;
            nlp_time += dt;
            let r = r.map_err(|source| AladinError::Local { agent: j, source })?;
            all_certified &= r.status.is_success() && r.kkt.certifies(config.local_tol);
            reports.push(r);
        }
        let solutions: Vec<DVector<f64>> = reports.iter().map(|r| r.x.clone()).collect();

        // step 2
        let (coupling, primal) = residuals(&solutions, &it.y, q_total);
        let mut row = TraceRow {
            iteration: p,
            coupling_residual: coupling,
            primal_residual: primal,
            lambda_norm: it.lambda.norm(),
            rho,
            mu,
            nlp_time,
            sens_time: 0.0,
            qp_time: 0.0,
        };
        if best.as_ref().is_none_or(|b| coupling < b.0) {
            best = Some((coupling, reports.clone(), it.clone()));
        }
        let dual_ok = !config.dual_check || dual_residual(&solutions, &it.y, rho, &sigma) <= config.epsilon;
        if coupling <= config.epsilon && primal <= config.epsilon && dual_ok {
            trace.push(row);
            return Ok(AladinResult {
                solutions,
                lambda: it.lambda.clone(),
                y: it.y,
                iterations: p,
                converged: true,
                timings,
                trace,
                local_reports: reports,
                all_local_certified: all_certified,
            });
        }

        // step 3
        let run_sens = |(j, agent): (usize, &&dyn AgentSubproblem)| {
            let t0 = Instant::now();
            let s = sensitivities(*agent, &reports[j], config.hessian, rho, &sigma);
            (s, t0.elapsed().as_secs_f64())
        };
        let sens_t: Vec<_> = if config.parallel {
            agents.par_iter().enumerate().map(run_sens).collect()
        } else {
            agents.iter().enumerate().map(run_sens).collect()
        };
        let mut sens = Vec::with_capacity(agents.len());
        for (j, (s, dt)) in sens_t.into_iter().enumerate() {
            timings.sens[j] += dt;
            row.sens_time += dt;
            sens.push(s);
        }

        // step 4
        let t0 = Instant::now();
        let coord = coordination_step(&sens, &solutions, &it.lambda, mu, q_total)?;
        let dt = t0.elapsed().as_secs_f64();
        timings.qp += dt;
        row.qp_time = dt;
        trace.push(row);

        // step 5
        it = primal_dual_update(&it, &solutions, &coord.steps, &coord.lambda_qp, config.steps);

        if coupling > last_coupling {
            increases += 1;
        } else {
            increases = 0;
        }
        last_coupling = coupling;
        rho = (rho * config.rho_growth).min(config.max_penalty);
        mu = (mu * config.mu_growth).min(config.max_penalty);
        if increases >= 3 {
            rho = (rho * 10.0).min(config.max_penalty);
            mu = (mu * 10.0).min(config.max_penalty);
            increases = 0;
        }
    }

    let (_, reports, best_it) = best.expect("at least one iteration ran");
    Ok(AladinResult {
        solutions: reports.iter().map(|r| r.x.clone()).collect(),
        lambda: best_it.lambda,
        y: best_it.y,
        iterations: config.max_iter,
        converged: false,
        timings,
        trace,
        local_reports: reports,
        all_local_certified: all_certified,
    })
}

/// Independent check of a returned solution: coupling residual plus each
/// agent's KKT residual with the coupling multiplier folded into its
/// gradient and bound/inequality multipliers re-estimated from scratch.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub coupling_residual: f64,
    pub agent_kkt: Vec<KktResidual>,
}

impl Certificate {
    pub fn passes(&self, epsilon: f64) -> bool {
        self.coupling_residual <= epsilon && self.agent_kkt.iter().all(|k| k.max() <= 10.0 * epsilon)
    }
}

struct WithPrice<'a> {
    inner: &'a dyn AgentSubproblem,
    lambda: &'a DVector<f64>,
}

impl NlpProblem for WithPrice<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.inner.objective(x) + self.lambda.dot(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.gradient(x) + self.lambda
    }
    fn num_inequalities(&self) -> usize {
        self.inner.num_inequalities()
    }
    fn inequalities(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.inequalities(x)
    }
    fn inequality_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.inner.inequality_jacobian(x)
    }
    fn lower(&self) -> DVector<f64> {
        self.inner.lower()
    }
    fn upper(&self) -> DVector<f64> {
        self.inner.upper()
    }
}

pub fn certify(
    agents: &[&dyn AgentSubproblem],
    solutions: &[DVector<f64>],
    lambda: &DVector<f64>,
    q_total: f64,
) -> Certificate {
    let (coupling, _) = residuals(solutions, solutions, q_total);
    let agent_kkt = agents
        .iter()
        .zip(solutions)
        .map(|(a, x)| {
            let priced = WithPrice { inner: *a, lambda };
            let (im, lm, um) = estimate_multipliers(&priced, x);
            nlp_kkt_residual(&priced, x, &im, &lm, &um)
        })
        .collect();
    Certificate { coupling_residual: coupling, agent_kkt }
}

/// Least-squares multipliers of the constraints active at `x`.
fn estimate_multipliers<P: NlpProblem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
    let n = problem.dim();
    let m = problem.num_inequalities();
    let active = active_constraints(problem, x);
    let mut ineq = DVector::zeros(m);
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    if active.is_empty() {
        return (ineq, lower, upper);
    }
    let grad = problem.gradient(x);
    let jac = problem.inequality_jacobian(x);
    // columns: gradients of the active constraints in the "+" convention
    let mut a = DMatrix::zeros(n, active.len());
    for (c, act) in active.iter().enumerate() {
        match *act {
            ActiveConstraint::Inequality(i) => a.set_column(c, &jac.row(i).transpose()),
            ActiveConstraint::Lower(i) => a[(i, c)] = -1.0,
            ActiveConstraint::Upper(i) => a[(i, c)] = 1.0,
        }
    }
    let svd = a.svd(true, true);
    let mult = svd.solve(&(-grad), 1e-12).unwrap_or_else(|_| DVector::zeros(active.len()));
    for (c, act) in active.iter().enumerate() {
        match *act {
            ActiveConstraint::Inequality(i) => ineq[i] = mult[c],
            ActiveConstraint::Lower(i) => lower[i] = mult[c],
            ActiveConstraint::Upper(i) => upper[i] = mult[c],
        }
    }
    (ineq, lower, upper)
}
