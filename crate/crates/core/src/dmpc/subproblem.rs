//! Cluster MPC subproblems and the centralized reference problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioConfig;
use crate::solvers::{solve_nlp, NlpOptions, NlpProblem, SolveReport, SolverError};
use crate::thermal::{LumpedCluster, ThermalBody};

/// Controller tuning shared by every cluster subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub dt_control: f64,
    pub horizon: usize,
    pub w_e: f64,
    pub w_q: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Weight of the squared temperature-band violation.
    pub band_weight: f64,
    /// Width, °C, of the cubic blend that makes the band penalty twice
    /// differentiable at the band edges.
    pub band_smoothing: f64,
    /// Optimization variables are flows times this factor (1e3: l/s).
    pub flow_scale: f64,
    /// Sink cost `weight·‖q₀‖²`, q₀ in m³/s.
    pub sink_weight: f64,
    pub q_total: f64,
}

impl ControllerConfig {
    pub fn from_scenario(s: &ScenarioConfig) -> Self {
        Self {
            dt_control: s.dt_control,
            horizon: s.horizon,
            w_e: s.w_e,
            w_q: s.w_q,
            t_min: s.t_min,
            t_max: s.t_max,
            band_weight: 1e6,
            band_smoothing: 0.1,
            flow_scale: 1e3,
            sink_weight: 1e-6,
            q_total: s.q_total,
        }
    }
}

/// Everything a cluster prediction depends on, frozen at the control instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterBoundary {
    pub t0: f64,
    pub effective_power: f64,
    pub t_in: f64,
    pub t_ambient: f64,
    pub body: ThermalBody,
    pub size: usize,
    /// Reference at the end of each horizon stage.
    pub t_ref: Vec<f64>,
    /// Cluster flow bounds, m³/s.
    pub q_lower: f64,
    pub q_upper: f64,
}

impl ClusterBoundary {
    pub fn from_lumped(c: &LumpedCluster, t_ref: Vec<f64>) -> Self {
        Self {
            t0: c.t0,
            effective_power: c.effective_power,
            t_in: c.t_in,
            t_ambient: c.t_ambient,
            body: c.body,
            size: c.size,
            t_ref,
            q_lower: c.q_lower,
            q_upper: c.q_upper,
        }
    }
}

/// Outlet temperatures at the end of each stage for flows `q` (m³/s).
pub fn predict_outlet_sequence(b: &ClusterBoundary, q: &[f64], dt: f64) -> Vec<f64> {
    let mut t = b.t0;
    q.iter()
        .map(|&qn| {
            t = b.body.step(t, b.t_in, b.t_ambient, b.effective_power, qn, dt);
            t
        })
        .collect()
}

/// Predicted temperatures and their Jacobian `∂T_n/∂q_m` (lower triangular).
pub fn predict_with_sensitivities(b: &ClusterBoundary, q: &[f64], dt: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = q.len();
    let mut temps = Vec::with_capacity(n);
    let mut jac = DMatrix::zeros(n, n);
    let mut t = b.t0;
    let mut dt_dq = vec![0.0; n];
    for (stage, &qn) in q.iter().enumerate() {
        let d = b.body.step_with_derivatives(t, b.t_in, b.t_ambient, b.effective_power, qn, dt);
        for v in dt_dq.iter_mut().take(stage) {
            *v *= d.d_t_out;
        }
        dt_dq[stage] = d.d_q;
        for (m, &v) in dt_dq.iter().enumerate().take(stage + 1) {
            jac[(stage, m)] = v;
        }
        t = d.next;
        temps.push(t);
    }
    (temps, jac)
}

/// Breakdown of a cluster objective.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostTerms {
    pub tracking: f64,
    pub flow: f64,
    pub band: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.tracking + self.flow + self.band
    }
}

/// One cluster agent. Its variable is the cluster flow sequence scaled by
/// `flow_scale`; the cost is the per-loop stage cost times the cluster size
/// plus a quadratic penalty on leaving the temperature band.
#[derive(Debug, Clone)]
pub struct ClusterSubproblem {
    pub boundary: ClusterBoundary,
    pub config: ControllerConfig,
}

struct Evaluation {
    value: f64,
    gradient: DVector<f64>,
    gauss_newton: DMatrix<f64>,
}

impl ClusterSubproblem {
    pub fn new(boundary: ClusterBoundary, config: ControllerConfig) -> Self {
        Self { boundary, config }
    }

    fn flows(&self, x: &DVector<f64>) -> Vec<f64> {
        x.iter().map(|v| v / self.config.flow_scale).collect()
    }

    pub fn cost_terms(&self, x: &DVector<f64>) -> CostTerms {
        let q = self.flows(x);
        let temps = predict_outlet_sequence(&self.boundary, &q, self.config.dt_control);
        let c = &self.config;
        let size = self.boundary.size as f64;
        let mut terms = CostTerms::default();
        for (n, &t) in temps.iter().enumerate() {
            let e = t - self.boundary.t_ref[n];
            terms.tracking += size * c.w_e * e * e;
            terms.flow += c.w_q * q[n] * q[n] / size;
            let v = band_violation(t, c.t_min, c.t_max);
            terms.band += size * c.band_weight * band_penalty(v, c.band_smoothing).0;
        }
        terms
    }

    fn evaluate(&self, x: &DVector<f64>) -> Evaluation {
        let c = &self.config;
        let q = self.flows(x);
        let n = q.len();
        let (temps, jac) = predict_with_sensitivities(&self.boundary, &q, c.dt_control);
        let size = self.boundary.size as f64;
        let mut value = 0.0;
        let mut dfdt = DVector::zeros(n);
        let mut curv = DVector::zeros(n);
        let mut grad_q = DVector::zeros(n);
        for k in 0..n {
            let e = temps[k] - self.boundary.t_ref[k];
            let v = band_violation(temps[k], c.t_min, c.t_max);
            let (pen, dpen, d2pen) = band_penalty(v, c.band_smoothing);
            value += size * (c.w_e * e * e + c.band_weight * pen) + c.w_q * q[k] * q[k] / size;
            dfdt[k] = size * (2.0 * c.w_e * e + c.band_weight * dpen);
            curv[k] = size * (2.0 * c.w_e + c.band_weight * d2pen);
            grad_q[k] = 2.0 * c.w_q * q[k] / size;
        }
        grad_q += jac.transpose() * dfdt;
        let mut h = jac.transpose() * DMatrix::from_diagonal(&curv) * &jac;
        for k in 0..n {
            h[(k, k)] += 2.0 * c.w_q / size;
        }
        let s = c.flow_scale;
        Evaluation { value, gradient: grad_q / s, gauss_newton: h / (s * s) }
    }
}

/// `v²` beyond `width`, a cubic below it; value, first and second
/// derivative with respect to the signed violation `v`.
fn band_penalty(v: f64, width: f64) -> (f64, f64, f64) {
    let a = v.abs();
    let (p, d1, d2) = if a >= width {
        (a * a - width * a + width * width / 3.0, 2.0 * a - width, 2.0)
    } else {
        (a * a * a / (3.0 * width), a * a / width, 2.0 * a / width)
    };
    (p, d1 * v.signum(), d2)
}

/// Signed distance outside `[lo, hi]`.
fn band_violation(t: f64, lo: f64, hi: f64) -> f64 {
    (t - hi).max(0.0) - (lo - t).max(0.0)
}

impl NlpProblem for ClusterSubproblem {
    fn dim(&self) -> usize {
        self.config.horizon
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.evaluate(x).value
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.evaluate(x).gradient
    }
    fn lower(&self) -> DVector<f64> {
        DVector::from_element(self.config.horizon, self.boundary.q_lower * self.config.flow_scale)
    }
    fn upper(&self) -> DVector<f64> {
        DVector::from_element(self.config.horizon, self.boundary.q_upper * self.config.flow_scale)
    }
    fn hessian_hint(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.evaluate(x).gauss_newton)
    }
}

/// All clusters optimized jointly with `Σ_j q_j ≤ Q_T` per stage as a hard
/// inequality.
pub struct CentralizedProblem<'a> {
    pub clusters: &'a [ClusterSubproblem],
    pub q_total: f64,
}

impl CentralizedProblem<'_> {
    fn horizon(&self) -> usize {
        self.clusters[0].config.horizon
    }

    fn block(&self, x: &DVector<f64>, j: usize) -> DVector<f64> {
        let h = self.horizon();
        x.rows(j * h, h).into_owned()
    }
}

impl NlpProblem for CentralizedProblem<'_> {
    fn dim(&self) -> usize {
        self.clusters.len() * self.horizon()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        self.clusters.iter().enumerate().map(|(j, c)| c.objective(&self.block(x, j))).sum()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = self.horizon();
        let mut g = DVector::zeros(self.dim());
        for (j, c) in self.clusters.iter().enumerate() {
            g.rows_mut(j * h, h).copy_from(&c.gradient(&self.block(x, j)));
        }
        g
    }
    fn num_inequalities(&self) -> usize {
        self.horizon()
    }
    fn inequalities(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = self.horizon();
        let cap = self.q_total * self.clusters[0].config.flow_scale;
        DVector::from_iterator(h, (0..h).map(|n| (0..self.clusters.len()).map(|j| x[j * h + n]).sum::<f64>() - cap))
    }
    fn inequality_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        let h = self.horizon();
        let mut a = DMatrix::zeros(h, self.dim());
        for n in 0..h {
            for j in 0..self.clusters.len() {
                a[(n, j * h + n)] = 1.0;
            }
        }
        a
    }
    fn lower(&self) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = self.clusters.iter().map(|c| c.lower()).collect();
        stack(&parts)
    }
    fn upper(&self) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = self.clusters.iter().map(|c| c.upper()).collect();
        stack(&parts)
    }
    fn hessian_hint(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let h = self.horizon();
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (j, c) in self.clusters.iter().enumerate() {
            let b = c.hessian_hint(&self.block(x, j))?;
            m.view_mut((j * h, j * h), (h, h)).copy_from(&b);
        }
        Some(m)
    }
}

fn stack(parts: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.iter().flat_map(|p| p.iter().copied()))
}

/// Result of the monolithic reference solve.
#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    /// Cluster flow sequences, m³/s.
    pub flows: Vec<Vec<f64>>,
    pub objective: f64,
    pub report: SolveReport,
}

pub fn centralized_reference_solve(
    clusters: &[ClusterSubproblem],
    q_total: f64,
    tol: f64,
) -> Result<CentralizedSolution, SolverError> {
    let problem = CentralizedProblem { clusters, q_total };
    let h = problem.horizon();
    let lo = problem.lower();
    // feasible start: every cluster at its lower bound
    let report = solve_nlp(&problem, &lo, NlpOptions { tol, max_iter: 200 })?;
    let scale = clusters[0].config.flow_scale;
    let flows = (0..clusters.len()).map(|j| (0..h).map(|n| report.x[j * h + n] / scale).collect()).collect();
    Ok(CentralizedSolution { flows, objective: report.objective, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::fd_gradient;
    use crate::thermal::{loop_step, LoopInputs, LoopParams, LoopState};
    use approx::assert_relative_eq;

    fn cfg(horizon: usize) -> ControllerConfig {
        let mut s = ScenarioConfig::with_loops(1);
        s.horizon = horizon;
        ControllerConfig::from_scenario(&s)
    }

    fn boundary(t0: f64, power: f64, size: usize, horizon: usize) -> ClusterBoundary {
        let p = LoopParams::default();
        ClusterBoundary {
            t0,
            effective_power: power * size as f64,
            t_in: 170.0,
            t_ambient: 25.0,
            body: ThermalBody { volume: p.area * p.length * size as f64, surface: p.surface * size as f64 },
            size,
            t_ref: vec![230.0; horizon],
            q_lower: 0.2e-3 * size as f64,
            q_upper: 2e-3 * size as f64,
        }
    }

    #[test]
    fn steady_state_prediction() {
        let b = boundary(230.0, 128_352.0, 1, 5);
        let p = b.body.properties(200.0, 25.0);
        let q = (128_352.0 - p.heat_loss) / (p.vol_heat_capacity * 60.0);
        assert!((q - 9.553e-4).abs() < 1e-6);
        for v in predict_outlet_sequence(&b, &[q; 5], 30.0) {
            assert!((v - 230.0).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn single_stage_matches_loop_step() {
        let b = boundary(240.0, 128_352.0, 1, 1);
        let t = predict_outlet_sequence(&b, &[1e-3], 30.0);
        let p = LoopParams::default();
        let state = LoopState { t_out: 240.0, q_applied: 1e-3 };
        let direct = loop_step(
            &state,
            &p,
            170.0,
            LoopInputs { irradiance: 128_352.0 / (p.eta * p.surface), t_ambient: 25.0 },
            30.0,
        );
        assert_relative_eq!(t[0], direct, max_relative = 1e-12);
    }

    #[test]
    fn no_sun_cools_monotonically() {
        let b = boundary(260.0, 0.0, 1, 5);
        let t = predict_outlet_sequence(&b, &[2e-3; 5], 30.0);
        assert!(t[0] < 260.0);
        assert!(t.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn analytic_gradient_matches_fd() {
        for (t0, size) in [(230.0, 1), (200.0, 3), (310.0, 2)] {
            let sp = ClusterSubproblem::new(boundary(t0, 120_000.0, size, 5), cfg(5));
            let x = DVector::from_fn(5, |i, _| (0.5 + 0.2 * i as f64) * size as f64);
            let g = sp.gradient(&x);
            let fd = fd_gradient(|z| sp.objective(z), &x, 1e-6);
            for i in 0..5 {
                assert_relative_eq!(g[i], fd[i], max_relative = 1e-5, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn identical_clusters_identical_problems() {
        let a = ClusterSubproblem::new(boundary(235.0, 1e5, 1, 3), cfg(3));
        let b = ClusterSubproblem::new(boundary(235.0, 1e5, 1, 3), cfg(3));
        let x = DVector::from_element(3, 0.8);
        assert_eq!(a.objective(&x), b.objective(&x));
        assert_eq!(a.gradient(&x), b.gradient(&x));
    }

    #[test]
    fn reference_at_zero_flow_limit_pushes_to_lower_bound() {
        // with T already at reference and no power or loss to move it, only the flow cost acts
        let mut b = boundary(170.0, 0.0, 1, 3);
        b.t_ambient = 170.0;
        b.t_ref = vec![170.0; 3];
        let sp = ClusterSubproblem::new(b, cfg(3));
        let r = solve_nlp(&sp, &DVector::from_element(3, 1.0), NlpOptions::default()).unwrap();
        for v in r.x.iter() {
            assert_relative_eq!(*v, 0.2, epsilon = 1e-9);
        }
    }

    #[test]
    fn centralized_single_loop_matches_local_solve() {
        let sp = ClusterSubproblem::new(boundary(240.0, 128_352.0, 1, 3), cfg(3));
        let central = centralized_reference_solve(std::slice::from_ref(&sp), 1.0, 1e-10).unwrap();
        let local = solve_nlp(&sp, &sp.lower(), NlpOptions { tol: 1e-10, max_iter: 200 }).unwrap();
        assert_relative_eq!(central.objective, local.objective, max_relative = 1e-8);
    }

    #[test]
    fn centralized_symmetry() {
        let sps: Vec<_> = (0..2).map(|_| ClusterSubproblem::new(boundary(245.0, 128_352.0, 1, 3), cfg(3))).collect();
        let c = centralized_reference_solve(&sps, 1.5e-3, 1e-10).unwrap();
        for n in 0..3 {
            assert_relative_eq!(c.flows[0][n], c.flows[1][n], epsilon = 1e-9);
            assert!(c.flows[0][n] + c.flows[1][n] <= 1.5e-3 + 1e-12);
        }
    }
}
