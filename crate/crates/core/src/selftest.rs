//! Quick runtime checks of the numerical kernels against independent
//! references, for the `selftest` command.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aladin::{aladin_solve, AgentSubproblem, AladinConfig, QuadraticAgent};
use crate::dmpc::{
    run_closed_loop, ClosedLoopOptions, ClusterBoundary, ClusterSubproblem, ControllerConfig, ControllerMode,
};
use crate::partition::{calinski_harabasz, select_partition, FeaturePoint, Partition};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::solvers::{fd_gradient, solve_qp, NlpProblem, QpProblem};
use crate::thermal::{inlet_step, loop_step, mixed_outlet, LoopInputs, LoopParams, LoopState, ThermalBody};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome { name, passed, detail }
}

pub fn run_all() -> Vec<CheckOutcome> {
    vec![
        properties(),
        steady_state(),
        inlet_fixed_point(),
        mixing(),
        ch_toy(),
        qp_enumeration(),
        aladin_monolithic(),
        blob_recovery(),
        gradients(),
        short_closed_loop(),
    ]
}

fn properties() -> CheckOutcome {
    let p = LoopParams::default().body().properties(200.0, 25.0);
    let err = (p.rho - 768.6).abs().max((p.c - 2515.6).abs());
    outcome("fluid properties at 200 °C", err < 1e-9, format!("rho {} c {}", p.rho, p.c))
}

fn steady_state() -> CheckOutcome {
    let params = LoopParams::default();
    let irradiance = 128_352.0 / (params.eta * params.surface);
    let state = LoopState { t_out: 230.0, q_applied: 9.553e-4 };
    let next = loop_step(&state, &params, 170.0, LoopInputs { irradiance, t_ambient: 25.0 }, 0.5);
    outcome("steady-state flow holds the outlet", (next - 230.0).abs() <= 1e-3, format!("T+ = {next}"))
}

fn inlet_fixed_point() -> CheckOutcome {
    let t = inlet_step(170.0, 250.0, 0.5);
    outcome("inlet filter fixed point", t == 170.0, format!("T_in+ = {t}"))
}

fn mixing() -> CheckOutcome {
    let equal = mixed_outlet(&[240.0, 260.0], &[1e-3, 1e-3]).unwrap_or(f64::NAN);
    let weighted = mixed_outlet(&[240.0, 260.0], &[3e-3, 1e-3]).unwrap_or(f64::NAN);
    let degenerate = mixed_outlet(&[240.0], &[0.0]).is_err();
    let ok = (equal - 250.0).abs() < 1e-12 && (weighted - 245.0).abs() < 1e-12 && degenerate;
    outcome("flow-weighted mixing", ok, format!("{equal} {weighted}"))
}

fn ch_toy() -> CheckOutcome {
    let pts = [[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]];
    let ch = calinski_harabasz(&pts, &[0, 0, 1, 1], false).unwrap_or(f64::NAN);
    outcome("Calinski-Harabasz toy value", (ch - 400.0).abs() < 1e-9, format!("CH = {ch}"))
}

/// Exhaustive search over which box bounds are active.
fn box_qp_by_enumeration(h: &DMatrix<f64>, g: &DVector<f64>, lo: &DVector<f64>, up: &DVector<f64>) -> DVector<f64> {
    let n = g.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut x = DVector::zeros(n);
        let mut free = Vec::new();
        let mut c = code;
        for i in 0..n {
            match c % 3 {
                0 => free.push(i),
                1 => x[i] = lo[i],
                _ => x[i] = up[i],
            }
            c /= 3;
        }
        if !free.is_empty() {
            let hff = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
            let rhs = DVector::from_fn(free.len(), |a, _| {
                let i = free[a];
                -g[i] - (0..n).filter(|j| !free.contains(j)).map(|j| h[(i, j)] * x[j]).sum::<f64>()
            });
            let Some(sol) = hff.cholesky().map(|ch| ch.solve(&rhs)) else { continue };
            for (a, &i) in free.iter().enumerate() {
                x[i] = sol[a];
            }
        }
        if (0..n).any(|i| x[i] < lo[i] - 1e-12 || x[i] > up[i] + 1e-12) {
            continue;
        }
        let f = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
        if best.as_ref().is_none_or(|b| f < b.0) {
            best = Some((f, x));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| DVector::zeros(n))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * 0.5
}

fn qp_enumeration() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(1..=3);
        let h = random_spd(&mut rng, n);
        let g = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
        let lo = DVector::from_element(n, -1.0);
        let up = DVector::from_element(n, 1.0);
        let reference = box_qp_by_enumeration(&h, &g, &lo, &up);
        match solve_qp(&QpProblem::new(h, g).with_bounds(lo, up), 1e-12) {
            Ok(r) => worst = worst.max((r.x - reference).amax()),
            Err(e) => return outcome("QP against active-set enumeration", false, e.to_string()),
        }
    }
    outcome("QP against active-set enumeration", worst < 1e-8, format!("max deviation {worst:.2e}"))
}

fn aladin_monolithic() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let horizon = rng.gen_range(1..=3);
        let n_agents = rng.gen_range(2..=4);
        let agents: Vec<QuadraticAgent> = (0..n_agents)
            .map(|_| QuadraticAgent {
                p: random_spd(&mut rng, horizon),
                c: DVector::from_fn(horizon, |_, _| rng.gen_range(-2.0..2.0)),
                lower: DVector::zeros(horizon),
                upper: DVector::from_element(horizon, 2.0),
            })
            .collect();
        let q_total = rng.gen_range(0.5..(2.0 * n_agents as f64 - 0.5));

        let dim = horizon * n_agents;
        let mut h = DMatrix::zeros(dim, dim);
        let mut g = DVector::zeros(dim);
        let mut a = DMatrix::zeros(horizon, dim);
        for (j, ag) in agents.iter().enumerate() {
            h.view_mut((j * horizon, j * horizon), (horizon, horizon)).copy_from(&ag.p);
            g.rows_mut(j * horizon, horizon).copy_from(&ag.c);
            for s in 0..horizon {
                a[(s, j * horizon + s)] = 1.0;
            }
        }
        let mono = QpProblem::new(h, g)
            .with_equalities(a, DVector::from_element(horizon, q_total))
            .with_bounds(DVector::zeros(dim), DVector::from_element(dim, 2.0));
        let reference = match solve_qp(&mono, 1e-12) {
            Ok(r) => r.x,
            Err(e) => return outcome("ALADIN against the monolithic QP", false, e.to_string()),
        };

        let refs: Vec<&dyn AgentSubproblem> = agents.iter().map(|a| a as &dyn AgentSubproblem).collect();
        let config = AladinConfig { epsilon: 1e-9, local_tol: 1e-12, parallel: false, ..AladinConfig::default() };
        match aladin_solve(&refs, q_total, &config, None) {
            Ok(r) if r.converged => {
                for (j, x) in r.solutions.iter().enumerate() {
                    worst = worst.max((x - reference.rows(j * horizon, horizon)).amax());
                }
            }
            Ok(r) => {
                return outcome(
                    "ALADIN against the monolithic QP",
                    false,
                    format!(
                        "did not converge h {horizon} n {n_agents} q {q_total} it {} {:?}",
                        r.iterations,
                        r.trace.last()
                    ),
                )
            }
            Err(e) => return outcome("ALADIN against the monolithic QP", false, e.to_string()),
        }
    }
    outcome("ALADIN against the monolithic QP", worst < 1e-6, format!("max deviation {worst:.2e}"))
}

fn blob_recovery() -> CheckOutcome {
    let centers = [(60e3, 200.0), (120e3, 240.0), (180e3, 280.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (c, &(p, t)) in centers.iter().enumerate() {
        for _ in 0..4 {
            points.push(FeaturePoint {
                effective_power: p + rng.gen_range(-1e3..1e3),
                mean_temp: t + rng.gen_range(-1.0..1.0),
            });
            truth.push(c);
        }
    }
    let got = select_partition(&points, 6, 1, 0);
    let want = Partition::from_assignment(&truth, 0);
    outcome("planted blobs recovered", got.same_clusters(&want), format!("{} clusters", got.len()))
}

fn gradients() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = ControllerConfig::from_scenario(&ScenarioConfig::with_loops(2));
    let p = LoopParams::default();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let size = rng.gen_range(1..=3);
        let b = ClusterBoundary {
            t0: rng.gen_range(225.0..275.0),
            effective_power: rng.gen_range(60e3..140e3) * size as f64,
            t_in: 170.0,
            t_ambient: 25.0,
            body: ThermalBody { volume: p.area * p.length * size as f64, surface: p.surface * size as f64 },
            size,
            t_ref: vec![250.0; cfg.horizon],
            q_lower: 0.2e-3 * size as f64,
            q_upper: 2e-3 * size as f64,
        };
        let sub = ClusterSubproblem::new(b, cfg);
        let x = DVector::from_fn(cfg.horizon, |_, _| rng.gen_range(0.3..1.9) * size as f64);
        let g = sub.gradient(&x);
        let fd = fd_gradient(|v| sub.objective(v), &x, 1e-6);
        worst = worst.max((&g - &fd).amax() / g.amax().max(1.0));
    }
    outcome("cluster gradients against finite differences", worst < 1e-5, format!("max relative deviation {worst:.2e}"))
}

fn short_closed_loop() -> CheckOutcome {
    let mut c = ScenarioConfig::with_loops(3);
    c.duration = 300.0;
    let scenario = match Scenario::new(c) {
        Ok(s) => s,
        Err(e) => return outcome("short closed loop certifies", false, e.to_string()),
    };
    match run_closed_loop(&scenario, &ClosedLoopOptions::new(ControllerMode::Fine, &scenario)) {
        Ok(log) => {
            let bad = log.control.iter().filter(|c| !(c.converged && c.certified && c.local_certified)).count();
            outcome(
                "short closed loop certifies",
                bad == 0,
                format!("{bad} of {} steps uncertified", log.control.len()),
            )
        }
        Err(e) => outcome("short closed loop certifies", false, e.to_string()),
    }
}
