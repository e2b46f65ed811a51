//! The closed-loop simulation: partition refresh, distributed MPC solve,
//! flow allocation and plant stepping.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::{ControlRecord, LogMeta, LogRow, SimulationLog};
use super::subproblem::{ClusterBoundary, ClusterSubproblem, ControllerConfig};
use crate::aladin::{aladin_solve, certify, AgentSubproblem, AladinConfig, AladinIterate, SinkAgent};
use crate::partition::{build_feature_dataset, select_partition, Partition};
use crate::scenario::{Scenario, ScenarioError};
use crate::thermal::{
    inlet_step, loop_step, lump_cluster, mixed_outlet, FieldState, LoopState, ThermalError, GENERATOR_DROP,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("plant: {0}")]
    Thermal(#[from] ThermalError),
    #[error("invalid run options: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// Partition re-selected every `dt_cluster` seconds with at most
    /// `n_cl_max` clusters.
    Dynamic { n_cl_max: usize, dt_cluster: f64 },
    /// One agent per loop.
    Fine,
    /// One lumped model for the whole field.
    Coarse,
    /// A fixed partition.
    Frozen(Partition),
}

impl ControllerMode {
    pub fn label(&self) -> String {
        match self {
            Self::Dynamic { n_cl_max, dt_cluster } => format!("dynamic(n_cl_max={n_cl_max},dt_cluster={dt_cluster})"),
            Self::Fine => "fine".into(),
            Self::Coarse => "coarse".into(),
            Self::Frozen(p) => format!("frozen({} clusters)", p.len()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopOptions {
    pub mode: ControllerMode,
    pub seed: u64,
    pub aladin: AladinConfig,
    /// Run the independent KKT check after every solve.
    pub certify: bool,
    /// Stop after this many simulation steps.
    pub max_steps: Option<usize>,
}

impl ClosedLoopOptions {
    pub fn new(mode: ControllerMode, scenario: &Scenario) -> Self {
        let aladin = AladinConfig { epsilon: scenario.config.epsilon, ..AladinConfig::default() };
        Self { mode, seed: scenario.config.seed, aladin, certify: true, max_steps: None }
    }
}

/// First-stage flows of one control instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPlan {
    /// Cluster flows, m³/s, in partition order.
    pub cluster_flows: Vec<f64>,
    /// Per-loop flows, m³/s.
    pub loop_flows: Vec<f64>,
}

/// Splits every cluster flow uniformly among its loops.
pub fn allocate_flows(partition: &Partition, cluster_flows: &[f64], n_loops: usize) -> FlowPlan {
    let mut loop_flows = vec![0.0; n_loops];
    for (members, &q) in partition.clusters.iter().zip(cluster_flows) {
        let share = q / members.len() as f64;
        for &i in members {
            loop_flows[i] = share;
        }
    }
    FlowPlan { cluster_flows: cluster_flows.to_vec(), loop_flows }
}

/// Clips cluster flows into their boxes and, if the total exceeds the
/// budget, removes the excess in proportion to each cluster's headroom above
/// its lower bound.
pub fn repair_flows(flows: &mut [f64], bounds: &[(f64, f64)], q_total: f64) {
    for (q, &(lo, up)) in flows.iter_mut().zip(bounds) {
        *q = q.clamp(lo, up);
    }
    let total: f64 = flows.iter().sum();
    if total <= q_total {
        return;
    }
    let excess = total - q_total;
    let headroom: f64 = flows.iter().zip(bounds).map(|(q, b)| q - b.0).sum();
    if headroom <= 0.0 {
        return;
    }
    let frac = (excess / headroom).min(1.0);
    for (q, &(lo, _)) in flows.iter_mut().zip(bounds) {
        *q -= frac * (*q - lo);
        *q = q.max(lo);
    }
    // guard against rounding in the last bit
    let mut total: f64 = flows.iter().sum();
    while total > q_total {
        let (j, _) = flows
            .iter()
            .zip(bounds)
            .enumerate()
            .map(|(j, (q, b))| (j, q - b.0))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        flows[j] = (flows[j] - (total - q_total).max(f64::EPSILON * q_total)).max(bounds[j].0);
        total = flows.iter().sum();
    }
}

/// Shifts every agent's sequence one stage ahead, repeating the last stage.
pub fn shift_warm_start(prev: &AladinIterate) -> AladinIterate {
    let shift = |v: &DVector<f64>| {
        let n = v.len();
        DVector::from_iterator(n, (0..n).map(|i| v[(i + 1).min(n - 1)]))
    };
    AladinIterate { y: prev.y.iter().map(shift).collect(), lambda: shift(&prev.lambda) }
}

pub fn run_closed_loop(scenario: &Scenario, options: &ClosedLoopOptions) -> Result<SimulationLog, RunError> {
    let cfg = &scenario.config;
    let n = cfg.n_loops;
    let params = cfg.loop_params();
    let limits = cfg.limits();
    let ctrl = ControllerConfig::from_scenario(cfg);
    let scale = ctrl.flow_scale;
    let dc = cfg.delta_control();
    let steps = options.max_steps.map_or(scenario.steps(), |m| m.min(scenario.steps()));

    let dynamic = match &options.mode {
        ControllerMode::Dynamic { n_cl_max, dt_cluster } => {
            if *n_cl_max == 0 {
                return Err(RunError::Invalid("n_cl_max must be at least 1".into()));
            }
            Some((*n_cl_max, cfg.delta_cluster_for(*dt_cluster)?))
        }
        _ => None,
    };

    let t0 = cfg.initial_temperatures();
    let mut flows = vec![limits.q_min; n];
    let mix0 = mixed_outlet(&t0, &flows)?;
    let mut field = FieldState {
        loops: t0.iter().map(|&t| LoopState { t_out: t, q_applied: limits.q_min }).collect(),
        t_in: cfg.t_in_init.unwrap_or(mix0 - GENERATOR_DROP),
        t_out_mix: mix0,
    };

    let exo0 = scenario.sample_exogenous(0)?;
    let mut partition = match &options.mode {
        ControllerMode::Dynamic { n_cl_max, .. } => {
            select_partition(&build_feature_dataset(&field, &exo0, &params), *n_cl_max, options.seed, 0)
        }
        ControllerMode::Fine => Partition::singletons(n, 0),
        ControllerMode::Coarse => Partition::whole(n, 0),
        ControllerMode::Frozen(p) => {
            p.validate(n, n).map_err(|e| RunError::Invalid(e.to_string()))?;
            p.clone()
        }
    };

    let mut log = SimulationLog {
        meta: LogMeta {
            mode: options.mode.label(),
            n_loops: n,
            dt_sim: cfg.dt_sim,
            dt_control: cfg.dt_control,
            w_e: cfg.w_e,
            w_q: cfg.w_q,
            q_total: cfg.q_total,
            q_min: cfg.q_min,
            q_max: cfg.q_max,
            seed: options.seed,
        },
        rows: Vec::with_capacity(steps),
        control: Vec::new(),
        partitions: vec![partition.clone()],
    };
    let mut warm: Option<(Partition, AladinIterate)> = None;
    let sink = SinkAgent { horizon: ctrl.horizon, weight: ctrl.sink_weight / (scale * scale) };

    for k in 0..steps {
        let t = scenario.time(k);
        let exo = scenario.sample_exogenous(k)?;

        if k % dc == 0 {
            if let Some((n_cl_max, dcl)) = dynamic {
                if k > 0 && k % dcl == 0 {
                    let points = build_feature_dataset(&field, &exo, &params);
                    partition = select_partition(&points, n_cl_max, options.seed, k);
                    log.partitions.push(partition.clone());
                }
            }

            let prev_flows = field.flows();
            let t_outs = field.outlet_temps();
            let t_ref: Vec<f64> =
                (1..=ctrl.horizon).map(|s| scenario.reference(t + s as f64 * cfg.dt_control)).collect();
            let mut clusters = Vec::with_capacity(partition.len());
            for members in &partition.clusters {
                let lump = lump_cluster(members, &t_outs, &params, &exo, &prev_flows, field.t_in, limits)?;
                clusters.push(ClusterSubproblem::new(ClusterBoundary::from_lumped(&lump, t_ref.clone()), ctrl));
            }
            let mut agents: Vec<&dyn AgentSubproblem> = vec![&sink];
            agents.extend(clusters.iter().map(|c| c as &dyn AgentSubproblem));

            let start = match &warm {
                Some((p, it)) if p.same_clusters(&partition) => shift_warm_start(it),
                other => {
                    let lambda =
                        other.as_ref().map_or_else(|| DVector::zeros(ctrl.horizon), |(_, it)| it.lambda.clone());
                    let mut used = 0.0;
                    let mut y = vec![DVector::zeros(ctrl.horizon)];
                    for members in &partition.clusters {
                        let q: f64 = members.iter().map(|&i| prev_flows[i]).sum();
                        used += q;
                        y.push(DVector::from_element(ctrl.horizon, q * scale));
                    }
                    y[0] = DVector::from_element(ctrl.horizon, (cfg.q_total - used).max(0.0) * scale);
                    AladinIterate { y, lambda }
                }
            };

            let mut record = ControlRecord {
                step: k,
                t,
                n_clusters: partition.len(),
                n_agents: agents.len(),
                iterations: 0,
                converged: false,
                failed: false,
                error: None,
                nlp_time: 0.0,
                sens_time: 0.0,
                qp_time: 0.0,
                coupling_residual: f64::NAN,
                kkt_residual: f64::NAN,
                certified: false,
                local_certified: false,
                sink_flow: f64::NAN,
                planned_total: f64::NAN,
            };
            match aladin_solve(&agents, cfg.q_total * scale, &options.aladin, Some(&start)) {
                Ok(res) => {
                    record.iterations = res.iterations;
                    record.converged = res.converged;
                    record.nlp_time = res.timings.nlp.iter().sum();
                    record.sens_time = res.timings.sens.iter().sum();
                    record.qp_time = res.timings.qp;
                    record.local_certified = res.all_local_certified;
                    record.sink_flow = res.solutions[0][0] / scale;
                    record.planned_total = res.solutions.iter().map(|s| s[0]).sum::<f64>() / scale;
                    if options.certify {
                        let cert = certify(&agents, &res.solutions, &res.lambda, cfg.q_total * scale);
                        record.coupling_residual = cert.coupling_residual;
                        record.kkt_residual = cert.agent_kkt.iter().map(|r| r.max()).fold(0.0, f64::max);
                        record.certified = cert.passes(options.aladin.epsilon);
                    }
                    let mut first: Vec<f64> = res.solutions[1..].iter().map(|s| s[0] / scale).collect();
                    let bounds: Vec<(f64, f64)> =
                        clusters.iter().map(|c| (c.boundary.q_lower, c.boundary.q_upper)).collect();
                    repair_flows(&mut first, &bounds, cfg.q_total);
                    flows = allocate_flows(&partition, &first, n).loop_flows;
                    warm = Some((partition.clone(), res.final_iterate()));
                }
                Err(e) => {
                    record.failed = true;
                    record.error = Some(e.to_string());
                }
            }
            log.control.push(record);
        }

        let t_ref = scenario.reference(t);
        let stage_cost: f64 =
            field.loops.iter().zip(&flows).map(|(s, &q)| cfg.w_e * (s.t_out - t_ref).powi(2) + cfg.w_q * q * q).sum();
        log.rows.push(LogRow {
            t,
            t_in: field.t_in,
            t_out_mix: field.t_out_mix,
            t_ref,
            t_ambient: exo.t_ambient,
            stage_cost,
            t_out: field.outlet_temps(),
            q: flows.clone(),
            irradiance: exo.irradiance.clone(),
        });

        let next: Vec<f64> = (0..n)
            .map(|i| {
                let state = LoopState { t_out: field.loops[i].t_out, q_applied: flows[i] };
                loop_step(&state, &params[i], field.t_in, exo.for_loop(i), cfg.dt_sim)
            })
            .collect();
        let t_in = inlet_step(field.t_in, field.t_out_mix, cfg.dt_sim);
        field.t_out_mix = mixed_outlet(&next, &flows)?;
        field.t_in = t_in;
        for (s, (&tn, &q)) in field.loops.iter_mut().zip(next.iter().zip(&flows)) {
            s.t_out = tn;
            s.q_applied = q;
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    #[test]
    fn allocation_examples() {
        let p = Partition::new(vec![vec![3, 7], vec![0], vec![1, 2, 4, 5, 6]], 0);
        assert_eq!(p.clusters, vec![vec![0], vec![1, 2, 4, 5, 6], vec![3, 7]]);
        let plan = allocate_flows(&p, &[0.2e-3, 1.0e-3, 1.8e-3], 8);
        assert_eq!(plan.loop_flows[0], 0.2e-3);
        assert_eq!(plan.loop_flows[3], 0.9e-3);
        assert_eq!(plan.loop_flows[7], 0.9e-3);
        assert_eq!(plan.loop_flows[5], 0.2e-3);

        let single = Partition::singletons(3, 0);
        assert_eq!(allocate_flows(&single, &[1e-3, 2e-3, 0.5e-3], 3).loop_flows, vec![1e-3, 2e-3, 0.5e-3]);
    }

    #[test]
    fn repair_enforces_box_and_budget() {
        let bounds = [(0.2e-3, 2e-3), (0.4e-3, 4e-3)];
        let mut f = [2.5e-3, 3.9e-3];
        repair_flows(&mut f, &bounds, 5e-3);
        assert!(f.iter().sum::<f64>() <= 5e-3);
        assert!(f[0] >= 0.2e-3 && f[0] <= 2e-3 && f[1] >= 0.4e-3);

        let mut g = [1e-3, 1e-3];
        repair_flows(&mut g, &bounds, 5e-3);
        assert_eq!(g, [1e-3, 1e-3]);
    }

    #[test]
    fn warm_start_shift() {
        let it = AladinIterate {
            y: vec![DVector::from_vec(vec![1.0, 2.0, 3.0])],
            lambda: DVector::from_vec(vec![4.0, 5.0, 6.0]),
        };
        let s = shift_warm_start(&it);
        assert_eq!(s.y[0].as_slice(), &[2.0, 3.0, 3.0]);
        assert_eq!(s.lambda.as_slice(), &[5.0, 6.0, 6.0]);
    }

    fn short_scenario(n: usize) -> Scenario {
        let mut c = ScenarioConfig::with_loops(n);
        c.duration = 600.0;
        c.irradiance.day_length = Some(43_200.0);
        c.irradiance.day_offset = 21_600.0 - 300.0;
        Scenario::new(c).unwrap()
    }

    #[test]
    fn coarse_gives_equal_flows_within_budget() {
        let s = short_scenario(4);
        let log = run_closed_loop(&s, &ClosedLoopOptions::new(ControllerMode::Coarse, &s)).unwrap();
        assert_eq!(log.rows.len(), 1200);
        for r in &log.rows {
            assert!(r.q.iter().all(|&q| q == r.q[0]));
            assert!(r.q[0] <= s.config.q_total / 4.0 + 1e-15);
        }
        assert!(log.control.iter().all(|c| c.converged && !c.failed));
    }

    #[test]
    fn fine_identical_loops_stay_identical_and_track() {
        let s = short_scenario(3);
        let log = run_closed_loop(&s, &ClosedLoopOptions::new(ControllerMode::Fine, &s)).unwrap();
        for r in &log.rows {
            assert!(r.t_out.iter().all(|&t| (t - r.t_out[0]).abs() < 1e-9), "{:?}", r.t_out);
        }
        let last = log.rows.last().unwrap();
        assert!((last.t_out[0] - 250.0).abs() < 1.0, "{}", last.t_out[0]);
        for c in &log.control {
            assert!(c.converged && c.certified && c.local_certified, "{c:?}");
        }
    }
}
