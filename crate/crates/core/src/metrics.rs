//! Performance and timing indices computed from a simulation log.

use serde::{Deserialize, Serialize};

use crate::dmpc::{LogError, LogMeta, SimulationLog};
use crate::partition::Partition;

/// Start-up window excluded from the tracking-error index, s.
pub const DEFAULT_WARMUP: f64 = 300.0;

/// `Σ_k Σ_i w_e·(T_i - T_ref)² + w_q·q_i²` over every logged instant.
pub fn cumulative_cost(log: &SimulationLog, w_e: f64, w_q: f64) -> f64 {
    log.rows
        .iter()
        .map(|r| {
            r.t_out
                .iter()
                .zip(&r.q)
                .map(|(&t, &q)| {
                    let e = t - r.t_ref;
                    w_e * e * e + w_q * q * q
                })
                .sum::<f64>()
        })
        .sum()
}

/// Largest `|T_i - T_ref|` over loops and instants with `t ≥ warmup`.
pub fn max_tracking_error(log: &SimulationLog, warmup: f64) -> f64 {
    log.rows
        .iter()
        .filter(|r| r.t >= warmup)
        .flat_map(|r| r.t_out.iter().map(move |t| (t - r.t_ref).abs()))
        .fold(0.0, f64::max)
}

/// Mean per-control-step solver times, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    /// Local NLP time summed over agents.
    pub nlp: f64,
    pub qp: f64,
    /// Sensitivity evaluation time summed over agents.
    pub sens: f64,
    /// `nlp + qp + sens`.
    pub sum: f64,
}

/// `None` when the log holds no control step.
pub fn timing_summary(log: &SimulationLog) -> Option<TimingSummary> {
    let n = log.control.len();
    if n == 0 {
        return None;
    }
    let mean = |f: fn(&crate::dmpc::ControlRecord) -> f64| log.control.iter().map(f).sum::<f64>() / n as f64;
    let nlp = mean(|c| c.nlp_time);
    let qp = mean(|c| c.qp_time);
    let sens = mean(|c| c.sens_time);
    Some(TimingSummary { nlp, qp, sens, sum: nlp + qp + sens })
}

/// Mean number of loops per cluster over control steps.
pub fn mean_cluster_size(log: &SimulationLog) -> Option<f64> {
    if log.control.is_empty() {
        return None;
    }
    let n = log.meta.n_loops as f64;
    let total: f64 = log.control.iter().map(|c| n / c.n_clusters as f64).sum();
    Some(total / log.control.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub j_cum: f64,
    pub e_bar: f64,
    pub warmup: f64,
    pub mean_cluster_size: f64,
    pub timing: TimingSummary,
    pub control_steps: usize,
    pub mean_iterations: f64,
    pub max_iterations: usize,
    pub converged_steps: usize,
    pub certified_steps: usize,
    pub failed_steps: usize,
}

impl PerformanceReport {
    /// Weights come from the log metadata. A log without control steps
    /// reports zero timings and cluster size.
    pub fn from_log(log: &SimulationLog, warmup: f64) -> Self {
        let steps = log.control.len();
        let iters: Vec<usize> = log.control.iter().map(|c| c.iterations).collect();
        Self {
            j_cum: cumulative_cost(log, log.meta.w_e, log.meta.w_q),
            e_bar: max_tracking_error(log, warmup),
            warmup,
            mean_cluster_size: mean_cluster_size(log).unwrap_or(0.0),
            timing: timing_summary(log).unwrap_or(TimingSummary { nlp: 0.0, qp: 0.0, sens: 0.0, sum: 0.0 }),
            control_steps: steps,
            mean_iterations: if steps == 0 { 0.0 } else { iters.iter().sum::<usize>() as f64 / steps as f64 },
            max_iterations: iters.iter().copied().max().unwrap_or(0),
            converged_steps: log.control.iter().filter(|c| c.converged).count(),
            certified_steps: log.control.iter().filter(|c| c.certified && c.local_certified).count(),
            failed_steps: log.control.iter().filter(|c| c.failed).count(),
        }
    }

    /// Every control step converged, passed both certificates and applied
    /// its solution.
    pub fn all_ok(&self) -> bool {
        self.converged_steps == self.control_steps
            && self.certified_steps == self.control_steps
            && self.failed_steps == 0
    }
}

/// The `summary.json` artifact of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub meta: LogMeta,
    pub report: PerformanceReport,
    pub partitions: Vec<Partition>,
}

impl RunSummary {
    pub fn new(log: &SimulationLog, warmup: f64) -> Self {
        Self {
            meta: log.meta.clone(),
            report: PerformanceReport::from_log(log, warmup),
            partitions: log.partitions.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, LogError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, LogError> {
        Ok(serde_json::from_str(s)?)
    }
}
