//! Closed-loop simulation records and their CSV/JSON serialization.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::Partition;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed log: {0}")]
    Format(String),
}

/// State and inputs at one simulation instant.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub t_in: f64,
    pub t_out_mix: f64,
    pub t_ref: f64,
    pub t_ambient: f64,
    /// `Σ_i w_e·e_i² + w_q·q_i²` accumulated by the controller.
    pub stage_cost: f64,
    pub t_out: Vec<f64>,
    /// Applied flows, m³/s.
    pub q: Vec<f64>,
    pub irradiance: Vec<f64>,
}

/// Statistics of one control instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub step: usize,
    pub t: f64,
    pub n_clusters: usize,
    /// Agents including the sink.
    pub n_agents: usize,
    pub iterations: usize,
    pub converged: bool,
    /// The solve failed and previous flows were held.
    pub failed: bool,
    pub error: Option<String>,
    /// Local NLP time summed over agents and iterations, s.
    pub nlp_time: f64,
    pub sens_time: f64,
    pub qp_time: f64,
    pub coupling_residual: f64,
    /// Largest per-agent KKT residual of the independent check.
    pub kkt_residual: f64,
    pub certified: bool,
    pub local_certified: bool,
    /// First-stage sink flow, m³/s.
    pub sink_flow: f64,
    /// Sum of planned first-stage cluster flows plus sink flow, m³/s.
    pub planned_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMeta {
    pub mode: String,
    pub n_loops: usize,
    pub dt_sim: f64,
    pub dt_control: f64,
    pub w_e: f64,
    pub w_q: f64,
    pub q_total: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub meta: LogMeta,
    pub rows: Vec<LogRow>,
    pub control: Vec<ControlRecord>,
    /// One entry per clustering epoch.
    pub partitions: Vec<Partition>,
}

impl SimulationLog {
    /// Flow trajectories as one vector per instant.
    pub fn flows(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.q.as_slice()).collect()
    }

    fn header(n: usize) -> Vec<String> {
        let mut h: Vec<String> =
            ["t", "T_in", "T_mix", "T_ref", "T_amb", "stage_cost"].iter().map(|s| s.to_string()).collect();
        for prefix in ["T_out_", "q_", "I_"] {
            h.extend((1..=n).map(|i| format!("{prefix}{i}")));
        }
        h
    }

    /// One row per simulation step. Floats are written in shortest
    /// round-trip form so a reload is bit-exact.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), LogError> {
        let n = self.meta.n_loops;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(Self::header(n))?;
        for r in &self.rows {
            let mut rec: Vec<String> =
                [r.t, r.t_in, r.t_out_mix, r.t_ref, r.t_ambient, r.stage_cost].iter().map(|v| format!("{v}")).collect();
            for v in r.t_out.iter().chain(&r.q).chain(&r.irradiance) {
                rec.push(format!("{v}"));
            }
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads rows written by [`write_csv`](Self::write_csv); control records
    /// and partitions come from the summary and are left empty.
    pub fn read_csv<R: Read>(r: R, meta: LogMeta) -> Result<Self, LogError> {
        let n = meta.n_loops;
        let mut rdr = csv::Reader::from_reader(r);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != Self::header(n) {
            return Err(LogError::Format(format!("unexpected header for {n} loops")));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let v: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| LogError::Format(e.to_string())))
                .collect::<Result<_, _>>()?;
            rows.push(LogRow {
                t: v[0],
                t_in: v[1],
                t_out_mix: v[2],
                t_ref: v[3],
                t_ambient: v[4],
                stage_cost: v[5],
                t_out: v[6..6 + n].to_vec(),
                q: v[6 + n..6 + 2 * n].to_vec(),
                irradiance: v[6 + 2 * n..6 + 3 * n].to_vec(),
            });
        }
        Ok(Self { meta, rows, control: Vec::new(), partitions: Vec::new() })
    }

    pub fn write_control_csv<W: Write>(&self, w: W) -> Result<(), LogError> {
        let mut wtr = csv::Writer::from_writer(w);
        for c in &self.control {
            wtr.serialize(c)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_control_csv<R: Read>(r: R) -> Result<Vec<ControlRecord>, LogError> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for rec in rdr.deserialize() {
            out.push(rec?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> LogMeta {
        LogMeta {
            mode: "fine".into(),
            n_loops: 2,
            dt_sim: 0.5,
            dt_control: 30.0,
            w_e: 1e-3,
            w_q: 1.0,
            q_total: 9e-3,
            q_min: 0.2e-3,
            q_max: 2e-3,
            seed: 0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let row = LogRow {
            t: 0.5,
            t_in: 170.0 + 1.0 / 3.0,
            t_out_mix: 250.1,
            t_ref: 250.0,
            t_ambient: 25.0,
            stage_cost: 0.1 + 0.2,
            t_out: vec![240.0 / 7.0, 251.3],
            q: vec![1e-3 / 3.0, 0.9e-3],
            irradiance: vec![800.0, 123.456],
        };
        let log = SimulationLog { meta: meta(), rows: vec![row.clone(), row], control: vec![], partitions: vec![] };
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = SimulationLog::read_csv(buf.as_slice(), meta()).unwrap();
        assert_eq!(back.rows, log.rows);

        let rec = ControlRecord {
            step: 60,
            t: 30.0,
            n_clusters: 2,
            n_agents: 3,
            iterations: 4,
            converged: true,
            failed: false,
            error: None,
            nlp_time: 1.0 / 3.0,
            sens_time: 2e-5,
            qp_time: 0.1 + 0.2,
            coupling_residual: 1e-13,
            kkt_residual: 3e-9,
            certified: true,
            local_certified: true,
            sink_flow: 1e-3 / 7.0,
            planned_total: 9e-3,
        };
        let mut failed = rec.clone();
        failed.failed = true;
        failed.error = Some("local solve 2, failed".into());
        let with_control = SimulationLog { control: vec![rec, failed], ..log.clone() };
        let mut buf2 = Vec::new();
        with_control.write_control_csv(&mut buf2).unwrap();
        assert_eq!(SimulationLog::read_control_csv(buf2.as_slice()).unwrap(), with_control.control);

        let mut other = meta();
        other.n_loops = 3;
        assert!(SimulationLog::read_csv(buf.as_slice(), other).is_err());
    }
}
