//! Scenario configuration and exogenous inputs.
//!
//! A scenario is a TOML document. Every numeric field except `n_loops` has a
//! default; irradiance is either synthetic (half-sine day with cloud events)
//! or read from a CSV file with header `t_s, I_1..I_n, T_amb` and an
//! optional trailing `T_ref` column.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::thermal::{ExogenousInputs, FlowLimits, LoopParams};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("exogenous CSV {path}: {msg}")]
    Csv { path: PathBuf, msg: String },
    #[error("step {k} is outside the scenario ({steps} steps)")]
    OutOfRange { k: usize, steps: usize },
}

/// Shading of a set of loops over `[start, end]` seconds. Attenuation ramps
/// linearly in over `ramp` seconds after `start` and out over `ramp` before
/// `end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CloudEvent {
    /// Zero-based loop indices.
    pub loops: Vec<usize>,
    pub start: f64,
    pub end: f64,
    pub attenuation: f64,
    #[serde(default)]
    pub ramp: f64,
}

impl CloudEvent {
    /// Attenuation fraction in effect at time `t`.
    pub fn factor(&self, t: f64) -> f64 {
        if t < self.start || t > self.end {
            return 0.0;
        }
        let ramp = self.ramp.min(0.5 * (self.end - self.start));
        if ramp <= 0.0 {
            return self.attenuation;
        }
        let edge = ((t - self.start) / ramp).min((self.end - t) / ramp).min(1.0);
        self.attenuation * edge
    }

    fn validate(&self, n_loops: usize) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.attenuation) {
            return Err(format!("cloud attenuation {} outside [0, 1]", self.attenuation));
        }
        if !(self.start < self.end) {
            return Err(format!("cloud start {} must precede end {}", self.start, self.end));
        }
        if self.ramp < 0.0 {
            return Err("cloud ramp must be non-negative".into());
        }
        if let Some(&i) = self.loops.iter().find(|&&i| i >= n_loops) {
            return Err(format!("cloud references loop {i} but there are {n_loops} loops"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrradianceSpec {
    /// CSV file with measured profiles; overrides the synthetic generator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "default_peak")]
    pub peak: f64,
    /// Length of the daylight half-sine, s. Defaults to the scenario duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day_length: Option<f64>,
    /// Time of day at which the simulation starts, s after sunrise.
    #[serde(default)]
    pub day_offset: f64,
    /// Relative per-loop jitter amplitude (seeded, constant in time).
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub events: Vec<CloudEvent>,
}

impl Default for IrradianceSpec {
    fn default() -> Self {
        Self { file: None, peak: default_peak(), day_length: None, day_offset: 0.0, jitter: 0.0, events: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_loops: usize,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_dt_sim")]
    pub dt_sim: f64,
    #[serde(default = "default_dt_control")]
    pub dt_control: f64,
    #[serde(default = "default_dt_cluster")]
    pub dt_cluster: f64,
    #[serde(default = "default_q_min")]
    pub q_min: f64,
    #[serde(default = "default_q_max")]
    pub q_max: f64,
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Total flow budget, m³/s.
    #[serde(default = "default_q_total")]
    pub q_total: f64,
    /// Total flow budget in l/s; converted into `q_total` on load.
    #[serde(default, skip_serializing)]
    pub q_total_lps: Option<f64>,
    #[serde(default = "default_w_e")]
    pub w_e: f64,
    #[serde(default = "default_w_q")]
    pub w_q: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Constant reference outlet temperature, °C.
    #[serde(default = "default_t_ref")]
    pub t_ref: f64,
    /// Initial outlet temperature of every loop; defaults to `t_ref - 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_init: Option<Vec<f64>>,
    /// Initial field inlet temperature; defaults to the inlet filter's fixed
    /// point for the initial mixed outlet.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_in_init: Option<f64>,
    #[serde(default = "default_t_ambient")]
    pub t_ambient: f64,
    /// Amplitude of the daily ambient swing following the sun, °C.
    #[serde(default)]
    pub ambient_swing: f64,
    /// Per-loop efficiencies; defaults to 0.6 everywhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default = "default_area")]
    pub area: f64,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_surface")]
    pub surface: f64,
    #[serde(default)]
    pub irradiance: IrradianceSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_duration() -> f64 {
    25_200.0
}
fn default_dt_sim() -> f64 {
    0.5
}
fn default_dt_control() -> f64 {
    30.0
}
fn default_dt_cluster() -> f64 {
    150.0
}
fn default_q_min() -> f64 {
    0.2e-3
}
fn default_q_max() -> f64 {
    2e-3
}
fn default_t_min() -> f64 {
    220.0
}
fn default_t_max() -> f64 {
    305.0
}
fn default_q_total() -> f64 {
    9e-3
}
fn default_w_e() -> f64 {
    1e-3
}
fn default_w_q() -> f64 {
    1.0
}
fn default_horizon() -> usize {
    5
}
fn default_epsilon() -> f64 {
    1e-5
}
fn default_t_ref() -> f64 {
    250.0
}
fn default_t_ambient() -> f64 {
    25.0
}
fn default_area() -> f64 {
    5.067e-4
}
fn default_length() -> f64 {
    142.0
}
fn default_surface() -> f64 {
    267.4
}
fn default_peak() -> f64 {
    850.0
}

/// Integer ratio `a / b`, if it is one.
fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    let r = a / b;
    let n = r.round();
    ((r - n).abs() <= 1e-9 * r.abs().max(1.0) && n >= 1.0).then_some(n as usize)
}

impl ScenarioConfig {
    /// Defaults for everything except the loop count.
    pub fn with_loops(n_loops: usize) -> Self {
        let mut t = toml::Table::new();
        t.insert("n_loops".into(), toml::Value::Integer(n_loops as i64));
        t.try_into().expect("defaults deserialize")
    }

    pub fn steps(&self) -> usize {
        integer_ratio(self.duration, self.dt_sim).unwrap_or(0)
    }

    /// δᶜ: simulation steps per control step.
    pub fn delta_control(&self) -> usize {
        integer_ratio(self.dt_control, self.dt_sim).expect("validated")
    }

    /// δᶜˡ: simulation steps per clustering step, for a given Δtᶜˡ.
    pub fn delta_cluster_for(&self, dt_cluster: f64) -> Result<usize, ScenarioError> {
        integer_ratio(dt_cluster, self.dt_sim).ok_or_else(|| {
            ScenarioError::Invalid(format!(
                "dt_cluster {dt_cluster} is not an integer multiple of dt_sim {}",
                self.dt_sim
            ))
        })
    }

    pub fn delta_cluster(&self) -> usize {
        self.delta_cluster_for(self.dt_cluster).expect("validated")
    }

    pub fn limits(&self) -> FlowLimits {
        FlowLimits { q_min: self.q_min, q_max: self.q_max }
    }

    pub fn loop_params(&self) -> Vec<LoopParams> {
        (0..self.n_loops)
            .map(|i| LoopParams {
                eta: self.eta.as_ref().map_or(0.6, |e| e[i]),
                area: self.area,
                length: self.length,
                surface: self.surface,
            })
            .collect()
    }

    pub fn initial_temperatures(&self) -> Vec<f64> {
        match &self.t_init {
            Some(t) if t.len() == 1 => vec![t[0]; self.n_loops],
            Some(t) => t.clone(),
            None => vec![self.t_ref - 10.0; self.n_loops],
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if self.n_loops == 0 {
            return bad("n_loops must be at least 1".into());
        }
        for (name, v) in [
            ("duration", self.duration),
            ("dt_sim", self.dt_sim),
            ("dt_control", self.dt_control),
            ("dt_cluster", self.dt_cluster),
            ("q_total", self.q_total),
            ("w_e", self.w_e),
            ("w_q", self.w_q),
            ("epsilon", self.epsilon),
            ("area", self.area),
            ("length", self.length),
            ("surface", self.surface),
        ] {
            if !pos(v) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if integer_ratio(self.dt_control, self.dt_sim).is_none() {
            return bad(format!(
                "dt_control {} is not an integer multiple of dt_sim {} (non-integer δᶜ)",
                self.dt_control, self.dt_sim
            ));
        }
        self.delta_cluster_for(self.dt_cluster)?;
        if integer_ratio(self.duration, self.dt_sim).is_none() {
            return bad(format!("duration {} is not an integer multiple of dt_sim", self.duration));
        }
        if !(self.q_min >= 0.0 && self.q_min < self.q_max) {
            return bad(format!("need 0 ≤ q_min < q_max, got {} and {}", self.q_min, self.q_max));
        }
        if !(self.t_min < self.t_max) {
            return bad(format!("need t_min < t_max, got {} and {}", self.t_min, self.t_max));
        }
        if self.horizon == 0 {
            return bad("horizon N_p must be at least 1".into());
        }
        if self.q_min * self.n_loops as f64 > self.q_total {
            return bad(format!("q_total {} cannot cover the minimum flow of {} loops", self.q_total, self.n_loops));
        }
        if let Some(eta) = &self.eta {
            if eta.len() != self.n_loops {
                return bad(format!("eta has {} entries for {} loops", eta.len(), self.n_loops));
            }
        }
        for p in self.loop_params() {
            p.validate().map_err(ScenarioError::Invalid)?;
        }
        if let Some(t) = &self.t_init {
            if t.len() != 1 && t.len() != self.n_loops {
                return bad(format!("t_init has {} entries for {} loops", t.len(), self.n_loops));
            }
        }
        let irr = &self.irradiance;
        if !pos(irr.peak) {
            return bad("irradiance peak must be positive".into());
        }
        if irr.day_length.is_some_and(|d| !pos(d)) {
            return bad("day_length must be positive".into());
        }
        if !(irr.jitter >= 0.0 && irr.jitter < 1.0) {
            return bad("jitter must lie in [0, 1)".into());
        }
        for e in &irr.events {
            e.validate(self.n_loops).map_err(ScenarioError::Invalid)?;
        }
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
    if table.contains_key("q_total") && table.contains_key("q_total_lps") {
        return Err(ScenarioError::Invalid("give either q_total or q_total_lps, not both".into()));
    }
    let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    if let Some(lps) = cfg.q_total_lps.take() {
        cfg.q_total = lps * 1e-3;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
    let mut cfg = parse_scenario(&text)?;
    if let Some(file) = &mut cfg.irradiance.file {
        if file.is_relative() {
            if let Some(dir) = path.parent() {
                *file = dir.join(&*file);
            }
        }
    }
    Ok(cfg)
}

pub fn save_scenario(cfg: &ScenarioConfig, path: &Path) -> Result<(), ScenarioError> {
    let text = toml::to_string(cfg).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    std::fs::write(path, text).map_err(|source| ScenarioError::Io { path: path.into(), source })
}

/// Synthetic irradiance, one row per sample time and one column per loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceTable {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Half-sine clear sky `peak·sin(π(t + offset)/day_length)` clipped at zero,
/// per-loop seeded jitter, and cloud attenuation.
pub fn irradiance_at(spec: &IrradianceSpec, duration: f64, gains: &[f64], t: f64) -> Vec<f64> {
    let day = spec.day_length.unwrap_or(duration);
    let clear = (spec.peak * (std::f64::consts::PI * (t + spec.day_offset) / day).sin()).max(0.0);
    gains
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let shade =
                spec.events.iter().filter(|e| e.loops.contains(&i)).map(|e| e.factor(t)).fold(0.0_f64, f64::max);
            clear * g * (1.0 - shade)
        })
        .collect()
}

/// Per-loop multiplicative gains `1 + jitter·u`, `u ~ U(-1, 1)`.
pub fn loop_gains(n_loops: usize, jitter: f64, seed: u64) -> Vec<f64> {
    if jitter == 0.0 {
        return vec![1.0; n_loops];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_loops).map(|_| 1.0 + jitter * rng.gen_range(-1.0..1.0)).collect()
}

pub fn synth_profile(
    n_loops: usize,
    duration: f64,
    dt: f64,
    peak: f64,
    events: &[CloudEvent],
    seed: u64,
) -> IrradianceTable {
    let spec = IrradianceSpec { peak, events: events.to_vec(), ..Default::default() };
    let gains = loop_gains(n_loops, spec.jitter, seed);
    let n = (duration / dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
    let values = times.iter().map(|&t| irradiance_at(&spec, duration, &gains, t)).collect();
    IrradianceTable { times, values }
}

/// Tabulated exogenous data read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousTable {
    pub times: Vec<f64>,
    pub irradiance: Vec<Vec<f64>>,
    pub t_ambient: Vec<f64>,
    pub t_ref: Option<Vec<f64>>,
}

impl ExogenousTable {
    /// Row in effect at `t` (zero-order hold).
    fn row(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }
}

pub fn read_exogenous_csv(path: &Path, n_loops: usize) -> Result<ExogenousTable, ScenarioError> {
    let err = |msg: String| ScenarioError::Csv { path: path.into(), msg };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    let has_ref = match headers.len() {
        n if n == n_loops + 2 => false,
        n if n == n_loops + 3 => true,
        n => return Err(err(format!("expected {} or {} columns, found {n}", n_loops + 2, n_loops + 3))),
    };
    let mut table =
        ExogenousTable { times: vec![], irradiance: vec![], t_ambient: vec![], t_ref: has_ref.then(Vec::new) };
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(format!("row {}: {e}", line + 2)))?;
        if let Some(&t_prev) = table.times.last() {
            if vals[0] <= t_prev {
                return Err(err(format!("row {}: time stamps must increase", line + 2)));
            }
        }
        let irr = vals[1..=n_loops].to_vec();
        if irr.iter().any(|&v| v < 0.0) {
            return Err(err(format!("row {}: negative irradiance", line + 2)));
        }
        table.times.push(vals[0]);
        table.irradiance.push(irr);
        table.t_ambient.push(vals[n_loops + 1]);
        if let Some(r) = &mut table.t_ref {
            r.push(vals[n_loops + 2]);
        }
    }
    if table.times.is_empty() {
        return Err(err("no data rows".into()));
    }
    Ok(table)
}

/// A validated scenario with its exogenous source resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    gains: Vec<f64>,
    table: Option<ExogenousTable>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ScenarioError> {
        config.validate()?;
        let table = match &config.irradiance.file {
            Some(p) => Some(read_exogenous_csv(p, config.n_loops)?),
            None => None,
        };
        let gains = loop_gains(config.n_loops, config.irradiance.jitter, config.seed);
        Ok(Self { config, gains, table })
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::new(load_scenario(path)?)
    }

    pub fn steps(&self) -> usize {
        self.config.steps()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.config.dt_sim
    }

    /// Exogenous inputs at step `k`; `k` may equal the step count (end time).
    pub fn sample_exogenous(&self, k: usize) -> Result<ExogenousInputs, ScenarioError> {
        let steps = self.steps();
        if k > steps {
            return Err(ScenarioError::OutOfRange { k, steps });
        }
        let t = self.time(k);
        Ok(match &self.table {
            Some(tab) => {
                let r = tab.row(t);
                ExogenousInputs { irradiance: tab.irradiance[r].clone(), t_ambient: tab.t_ambient[r] }
            }
            None => {
                let c = &self.config;
                let irr = irradiance_at(&c.irradiance, c.duration, &self.gains, t);
                let day = c.irradiance.day_length.unwrap_or(c.duration);
                let sun = (std::f64::consts::PI * (t + c.irradiance.day_offset) / day).sin().max(0.0);
                ExogenousInputs { irradiance: irr, t_ambient: c.t_ambient + c.ambient_swing * sun }
            }
        })
    }

    /// Reference outlet temperature at time `t`.
    pub fn reference(&self, t: f64) -> f64 {
        match self.table.as_ref().and_then(|tab| tab.t_ref.as_ref().map(|r| r[tab.row(t)])) {
            Some(r) => r,
            None => self.config.t_ref,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_scenario("n_loops = 10").unwrap();
        assert_eq!(c.q_min, 0.2e-3);
        assert_eq!(c.q_max, 2e-3);
        assert_eq!(c.t_min, 220.0);
        assert_eq!(c.t_max, 305.0);
        assert_eq!(c.q_total, 9e-3);
        assert_eq!(c.horizon, 5);
        assert_eq!(c.epsilon, 1e-5);
        assert_eq!(c.w_e, 1e-3);
        assert_eq!(c.w_q, 1.0);
        assert_eq!(c.dt_sim, 0.5);
        assert_eq!(c.dt_control, 30.0);
        assert_eq!(c.delta_control(), 60);
        assert_eq!(c, ScenarioConfig::with_loops(10));
    }

    #[test]
    fn invalid_documents() {
        let e = parse_scenario("n_loops = 10\ndt_control = 31.2").unwrap_err();
        assert!(e.to_string().contains("non-integer"), "{e}");
        assert!(matches!(parse_scenario("n_loops = 10\nn_loops = 11"), Err(ScenarioError::Parse(_))));
        assert!(matches!(parse_scenario("n_loops = 10\nbogus = 1"), Err(ScenarioError::Parse(_))));
        assert!(parse_scenario("n_loops = 10\nq_min = 3e-3").is_err());
        assert!(parse_scenario("n_loops = 10\nt_min = 400").is_err());
        assert!(parse_scenario("n_loops = 10\nhorizon = 0").is_err());
        assert!(parse_scenario("n_loops = 2\neta = [0.5]").is_err());
        assert!(parse_scenario("n_loops = 10\nq_total = 9e-3\nq_total_lps = 9").is_err());
    }

    #[test]
    fn litres_per_second_are_converted() {
        let c = parse_scenario("n_loops = 10\nq_total_lps = 8").unwrap();
        assert!((c.q_total - 8e-3).abs() < 1e-18);
        assert_eq!(c.q_total_lps, None);
    }

    #[test]
    fn defaults_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        let mut c = ScenarioConfig::with_loops(4);
        c.eta = Some(vec![0.5, 0.6, 0.65, 0.7]);
        c.irradiance.events.push(CloudEvent { loops: vec![1, 2], start: 10.0, end: 50.0, attenuation: 0.7, ramp: 5.0 });
        save_scenario(&c, &p).unwrap();
        assert_eq!(load_scenario(&p).unwrap(), c);
    }

    #[test]
    fn clear_sky_apex_and_cloud() {
        let mut c = ScenarioConfig::with_loops(3);
        c.duration = 1000.0;
        let s = Scenario::new(c.clone()).unwrap();
        let noon = s.sample_exogenous(1000).unwrap();
        assert!(noon.irradiance.iter().all(|&i| (i - 850.0).abs() < 1e-9));

        c.irradiance.events.push(CloudEvent { loops: vec![1], start: 400.0, end: 600.0, attenuation: 0.7, ramp: 0.0 });
        let s = Scenario::new(c).unwrap();
        let x = s.sample_exogenous(1000).unwrap();
        assert!((x.irradiance[1] - 0.3 * x.irradiance[0]).abs() < 1e-9);
        assert!(s.sample_exogenous(2001).is_err());
    }

    #[test]
    fn ramps_are_linear() {
        let e = CloudEvent { loops: vec![0], start: 0.0, end: 100.0, attenuation: 0.8, ramp: 20.0 };
        assert_eq!(e.factor(-1.0), 0.0);
        assert!((e.factor(10.0) - 0.4).abs() < 1e-12);
        assert_eq!(e.factor(50.0), 0.8);
        assert!((e.factor(95.0) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn synthetic_profile_properties() {
        let a = synth_profile(4, 100.0, 1.0, 800.0, &[], 3);
        assert!(a.values.iter().all(|row| row.iter().all(|&v| v == row[0])));
        assert!((a.values[50][0] - 800.0).abs() < 1e-9);
        let ev = [CloudEvent { loops: vec![2], start: 20.0, end: 60.0, attenuation: 0.5, ramp: 5.0 }];
        assert_eq!(synth_profile(4, 100.0, 1.0, 800.0, &ev, 9), synth_profile(4, 100.0, 1.0, 800.0, &ev, 9));
        assert!(loop_gains(5, 0.1, 1) == loop_gains(5, 0.1, 1));
        assert!(loop_gains(5, 0.1, 1) != loop_gains(5, 0.1, 2));
    }

    #[test]
    fn csv_profiles_hold_values() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("exo.csv");
        std::fs::write(&csv, "t_s, I_1, I_2, T_amb, T_ref\n0, 500, 600, 20, 240\n10, 700, 710, 21, 250\n").unwrap();
        let toml = dir.path().join("s.toml");
        std::fs::write(&toml, "n_loops = 2\nduration = 20\n[irradiance]\nfile = \"exo.csv\"\n").unwrap();
        let s = Scenario::load(&toml).unwrap();
        let x0 = s.sample_exogenous(0).unwrap();
        assert_eq!(x0.irradiance, vec![500.0, 600.0]);
        assert_eq!(x0.t_ambient, 20.0);
        assert_eq!(s.sample_exogenous(19).unwrap(), x0);
        assert_eq!(s.sample_exogenous(20).unwrap().irradiance, vec![700.0, 710.0]);
        assert_eq!(s.reference(9.5), 240.0);
        assert_eq!(s.reference(15.0), 250.0);

        std::fs::write(&csv, "t_s, I_1, T_amb\n0, 500, 20\n").unwrap();
        assert!(Scenario::load(&toml).is_err());
    }
}
