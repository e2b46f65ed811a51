//! Lumped thermal models of collector loops and loop clusters.
//!
//! Each loop (or cluster of loops) is a single well-mixed volume of heat
//! transfer fluid whose outlet temperature obeys
//!
//! ```text
//!   C(Tm) dT/dt = eta*S*I - q*P(Tm)*(T - Tin) - h(Tm, Ta)
//! ```
//!
//! with temperature-dependent density, specific heat and heat losses
//! evaluated at the mean temperature `Tm = (T + Tin) / 2`. Time stepping is
//! explicit Euler with properties frozen at the start of the step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Offset between the field outlet and the steam-generator outlet, in °C.
pub const GENERATOR_DROP: f64 = 80.0;
/// Time constant of the inlet recirculation lag, in seconds.
pub const INLET_TIME_CONSTANT: f64 = 600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThermalError {
    #[error("degenerate mixing: total flow {0} is not positive")]
    DegenerateMixing(f64),
    #[error("cluster has no member loops")]
    EmptyCluster,
    #[error("loop index {0} out of range for a field of {1} loops")]
    IndexOutOfRange(usize, usize),
}

/// Fluid and loss properties at a given mean temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtfProperties {
    /// Density, kg/m³.
    pub rho: f64,
    /// Specific heat, J/(kg·°C).
    pub c: f64,
    /// Volumetric heat capacity `rho*c`, J/(m³·°C).
    pub vol_heat_capacity: f64,
    /// Thermal capacity of the fluid column `rho*c*A*L`, J/°C.
    pub capacity: f64,
    /// Heat-loss power, W.
    pub heat_loss: f64,
}

/// Physical constants of one collector loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopParams {
    /// Optical/geometric efficiency, 0..=1.
    pub eta: f64,
    /// Tube cross-section, m².
    pub area: f64,
    /// Loop length, m.
    pub length: f64,
    /// Reflective surface, m².
    pub surface: f64,
}

impl Default for LoopParams {
    fn default() -> Self {
        Self { eta: 0.6, area: 5.067e-4, length: 142.0, surface: 267.4 }
    }
}

impl LoopParams {
    pub fn body(&self) -> ThermalBody {
        ThermalBody { volume: self.area * self.length, surface: self.surface }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.eta) && self.eta <= 1.0) {
            return Err(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if !ok(self.area) || !ok(self.length) || !ok(self.surface) {
            return Err(format!(
                "area, length and surface must be positive (got {}, {}, {})",
                self.area, self.length, self.surface
            ));
        }
        Ok(())
    }
}

/// Geometry that enters the property formulas: fluid volume `A*L` and
/// reflective surface `S`. Clusters aggregate these over their members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalBody {
    pub volume: f64,
    pub surface: f64,
}

impl ThermalBody {
    pub fn properties(&self, t_mean: f64, t_ambient: f64) -> HtfProperties {
        let rho = 903.0 - 0.672 * t_mean;
        let c = 1820.0 + 3.478 * t_mean;
        let dt = t_mean - t_ambient;
        HtfProperties {
            rho,
            c,
            vol_heat_capacity: rho * c,
            capacity: rho * c * self.volume,
            heat_loss: self.surface * (0.00249 * dt * dt - 0.06133 * dt),
        }
    }

    /// One explicit Euler step of the outlet temperature.
    pub fn step(&self, t_out: f64, t_in: f64, t_ambient: f64, power: f64, q: f64, dt: f64) -> f64 {
        let p = self.properties(0.5 * (t_out + t_in), t_ambient);
        t_out + dt / p.capacity * (power - p.heat_loss) - dt / p.capacity * q * p.vol_heat_capacity * (t_out - t_in)
    }

    /// Euler step together with its partial derivatives with respect to the
    /// current outlet temperature and the flow.
    pub fn step_with_derivatives(
        &self,
        t_out: f64,
        t_in: f64,
        t_ambient: f64,
        power: f64,
        q: f64,
        dt: f64,
    ) -> StepDerivatives {
        let t_mean = 0.5 * (t_out + t_in);
        let p = self.properties(t_mean, t_ambient);
        let next = t_out + dt / p.capacity * (power - p.heat_loss)
            - dt / p.capacity * q * p.vol_heat_capacity * (t_out - t_in);

        // d/dTm of rho*c and of the loss polynomial
        let dvhc = -0.672 * p.c + 3.478 * p.rho;
        let d = t_mean - t_ambient;
        let dloss = self.surface * (2.0 * 0.00249 * d - 0.06133);
        let net = power - p.heat_loss;
        let vhc = p.vol_heat_capacity;
        let dsource_dtm = (-dloss * vhc - net * dvhc) / (vhc * vhc * self.volume);
        StepDerivatives {
            next,
            d_t_out: 1.0 + dt * 0.5 * dsource_dtm - dt * q / self.volume,
            d_q: -dt * (t_out - t_in) / self.volume,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDerivatives {
    pub next: f64,
    pub d_t_out: f64,
    pub d_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    /// Outlet temperature, °C.
    pub t_out: f64,
    /// Flow applied during the current step, m³/s.
    pub q_applied: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub loops: Vec<LoopState>,
    /// Common inlet temperature, °C.
    pub t_in: f64,
    /// Flow-weighted field outlet, °C.
    pub t_out_mix: f64,
}

impl FieldState {
    pub fn outlet_temps(&self) -> Vec<f64> {
        self.loops.iter().map(|l| l.t_out).collect()
    }

    pub fn flows(&self) -> Vec<f64> {
        self.loops.iter().map(|l| l.q_applied).collect()
    }
}

/// Per-loop irradiance and the ambient temperature at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExogenousInputs {
    /// Direct normal irradiance per loop, W/m².
    pub irradiance: Vec<f64>,
    /// Ambient temperature, °C.
    pub t_ambient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopInputs {
    pub irradiance: f64,
    pub t_ambient: f64,
}

impl ExogenousInputs {
    pub fn for_loop(&self, i: usize) -> LoopInputs {
        LoopInputs { irradiance: self.irradiance[i], t_ambient: self.t_ambient }
    }
}

pub fn htf_properties(t_mean: f64, t_ambient: f64, params: &LoopParams) -> HtfProperties {
    params.body().properties(t_mean, t_ambient)
}

/// Effective solar power `eta*S*I` captured by a loop, W.
pub fn effective_power(params: &LoopParams, irradiance: f64) -> f64 {
    params.eta * params.surface * irradiance
}

/// Next outlet temperature of a loop after one Euler step of length `dt`.
pub fn loop_step(state: &LoopState, params: &LoopParams, t_in: f64, exo: LoopInputs, dt: f64) -> f64 {
    params.body().step(state.t_out, t_in, exo.t_ambient, effective_power(params, exo.irradiance), state.q_applied, dt)
}

/// Euler step of the first-order lag between the field outlet (minus the
/// steam-generator drop) and the field inlet.
pub fn inlet_step(t_in: f64, t_out_mix: f64, dt: f64) -> f64 {
    t_in + dt / INLET_TIME_CONSTANT * ((t_out_mix - GENERATOR_DROP) - t_in)
}

/// Flow-weighted mean of the loop outlet temperatures.
pub fn mixed_outlet(t_outs: &[f64], flows: &[f64]) -> Result<f64, ThermalError> {
    let total: f64 = flows.iter().sum();
    if !(total > 0.0) {
        return Err(ThermalError::DegenerateMixing(total));
    }
    let weighted: f64 = t_outs.iter().zip(flows).map(|(t, q)| t * q).sum();
    Ok(weighted / total)
}

/// Lumped model of a set of loops sharing one prediction model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LumpedCluster {
    pub size: usize,
    /// Summed effective power of the members, W.
    pub effective_power: f64,
    pub body: ThermalBody,
    /// Flow-weighted initial outlet temperature, °C.
    pub t0: f64,
    pub t_in: f64,
    pub t_ambient: f64,
    pub q_lower: f64,
    pub q_upper: f64,
}

impl LumpedCluster {
    /// Properties at the cluster's current mean temperature.
    pub fn properties(&self) -> HtfProperties {
        self.body.properties(0.5 * (self.t0 + self.t_in), self.t_ambient)
    }

    pub fn step(&self, t_out: f64, q: f64, dt: f64) -> f64 {
        self.body.step(t_out, self.t_in, self.t_ambient, self.effective_power, q, dt)
    }
}

/// Per-loop flow limits, m³/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowLimits {
    pub q_min: f64,
    pub q_max: f64,
}

/// Aggregates member loops into one lumped model. Geometry (volume and
/// reflective surface) and captured power are summed; the initial outlet
/// temperature is the mean weighted by the previously applied flows.
#[allow(clippy::too_many_arguments)]
pub fn lump_cluster(
    members: &[usize],
    t_outs: &[f64],
    params: &[LoopParams],
    exo: &ExogenousInputs,
    prev_flows: &[f64],
    t_in: f64,
    limits: FlowLimits,
) -> Result<LumpedCluster, ThermalError> {
    if members.is_empty() {
        return Err(ThermalError::EmptyCluster);
    }
    let n = t_outs.len();
    let mut power = 0.0;
    let mut volume = 0.0;
    let mut surface = 0.0;
    let mut flow = 0.0;
    let mut weighted = 0.0;
    for &i in members {
        if i >= n {
            return Err(ThermalError::IndexOutOfRange(i, n));
        }
        let p = &params[i];
        power += effective_power(p, exo.irradiance[i]);
        volume += p.area * p.length;
        surface += p.surface;
        flow += prev_flows[i];
        weighted += prev_flows[i] * t_outs[i];
    }
    if !(flow > 0.0) {
        return Err(ThermalError::DegenerateMixing(flow));
    }
    let size = members.len();
    Ok(LumpedCluster {
        size,
        effective_power: power,
        body: ThermalBody { volume, surface },
        t0: weighted / flow,
        t_in,
        t_ambient: exo.t_ambient,
        q_lower: size as f64 * limits.q_min,
        q_upper: size as f64 * limits.q_max,
    })
}
