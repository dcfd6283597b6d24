//! Discrete-time signal chain shared by the measurement path and the linear
//! control laws.
//!
//! Every measured or estimated signal that enters a control law passes
//! through the same second-order low-pass so that increments formed from
//! different signals stay synchronized in phase. Actuators respond with a
//! first-order lag discretized exactly under a zero-order hold.

use crate::model::{ActuatorState, MultirotorConfig, Wrench};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("filter parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Second-order low-pass parameters: natural frequency [rad/s], damping
/// ratio, and sample time [s].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    pub natural_freq: f64,
    pub damping: f64,
    pub dt: f64,
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), SignalError> {
        for (name, value) in [
            ("natural_freq", self.natural_freq),
            ("damping", self.damping),
            ("dt", self.dt),
        ] {
            if !(value > 0.0) {
                return Err(SignalError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

/// `w^2 / (s^2 + 2 z w s + w^2)` discretized by the trapezoidal rule.
/// The discrete DC gain is exactly one.
#[derive(Debug, Clone)]
pub struct SecondOrderFilter {
    b: [f64; 3],
    a: [f64; 2],
    u: [f64; 2],
    y: [f64; 2],
}

impl SecondOrderFilter {
    pub fn new(params: FilterParams) -> Self {
        let w = params.natural_freq;
        let z = params.damping;
        let k = 2.0 / params.dt;
        let d = k * k + 2.0 * z * w * k + w * w;
        Self {
            b: [w * w / d, 2.0 * w * w / d, w * w / d],
            a: [(2.0 * w * w - 2.0 * k * k) / d, (k * k - 2.0 * z * w * k + w * w) / d],
            u: [0.0; 2],
            y: [0.0; 2],
        }
    }

    /// Seeds the filter history so that a constant input `u0` passes through
    /// unchanged from the first sample.
    pub fn seed_steady(&mut self, u0: f64) {
        self.u = [u0, u0];
        self.y = [u0, u0];
    }

    pub fn step(&mut self, input: f64) -> f64 {
        let y = self.b[0] * input + self.b[1] * self.u[0] + self.b[2] * self.u[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.u = [input, self.u[0]];
        self.y = [y, self.y[0]];
        y
    }
}

/// Backward difference of a filtered signal; the first sample returns zero.
#[derive(Debug, Clone)]
pub struct FilteredDerivative {
    filter: SecondOrderFilter,
    dt: f64,
    prev: Option<f64>,
}

impl FilteredDerivative {
    pub fn new(params: FilterParams) -> Self {
        Self {
            filter: SecondOrderFilter::new(params),
            dt: params.dt,
            prev: None,
        }
    }

    /// Seeds the internal filter at a constant level so the first returned
    /// derivative is zero rather than a startup transient.
    pub fn seed_steady(&mut self, u0: f64) {
        self.filter.seed_steady(u0);
        self.prev = Some(u0);
    }

    pub fn step(&mut self, input: f64) -> f64 {
        let y = self.filter.step(input);
        let d = match self.prev {
            Some(p) => (y - p) / self.dt,
            None => 0.0,
        };
        self.prev = Some(y);
        d
    }
}

/// First-order actuator parameters: time constant [s] and travel limits.
#[derive(Debug, Clone, Copy)]
pub struct ActuatorParams {
    pub time_constant: f64,
    pub min: f64,
    pub max: f64,
}

/// Advances a first-order lag `1 / (tau s + 1)` by `dt` under a zero-order
/// held command, then clips to the travel limits. The discretization is
/// exact: `x+ = x + (1 - exp(-dt/tau)) (cmd - x)`.
pub fn actuator_lag_step(state: f64, command: f64, params: &ActuatorParams, dt: f64) -> f64 {
    debug_assert!(dt > 0.0 && params.time_constant > 0.0);
    let alpha = 1.0 - (-dt / params.time_constant).exp();
    (state + alpha * (command - state)).clamp(params.min, params.max)
}

/// Body wrench implied by filtered actuator measurements and the nominal
/// model. This is the controller's estimate of the currently produced
/// force and torque.
pub fn estimate_body_wrench(config: &MultirotorConfig, filtered: &ActuatorState) -> Wrench {
    crate::model::total_wrench(config, filtered)
}

/// One-state controller block. `Static` is a pure gain; `Lead` realizes
/// `k (s + z) / (s + p)` under the trapezoidal rule, so low-frequency boost
/// (z > p) and lag compensation (z < p) share one form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockParams {
    Lead { gain: f64, zero: f64, pole: f64 },
    Static { gain: f64 },
}

impl BlockParams {
    pub fn dc_gain(&self) -> f64 {
        match *self {
            BlockParams::Static { gain } => gain,
            BlockParams::Lead { gain, zero, pole } => gain * zero / pole,
        }
    }

    /// Numerator and denominator of the continuous transfer function, low
    /// order first. Used by the closed-loop root checks at config load.
    pub fn transfer(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            BlockParams::Static { gain } => (vec![gain], vec![1.0]),
            BlockParams::Lead { gain, zero, pole } => {
                (vec![gain * zero, gain], vec![pole, 1.0])
            }
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), String> {
        match *self {
            BlockParams::Static { gain } => {
                if !gain.is_finite() {
                    return Err(format!("{name}: gain must be finite"));
                }
            }
            BlockParams::Lead { gain, zero, pole } => {
                if !gain.is_finite() {
                    return Err(format!("{name}: gain must be finite"));
                }
                if !(zero > 0.0) || !(pole > 0.0) {
                    return Err(format!(
                        "{name}: zero and pole must be positive (zero={zero}, pole={pole})"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Discrete realization of a `BlockParams` at a fixed sample time.
#[derive(Debug, Clone)]
pub enum FirstOrderBlock {
    Static { gain: f64 },
    Lead { b0: f64, b1: f64, a1: f64, u: f64, y: f64 },
}

impl FirstOrderBlock {
    pub fn new(params: BlockParams, dt: f64) -> Self {
        match params {
            BlockParams::Static { gain } => FirstOrderBlock::Static { gain },
            BlockParams::Lead { gain, zero, pole } => {
                let c = 2.0 / dt;
                let d = c + pole;
                FirstOrderBlock::Lead {
                    b0: gain * (c + zero) / d,
                    b1: gain * (zero - c) / d,
                    a1: (pole - c) / d,
                    u: 0.0,
                    y: 0.0,
                }
            }
        }
    }

    pub fn step(&mut self, input: f64) -> f64 {
        match self {
            FirstOrderBlock::Static { gain } => *gain * input,
            FirstOrderBlock::Lead { b0, b1, a1, u, y } => {
                let out = *b0 * input + *b1 * *u - *a1 * *y;
                *u = input;
                *y = out;
                out
            }
        }
    }

    /// Overwrite the internal state as if the block had been running at input
    /// `u0` and output `y0`. Static blocks carry no state.
    pub fn seed(&mut self, u0: f64, y0: f64) {
        if let FirstOrderBlock::Lead { u, y, .. } = self {
            *u = u0;
            *y = y0;
        }
    }
}
