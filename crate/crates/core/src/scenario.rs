//! Reference trajectories and disturbance schedules for closed-loop runs,
//! including the three stock maneuvers used by the validation suite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Vec3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario `{name}`: {reason}")]
    Invalid { name: String, reason: String },
}

/// One sinusoidal component of a reference signal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinTerm {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Scalar reference: constant offset plus a sum of sinusoids.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AxisSignal {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub terms: Vec<SinTerm>,
}

impl AxisSignal {
    pub fn constant(offset: f64) -> Self {
        Self {
            offset,
            terms: Vec::new(),
        }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self {
            offset: 0.0,
            terms: vec![SinTerm {
                amplitude,
                frequency,
                phase: 0.0,
            }],
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.offset
            + self
                .terms
                .iter()
                .map(|s| s.amplitude * (s.frequency * t + s.phase).sin())
                .sum::<f64>()
    }

    /// Time derivative of `eval` at `t`.
    pub fn derivative(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|s| s.amplitude * s.frequency * (s.frequency * t + s.phase).cos())
            .sum::<f64>()
    }
}

/// Three-axis reference generator.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RefSignal {
    pub x: AxisSignal,
    pub y: AxisSignal,
    pub z: AxisSignal,
}

impl RefSignal {
    pub fn eval(&self, t: f64) -> Vec3 {
        Vec3::new(self.x.eval(t), self.y.eval(t), self.z.eval(t))
    }

    /// Time derivative of `eval` at `t`.
    pub fn derivative(&self, t: f64) -> Vec3 {
        Vec3::new(
            self.x.derivative(t),
            self.y.derivative(t),
            self.z.derivative(t),
        )
    }
}

/// Constant world-frame acceleration applied to the plant over `[start, end)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DisturbancePulse {
    pub start: f64,
    pub end: f64,
    /// Disturbance expressed as acceleration in m/s^2.
    pub accel: [f64; 3],
}

/// A complete run description: references, disturbances, duration, seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub duration: f64,
    pub position: RefSignal,
    pub attitude: RefSignal,
    #[serde(default)]
    pub disturbances: Vec<DisturbancePulse>,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    /// Hover in place while sweeping large roll/pitch/yaw references.
    pub fn attitude_sweep() -> Self {
        Self {
            name: "attitude-sweep".into(),
            duration: 60.0,
            position: RefSignal {
                x: AxisSignal::constant(0.0),
                y: AxisSignal::constant(0.0),
                z: AxisSignal::constant(-3.0),
            },
            attitude: RefSignal {
                x: AxisSignal::sine(0.7, 0.2),
                y: AxisSignal::sine(-0.7, 0.5),
                z: AxisSignal::sine(-0.35, 0.5),
            },
            disturbances: Vec::new(),
            seed: 0,
        }
    }

    /// Translate on a Lissajous track while holding level attitude.
    pub fn level_translation(omega_x: f64, omega_y: f64) -> Self {
        Self {
            name: "level-translation".into(),
            duration: 60.0,
            position: RefSignal {
                x: AxisSignal::sine(3.0, omega_x),
                y: AxisSignal::sine(2.0, omega_y),
                z: AxisSignal::constant(-3.0),
            },
            attitude: RefSignal::default(),
            disturbances: Vec::new(),
            seed: 0,
        }
    }

    /// Track attitude references while step accelerations hit the plant:
    /// one pulse per lateral axis, then both axes together.
    pub fn disturbance_rejection() -> Self {
        Self {
            name: "disturbance-rejection".into(),
            duration: 90.0,
            position: RefSignal {
                x: AxisSignal::constant(0.0),
                y: AxisSignal::constant(0.0),
                z: AxisSignal::constant(-3.0),
            },
            attitude: RefSignal {
                x: AxisSignal::sine(0.53, 0.2),
                y: AxisSignal::sine(-0.35, 0.5),
                z: AxisSignal::constant(0.0),
            },
            disturbances: vec![
                DisturbancePulse {
                    start: 20.0,
                    end: 30.0,
                    accel: [1.0, 0.0, 0.0],
                },
                DisturbancePulse {
                    start: 45.0,
                    end: 55.0,
                    accel: [0.0, -1.0, 0.0],
                },
                DisturbancePulse {
                    start: 70.0,
                    end: 80.0,
                    accel: [1.0, 1.0, 0.0],
                },
            ],
            seed: 0,
        }
    }

    /// Constant hover references, no excitation; used for regulation checks.
    pub fn hover(duration: f64) -> Self {
        Self {
            name: "hover".into(),
            duration,
            position: RefSignal {
                x: AxisSignal::constant(0.0),
                y: AxisSignal::constant(0.0),
                z: AxisSignal::constant(-3.0),
            },
            attitude: RefSignal::default(),
            disturbances: Vec::new(),
            seed: 0,
        }
    }

    /// Total disturbance acceleration active at time `t`.
    pub fn disturbance_accel(&self, t: f64) -> Vec3 {
        let mut a = Vec3::zeros();
        for p in &self.disturbances {
            if t >= p.start && t < p.end {
                a += Vec3::new(p.accel[0], p.accel[1], p.accel[2]);
            }
        }
        a
    }

    /// Times at which the disturbance schedule switches on any axis.
    pub fn disturbance_edges(&self) -> Vec<f64> {
        let mut edges: Vec<f64> = self
            .disturbances
            .iter()
            .flat_map(|p| [p.start, p.end])
            .collect();
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        edges
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |reason: String| ScenarioError::Invalid {
            name: self.name.clone(),
            reason,
        };
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(fail(format!("duration must be positive, got {}", self.duration)));
        }
        for sig in [&self.position, &self.attitude] {
            for axis in [&sig.x, &sig.y, &sig.z] {
                if !axis.offset.is_finite() {
                    return Err(fail("non-finite reference offset".into()));
                }
                for term in &axis.terms {
                    if !(term.amplitude.is_finite()
                        && term.frequency.is_finite()
                        && term.phase.is_finite())
                    {
                        return Err(fail("non-finite sinusoid parameter".into()));
                    }
                }
            }
        }
        for p in &self.disturbances {
            if !(p.start.is_finite() && p.end.is_finite() && p.start < p.end) {
                return Err(fail(format!(
                    "disturbance interval [{}, {}) is not a valid span",
                    p.start, p.end
                )));
            }
            if p.accel.iter().any(|a| !a.is_finite()) {
                return Err(fail("non-finite disturbance acceleration".into()));
            }
        }
        // Per-axis intervals must not overlap, so each edge is a clean step.
        for axis in 0..3 {
            let mut spans: Vec<(f64, f64)> = self
                .disturbances
                .iter()
                .filter(|p| p.accel[axis] != 0.0)
                .map(|p| (p.start, p.end))
                .collect();
            spans.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in spans.windows(2) {
                if w[1].0 < w[0].1 {
                    return Err(fail(format!(
                        "axis {axis} disturbances overlap: [{}, {}) and [{}, {})",
                        w[0].0, w[0].1, w[1].0, w[1].1
                    )));
                }
            }
        }
        Ok(())
    }
}
