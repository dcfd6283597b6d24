//! Run configuration: vehicle parameters in their customary units, controller
//! gains, allocation weights, and signal-chain constants, loaded from JSON
//! and validated — including closed-loop stability root checks on the linear
//! control laws.
//!
//! The JSON schema mirrors the structs below. Vehicle fields use spec-sheet
//! units (rpm for rotor speeds, degrees for angle limits); everything is
//! converted to SI radians at load so the rest of the library never sees a
//! mixed-unit value.

use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Mat3, MotorGeometry, MultirotorConfig, Vec3};
use crate::signal::{BlockParams, FilterParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config at `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

/// Vehicle block in spec-sheet units. Motors default to a regular polygon of
/// `n_motors` arms with alternating spin directions; an explicit `motors`
/// list overrides the layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub n_motors: usize,
    /// Mass in kg.
    pub m: f64,
    /// Principal inertia diagonal in kg·m².
    pub inertia_diag: [f64; 3],
    /// Arm length in m.
    pub arm_length: f64,
    /// Lift coefficient in N/(rad/s)².
    pub k_t: f64,
    /// Rotor drag torque coefficient in N·m/(rad/s)².
    pub k_d: f64,
    pub omega_min_rpm: f64,
    pub omega_max_rpm: f64,
    pub alpha_limit_deg: f64,
    pub beta_limit_deg: f64,
    #[serde(default = "default_gravity")]
    pub g: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motors: Option<Vec<MotorSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotorSpec {
    pub position: [f64; 3],
    pub spin: f64,
    #[serde(default)]
    pub gamma_deg: f64,
}

fn default_gravity() -> f64 {
    9.81
}

pub const RPM_TO_RAD_S: f64 = std::f64::consts::PI / 30.0;

impl VehicleSpec {
    pub fn build(&self) -> Result<MultirotorConfig, ConfigError> {
        if self.n_motors < 4 {
            return Err(invalid("vehicle.n_motors", "at least 4 motors required"));
        }
        if !(self.m > 0.0) {
            return Err(invalid("vehicle.m", "mass must be positive"));
        }
        for (k, v) in self.inertia_diag.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(invalid(
                    &format!("vehicle.inertia_diag[{k}]"),
                    "inertia must be positive",
                ));
            }
        }
        if !(self.arm_length > 0.0) {
            return Err(invalid("vehicle.arm_length", "arm length must be positive"));
        }
        if !(self.k_t > 0.0) {
            return Err(invalid("vehicle.k_t", "lift coefficient must be positive"));
        }
        if !(self.k_d > 0.0) {
            return Err(invalid("vehicle.k_d", "drag coefficient must be positive"));
        }
        if !(self.omega_min_rpm >= 0.0 && self.omega_max_rpm > self.omega_min_rpm) {
            return Err(invalid(
                "vehicle.omega_max_rpm",
                "need 0 <= omega_min_rpm < omega_max_rpm",
            ));
        }
        for (name, v) in [
            ("vehicle.alpha_limit_deg", self.alpha_limit_deg),
            ("vehicle.beta_limit_deg", self.beta_limit_deg),
        ] {
            if !(v > 0.0 && v < 90.0) {
                return Err(invalid(name, "tilt limit must lie in (0, 90) degrees"));
            }
        }
        if !(self.g > 0.0) {
            return Err(invalid("vehicle.g", "gravity must be positive"));
        }

        let motors: Vec<MotorGeometry> = match &self.motors {
            Some(list) => {
                if list.len() != self.n_motors {
                    return Err(invalid(
                        "vehicle.motors",
                        format!("{} entries but n_motors = {}", list.len(), self.n_motors),
                    ));
                }
                list.iter()
                    .map(|m| MotorGeometry {
                        position: Vec3::new(m.position[0], m.position[1], m.position[2]),
                        spin: m.spin.signum(),
                        gamma: m.gamma_deg.to_radians(),
                    })
                    .collect()
            }
            None => (0..self.n_motors)
                .map(|i| {
                    let angle = 2.0 * std::f64::consts::PI * (i as f64) / (self.n_motors as f64);
                    MotorGeometry {
                        position: Vec3::new(
                            self.arm_length * angle.cos(),
                            self.arm_length * angle.sin(),
                            0.0,
                        ),
                        spin: if i % 2 == 0 { 1.0 } else { -1.0 },
                        gamma: 0.0,
                    }
                })
                .collect(),
        };

        Ok(MultirotorConfig {
            mass: self.m,
            inertia: Mat3::from_diagonal(&Vec3::new(
                self.inertia_diag[0],
                self.inertia_diag[1],
                self.inertia_diag[2],
            )),
            gravity: self.g,
            thrust_coeff: self.k_t,
            drag_coeff: self.k_d,
            omega_min: self.omega_min_rpm * RPM_TO_RAD_S,
            omega_max: self.omega_max_rpm * RPM_TO_RAD_S,
            alpha_limit: self.alpha_limit_deg.to_radians(),
            beta_limit: self.beta_limit_deg.to_radians(),
            gamma_morphing: false,
            motors,
        })
    }
}

/// Outer-loop blocks of the position law `a_ref = Kv(Kp(pos err) - vel)`,
/// shared by all three translation axes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OuterGains {
    pub position: BlockParams,
    pub velocity: BlockParams,
}

/// Inner-loop blocks per attitude axis (roll, pitch, yaw) of
/// `rate_dot_ref = Kr(Ka(att err) - rate)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnerGains {
    pub attitude: [BlockParams; 3],
    pub rate: [BlockParams; 3],
}

/// Weights of the two allocation stages. `gamma_opt`, `w_v`, `w_u` shape the
/// guidance trade-off between acceleration tracking and preferred inputs;
/// `gamma_in`, `w_nu`, `w_a` do the same for the actuator-level stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AllocationWeights {
    pub gamma_opt: f64,
    pub w_v: [f64; 3],
    pub w_u: [f64; 6],
    #[serde(default = "default_gamma_in")]
    pub gamma_in: f64,
    #[serde(default = "default_w_nu")]
    pub w_nu: [f64; 6],
    #[serde(default = "default_w_a")]
    pub w_a: f64,
}

fn default_gamma_in() -> f64 {
    1000.0
}
fn default_w_nu() -> [f64; 6] {
    [1.0, 1.0, 1.0, 100.0, 100.0, 100.0]
}
fn default_w_a() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FilterSpec {
    natural_freq: f64,
    damping: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawConfig {
    vehicle: VehicleSpec,
    gains: RawGains,
    weights: AllocationWeights,
    filter: FilterSpec,
    #[serde(default = "default_time_constant")]
    actuator_time_constant: f64,
    #[serde(default = "default_rate")]
    control_rate_hz: f64,
    #[serde(default = "default_substeps")]
    substeps: u32,
    #[serde(default = "default_attitude_limit")]
    attitude_limit_deg: f64,
    #[serde(default = "default_grid")]
    force_set_grid: [usize; 2],
    #[serde(default = "default_subdivisions")]
    force_set_subdivisions: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawGains {
    outer: OuterGains,
    inner: InnerGains,
}

fn default_time_constant() -> f64 {
    1.0 / 53.94
}
fn default_rate() -> f64 {
    500.0
}
fn default_substeps() -> u32 {
    4
}
fn default_attitude_limit() -> f64 {
    75.0
}
fn default_grid() -> [usize; 2] {
    [9, 9]
}
fn default_subdivisions() -> u32 {
    2
}

/// Fully validated run configuration in SI units.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub vehicle: MultirotorConfig,
    pub outer: OuterGains,
    pub inner: InnerGains,
    pub weights: AllocationWeights,
    pub filter: FilterParams,
    pub actuator_time_constant: f64,
    pub control_rate_hz: f64,
    pub substeps: u32,
    /// Roll/pitch command box in rad; yaw is unconstrained.
    pub attitude_limit: f64,
    pub force_set_grid: (usize, usize),
    pub force_set_subdivisions: u32,
}

impl SimSetup {
    pub fn dt(&self) -> f64 {
        1.0 / self.control_rate_hz
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let vehicle = raw.vehicle.build()?;

        if !(raw.control_rate_hz > 0.0) {
            return Err(invalid("control_rate_hz", "must be positive"));
        }
        if raw.substeps == 0 {
            return Err(invalid("substeps", "must be at least 1"));
        }
        if !(raw.actuator_time_constant > 0.0) {
            return Err(invalid("actuator_time_constant", "must be positive"));
        }
        if !(raw.attitude_limit_deg > 0.0 && raw.attitude_limit_deg < 90.0) {
            return Err(invalid("attitude_limit_deg", "must lie in (0, 90)"));
        }
        if raw.force_set_grid[0] < 3 || raw.force_set_grid[1] < 3 {
            return Err(invalid("force_set_grid", "grid must be at least 3x3"));
        }
        if raw.force_set_subdivisions > 4 {
            return Err(invalid("force_set_subdivisions", "more than 4 is wasteful"));
        }

        let dt = 1.0 / raw.control_rate_hz;
        let filter = FilterParams {
            natural_freq: raw.filter.natural_freq,
            damping: raw.filter.damping,
            dt,
        };
        filter
            .validate()
            .map_err(|e| invalid("filter", e.to_string()))?;
        if filter.natural_freq * dt >= 1.0 {
            return Err(invalid("filter.natural_freq", "too fast for the sample rate"));
        }
        if !(filter.damping <= 1.0) {
            return Err(invalid("filter.damping", "must be at most 1"));
        }

        for (name, w) in [
            ("weights.gamma_opt", raw.weights.gamma_opt),
            ("weights.gamma_in", raw.weights.gamma_in),
            ("weights.w_a", raw.weights.w_a),
        ] {
            if !(w > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        for (name, ws) in [
            ("weights.w_v", &raw.weights.w_v[..]),
            ("weights.w_u", &raw.weights.w_u[..]),
            ("weights.w_nu", &raw.weights.w_nu[..]),
        ] {
            if ws.iter().any(|w| !(*w > 0.0)) {
                return Err(invalid(name, "diagonal entries must be positive"));
            }
        }

        validate_gains(&raw.gains.outer, &raw.gains.inner)?;

        Ok(SimSetup {
            vehicle,
            outer: raw.gains.outer,
            inner: raw.gains.inner,
            weights: raw.weights,
            filter,
            actuator_time_constant: raw.actuator_time_constant,
            control_rate_hz: raw.control_rate_hz,
            substeps: raw.substeps,
            attitude_limit: raw.attitude_limit_deg.to_radians(),
            force_set_grid: (raw.force_set_grid[0], raw.force_set_grid[1]),
            force_set_subdivisions: raw.force_set_subdivisions,
        })
    }

    /// The bundled hexacopter: six 0.15 m arms, 2000 rpm rotors, ±40° servo
    /// range, and the tuned default gains.
    pub fn default_hexacopter() -> Self {
        Self::from_raw(default_raw()).expect("bundled default config must validate")
    }

    /// JSON text of the default configuration (the bundled config file is
    /// exactly this string).
    pub fn default_json() -> String {
        serde_json::to_string_pretty(&default_raw()).expect("serialization cannot fail") + "\n"
    }
}

fn default_raw() -> RawConfig {
    RawConfig {
        vehicle: VehicleSpec {
            n_motors: 6,
            m: 0.6656,
            inertia_diag: [0.0041, 0.0048, 0.0599],
            arm_length: 0.15,
            k_t: 1.14e-4,
            k_d: 1.14e-6,
            omega_min_rpm: 0.0,
            omega_max_rpm: 2000.0,
            alpha_limit_deg: 40.0,
            beta_limit_deg: 40.0,
            g: 9.81,
            motors: None,
        },
        gains: RawGains {
            outer: OuterGains {
                position: BlockParams::Lead { gain: 4.0, zero: 4.0, pole: 0.05 },
                velocity: BlockParams::Static { gain: 14.0 },
            },
            inner: InnerGains {
                attitude: [
                    BlockParams::Static { gain: 16.0 },
                    BlockParams::Static { gain: 16.0 },
                    BlockParams::Static { gain: 16.0 },
                ],
                rate: [
                    BlockParams::Static { gain: 28.0 },
                    BlockParams::Static { gain: 28.0 },
                    BlockParams::Static { gain: 28.0 },
                ],
            },
        },
        weights: AllocationWeights {
            gamma_opt: 1000.0,
            w_v: [100.0, 100.0, 10.0],
            w_u: [1.0, 1.0, 1.0, 10.0, 10.0, 1.0],
            gamma_in: 1000.0,
            w_nu: [1.0, 1.0, 1.0, 100.0, 100.0, 100.0],
            w_a: 1.0,
        },
        filter: FilterSpec { natural_freq: 50.0, damping: 0.55 },
        actuator_time_constant: 1.0 / 53.94,
        control_rate_hz: 500.0,
        substeps: 4,
        attitude_limit_deg: 75.0,
        force_set_grid: [9, 9],
        force_set_subdivisions: 2,
    }
}

/// Closed-loop stability of both cascades on their nominal plants (double
/// integrator for position, ideal-inversion double integrator for attitude),
/// plus the time-scale separation requirement between them.
fn validate_gains(outer: &OuterGains, inner: &InnerGains) -> Result<(), ConfigError> {
    outer
        .position
        .validate("gains.outer.position")
        .map_err(|e| invalid("gains.outer.position", e))?;
    outer
        .velocity
        .validate("gains.outer.velocity")
        .map_err(|e| invalid("gains.outer.velocity", e))?;

    let outer_bw = cascade_bandwidth(&outer.position, &outer.velocity)
        .ok_or_else(|| invalid("gains.outer", "closed loop is unstable"))?;

    let mut inner_bw = f64::INFINITY;
    for axis in 0..3 {
        let name = ["roll", "pitch", "yaw"][axis];
        inner.attitude[axis]
            .validate(name)
            .map_err(|e| invalid(&format!("gains.inner.attitude[{axis}]"), e))?;
        inner.rate[axis]
            .validate(name)
            .map_err(|e| invalid(&format!("gains.inner.rate[{axis}]"), e))?;
        let bw = cascade_bandwidth(&inner.attitude[axis], &inner.rate[axis])
            .ok_or_else(|| {
                invalid(&format!("gains.inner ({name})"), "closed loop is unstable")
            })?;
        inner_bw = inner_bw.min(bw);
    }

    if inner_bw < 4.0 * outer_bw {
        return Err(invalid(
            "gains",
            format!(
                "inner bandwidth {inner_bw:.2} rad/s must be at least 4x the outer {outer_bw:.2} rad/s"
            ),
        ));
    }
    Ok(())
}

/// Slowest closed-loop pole magnitude of `xddot = K2(s)(K1(s) e - xdot)` on a
/// double integrator, or `None` when any pole leaves the left half plane.
fn cascade_bandwidth(k1: &BlockParams, k2: &BlockParams) -> Option<f64> {
    let (n1, d1) = k1.transfer();
    let (n2, d2) = k2.transfer();
    // chi(s) = s^2 d1 d2 + s n2 d1 + n1 n2
    let s2d1d2 = shift(&poly_mul(&d1, &d2), 2);
    let sn2d1 = shift(&poly_mul(&n2, &d1), 1);
    let n1n2 = poly_mul(&n1, &n2);
    let chi = poly_add(&poly_add(&s2d1d2, &sn2d1), &n1n2);
    let roots = poly_roots(&chi)?;
    let mut slowest = f64::INFINITY;
    for r in &roots {
        if r.re >= -1e-9 {
            return None;
        }
        slowest = slowest.min(r.norm());
    }
    Some(slowest)
}

/// Polynomial coefficients are stored low order first.
fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

/// Multiply by `s^k`.
fn shift(a: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    out.extend_from_slice(a);
    out
}

/// Roots via the companion matrix; `None` for degenerate input.
fn poly_roots(coeffs: &[f64]) -> Option<Vec<Complex<f64>>> {
    let mut c = coeffs.to_vec();
    while c.last().map_or(false, |v| v.abs() < 1e-300) {
        c.pop();
    }
    let deg = c.len().checked_sub(1)?;
    if deg == 0 {
        return Some(vec![]);
    }
    let lead = c[deg];
    let companion = DMatrix::from_fn(deg, deg, |r, col| {
        if col == deg - 1 {
            -c[r] / lead
        } else if r == col + 1 {
            1.0
        } else {
            0.0
        }
    });
    Some(companion.complex_eigenvalues().iter().cloned().collect())
}
