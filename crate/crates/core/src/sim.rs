//! Closed-loop simulation: wires measurement filters, the outer and inner
//! laws, both allocation stages, actuator lag, and the rigid-body integrator
//! into one deterministic 500 Hz loop with telemetry.

use std::time::Instant;

use nalgebra::DVector;
use thiserror::Error;

use crate::config::SimSetup;
use crate::force_sets::{feasible_force_set, support_directions, Polytope};
use crate::guidance::{build_constraints, guidance_allocation_step, PositionLaw};
use crate::model::{
    dynamics_derivative, euler_to_rotation, rk4_step_with, rotation_to_euler, total_wrench,
    ActuatorState, Disturbance, MultirotorConfig, RigidBodyState, Vec3, Vec6,
};
use crate::scenario::ScenarioSpec;
use crate::signal::{estimate_body_wrench, FilteredDerivative, SecondOrderFilter};
use crate::stabilization::{
    clamp_to_limits, incremental_torque, inner_allocation_step, AttitudeLaw,
};
use crate::telemetry::{Metrics, TelemetryRow};
use crate::wls::SolveStatus;

#[derive(Debug, Error)]
pub enum SimError {
    /// Solver failure or non-finite state mid-run; carries the run time and
    /// the diagnostic that triggered the abort.
    #[error("run aborted at t = {time:.3} s: {reason}")]
    Aborted { time: f64, reason: String },
    #[error(transparent)]
    ForceSet(#[from] crate::force_sets::ForceSetError),
    #[error(transparent)]
    Scenario(#[from] crate::scenario::ScenarioError),
}

/// Run-level switches that do not belong to the vehicle or scenario.
#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Scales the plant's true mass relative to the controller's model.
    pub plant_mass_scale: f64,
    /// Scales the plant's true inertia relative to the controller's model.
    pub plant_inertia_scale: f64,
    /// Record wall-clock guidance solve times. Off by default so telemetry
    /// stays byte-identical across runs.
    pub record_timing: bool,
    /// Physics substeps per control period; defaults to the configured value.
    pub substeps: Option<u32>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            plant_mass_scale: 1.0,
            plant_inertia_scale: 1.0,
            record_timing: false,
            substeps: None,
        }
    }
}

/// Completed run: telemetry, summary metrics, and any non-fatal diagnostics.
pub struct RunResult {
    pub telemetry: Vec<TelemetryRow>,
    pub metrics: Metrics,
    pub diagnostics: Vec<String>,
    pub n_motors: usize,
}

pub struct Simulation {
    setup: SimSetup,
    nominal: MultirotorConfig,
    plant: MultirotorConfig,
    scenario: ScenarioSpec,
    substeps: u32,
    record_timing: bool,
    /// Test hook: when set, replaces the allocated actuator command.
    pub command_override: Option<ActuatorState>,

    state: RigidBodyState,
    actuators: ActuatorState,

    acc_filters: [SecondOrderFilter; 3],
    rate_derivs: [FilteredDerivative; 3],
    act_filters: Vec<SecondOrderFilter>,

    position_law: PositionLaw,
    attitude_law: AttitudeLaw,
    force_set: Polytope,

    warm_guidance: Option<DVector<f64>>,
    warm_inner: Option<DVector<f64>>,

    step_index: u64,
    preroll_steps: u64,
    telemetry: Vec<TelemetryRow>,
    diagnostics: Vec<String>,
}

impl Simulation {
    pub fn new(
        setup: SimSetup,
        scenario: ScenarioSpec,
        options: SimOptions,
    ) -> Result<Self, SimError> {
        scenario.validate()?;
        let nominal = setup.vehicle.clone();
        let mut plant = nominal.clone();
        plant.mass *= options.plant_mass_scale;
        plant.inertia *= options.plant_inertia_scale;

        let directions = support_directions(setup.force_set_subdivisions);
        let force_set =
            feasible_force_set(&nominal, &Vec3::zeros(), &directions, setup.force_set_grid)?;

        let dt = setup.dt();
        let preroll_steps = (1.0 / dt).round() as u64;

        // Runs begin on the reference trajectory (position, velocity, and
        // attitude from the generators at the pre-roll start) so the loop
        // settles into steady tracking before t = 0 instead of acquiring the
        // trajectory through a velocity step it was never asked to track.
        let t_start = -(preroll_steps as f64) * dt;
        let state = RigidBodyState {
            position: scenario.position.eval(t_start),
            velocity: scenario.position.derivative(t_start),
            rotation: euler_to_rotation(scenario.attitude.eval(t_start)),
            angular_rate: Vec3::zeros(),
        };
        let actuators = ActuatorState::hover(&plant);

        let mut position_law = PositionLaw::new(&setup.outer, dt);
        position_law.seed_tracking(Vec3::zeros(), scenario.position.derivative(t_start));
        let fparams = setup.filter;
        let act_vec = actuators.to_vector();
        let act_filters = (0..act_vec.len())
            .map(|k| {
                let mut f = SecondOrderFilter::new(fparams);
                f.seed_steady(act_vec[k]);
                f
            })
            .collect();

        Ok(Self {
            position_law,
            attitude_law: AttitudeLaw::new(&setup.inner, dt),
            acc_filters: std::array::from_fn(|_| {
                let mut f = SecondOrderFilter::new(fparams);
                f.seed_steady(0.0);
                f
            }),
            rate_derivs: std::array::from_fn(|_| {
                let mut d = FilteredDerivative::new(fparams);
                d.seed_steady(0.0);
                d
            }),
            act_filters,
            substeps: options.substeps.unwrap_or(setup.substeps),
            record_timing: options.record_timing,
            command_override: None,
            state,
            actuators,
            force_set,
            warm_guidance: None,
            warm_inner: None,
            step_index: 0,
            preroll_steps,
            telemetry: Vec::new(),
            diagnostics: Vec::new(),
            nominal,
            plant,
            scenario,
            setup,
        })
    }

    /// Simulation time; negative during the settling pre-roll.
    pub fn time(&self) -> f64 {
        (self.step_index as i64 - self.preroll_steps as i64) as f64 * self.setup.dt()
    }

    pub fn state(&self) -> &RigidBodyState {
        &self.state
    }

    pub fn actuators(&self) -> &ActuatorState {
        &self.actuators
    }

    pub fn telemetry(&self) -> &[TelemetryRow] {
        &self.telemetry
    }

    fn abort(&self, reason: String) -> SimError {
        SimError::Aborted {
            time: self.time(),
            reason,
        }
    }

    /// One 2 ms control period: measure, run both control stages, apply
    /// actuator lag, integrate the plant, and record telemetry.
    pub fn step(&mut self) -> Result<(), SimError> {
        let dt = self.setup.dt();
        let t = self.time();
        // The reference generators run on the true clock, extended backward
        // through the pre-roll so the loop is already in steady tracking when
        // t = 0 arrives. Disturbances belong to the experiment proper and stay
        // off until then.
        let dist_accel = if t >= 0.0 {
            self.scenario.disturbance_accel(t)
        } else {
            Vec3::zeros()
        };
        let disturbance = Disturbance {
            force_world: self.plant.mass * dist_accel,
            torque_body: Vec3::zeros(),
        };

        // (1) Measurements. State feedback for the linear laws is direct; the
        // incremental signals -- linear/angular acceleration and the actuator
        // feedback they are differenced against -- all pass the same filter so
        // their group delays stay synchronized and cancel out of the
        // increments.
        let deriv = dynamics_derivative(&self.state, &self.actuators, &disturbance, &self.plant);
        let xi_m = self.state.position;
        let v_m = self.state.velocity;
        let mu_m = rotation_to_euler(&self.state.rotation);
        let omega_m = self.state.angular_rate;
        let mut acc_m = Vec3::zeros();
        let mut omega_dot_m = Vec3::zeros();
        for k in 0..3 {
            acc_m[k] = self.acc_filters[k].step(deriv.acceleration[k]);
            omega_dot_m[k] = self.rate_derivs[k].step(self.state.angular_rate[k]);
        }
        let raw_act = self.actuators.to_vector();
        let filtered_act =
            DVector::from_fn(raw_act.len(), |k, _| self.act_filters[k].step(raw_act[k]));
        let u_a_m = ActuatorState::from_vector(&filtered_act);

        // (2) Outer linear law.
        let xi_ref = self.scenario.position.eval(t);
        let mu_ref = self.scenario.attitude.eval(t);
        let acc_ref = self.position_law.step(xi_ref - xi_m, v_m);
        let delta_acc = acc_ref - acc_m;

        // (3) Guidance references and constraints around the measured input.
        let f_b_m = estimate_body_wrench(&self.nominal, &u_a_m).force;
        let f_b_ref =
            crate::guidance::reference_body_force(self.nominal.mass, delta_acc, mu_m, f_b_m);
        let constraints = build_constraints(
            &self.force_set,
            f_b_m,
            f_b_ref.z,
            mu_m,
            self.setup.attitude_limit,
        )
        .map_err(|e| self.abort(format!("guidance constraints: {e}")))?;

        // (4) Guidance allocation: split the demand into force and attitude.
        let started = Instant::now();
        let gcmd = guidance_allocation_step(
            &self.setup.weights,
            self.nominal.mass,
            delta_acc,
            mu_ref,
            mu_m,
            f_b_m,
            &constraints,
            self.warm_guidance.take(),
        )
        .map_err(|e| self.abort(format!("guidance allocation: {e}")))?;
        let solve_time_us = if self.record_timing {
            started.elapsed().as_secs_f64() * 1e6
        } else {
            0.0
        };
        if gcmd.solution.status == SolveStatus::MaxIterReached {
            return Err(self.abort("guidance allocation hit its iteration limit".into()));
        }
        let fx = f_b_m.x + gcmd.delta_force.x;
        let fy = f_b_m.y + gcmd.delta_force.y;
        let slice_tol = 1e-6 * (1.0 + constraints.slice.b.amax());
        if !constraints.slice.contains(fx, fy, slice_tol) {
            return Err(self.abort(format!(
                "commanded lateral force ({fx:.4}, {fy:.4}) left the feasible slice by {:.2e}",
                constraints.slice.violation(fx, fy)
            )));
        }
        self.warm_guidance = Some(gcmd.solution.x.clone());

        // (5) Attitude law and incremental torque.
        let omega_dot_ref = self.attitude_law.step(gcmd.attitude_cmd, mu_m, omega_m);
        let delta_tau = incremental_torque(&self.nominal.inertia, omega_dot_ref, omega_dot_m);

        // (6) Actuator-level allocation.
        let delta_nu = Vec6::new(
            gcmd.delta_force.x,
            gcmd.delta_force.y,
            gcmd.delta_force.z,
            delta_tau.x,
            delta_tau.y,
            delta_tau.z,
        );
        let icmd = inner_allocation_step(
            &self.nominal,
            &self.setup.weights,
            delta_nu,
            &u_a_m,
            self.warm_inner.take(),
        )
        .map_err(|e| self.abort(format!("actuator allocation: {e}")))?;
        if icmd.solution.status == SolveStatus::MaxIterReached {
            return Err(self.abort("actuator allocation hit its iteration limit".into()));
        }
        self.warm_inner = Some(icmd.solution.x.clone());
        let command = match &self.command_override {
            Some(cmd) => cmd.clone(),
            None => icmd.command,
        };

        if std::env::var_os("SIM_TRACE").is_some() && (0.04..0.16).contains(&t) {
            eprintln!(
                "t {:6.4} om [{:8.3} {:8.3} {:8.3}] mu [{:7.4} {:7.4} {:7.4}] odr [{:8.2} {:8.2} {:8.2}] attc [{:6.3} {:6.3}] dtau_z {:9.2e} it {}",
                t,
                omega_m.x,
                omega_m.y,
                omega_m.z,
                mu_m.x,
                mu_m.y,
                mu_m.z,
                omega_dot_ref.x,
                omega_dot_ref.y,
                omega_dot_ref.z,
                gcmd.attitude_cmd.x,
                gcmd.attitude_cmd.y,
                delta_nu[5],
                icmd.solution.iterations,
            );
        }

        // (9) Telemetry row, sampled at the period start.
        if t >= -1e-12 {
            let pack = |v: Vec3| [v.x, v.y, v.z];
            let per_motor = |u: &ActuatorState| {
                (0..u.n())
                    .map(|i| [u.tilt[i].x, u.tilt[i].y, u.omega[i]])
                    .collect::<Vec<_>>()
            };
            self.telemetry.push(TelemetryRow {
                time: t,
                pos_ref: pack(xi_ref),
                pos: pack(self.state.position),
                att_ref: pack(mu_ref),
                att_cmd: pack(gcmd.attitude_cmd),
                att: pack(mu_m),
                actuator_cmd: per_motor(&command),
                actuator: per_motor(&self.actuators),
                delta_force: pack(gcmd.delta_force),
                force_ref: pack(f_b_ref),
                solve_time_us,
                qp_iterations: gcmd.solution.iterations as u32,
                qp_active: gcmd.solution.active.len() as u32,
                disturbance: pack(dist_accel),
            });
        }

        // (7) + (8) Plant: exact first-order actuator response sampled at the
        // integrator stage times, rigid body advanced by RK4 substeps.
        let target = clamp_to_limits(&self.plant, &command).to_vector();
        let start_act = self.actuators.to_vector();
        let tau = self.setup.actuator_time_constant;
        let act_at = |s: f64| -> ActuatorState {
            let decay = (-s / tau).exp();
            ActuatorState::from_vector(&(&target + decay * (&start_act - &target)))
        };
        let h = dt / self.substeps as f64;
        for k in 0..self.substeps {
            let offset = k as f64 * h;
            self.state = rk4_step_with(&self.state, &disturbance, &self.plant, h, |s| {
                total_wrench(&self.plant, &act_at(offset + s))
            });
        }
        self.actuators = act_at(dt);

        let finite = self.state.position.iter().all(|v| v.is_finite())
            && self.state.velocity.iter().all(|v| v.is_finite())
            && self.state.angular_rate.iter().all(|v| v.is_finite())
            && self.state.rotation.iter().all(|v| v.is_finite());
        if !finite {
            return Err(self.abort("plant state became non-finite".into()));
        }

        self.step_index += 1;
        Ok(())
    }

    /// Runs the 1 s settling pre-roll plus the scenario duration and returns
    /// telemetry and metrics.
    pub fn run(mut self) -> Result<RunResult, SimError> {
        let rate = self.setup.control_rate_hz;
        let total = self.preroll_steps + (self.scenario.duration * rate).round() as u64;
        while self.step_index < total {
            self.step()?;
        }
        let metrics = Metrics::from_rows(&self.telemetry, &self.nominal);
        Ok(RunResult {
            telemetry: self.telemetry,
            metrics,
            diagnostics: self.diagnostics,
            n_motors: self.nominal.n(),
        })
    }
}

/// Builds and runs one scenario to completion.
pub fn run_scenario(
    setup: &SimSetup,
    scenario: &ScenarioSpec,
    options: &SimOptions,
) -> Result<RunResult, SimError> {
    Simulation::new(setup.clone(), scenario.clone(), options.clone())?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{AxisSignal, DisturbancePulse};
    use crate::telemetry::to_csv;

    fn setup() -> SimSetup {
        let mut s = SimSetup::default_hexacopter();
        // Unit tests run many short closed-loop simulations; a coarse but
        // still-valid force set keeps them fast.
        s.force_set_subdivisions = 1;
        s.force_set_grid = (7, 7);
        s
    }

    #[test]
    fn settled_hover_regulates_to_under_a_millimeter() {
        let result = run_scenario(
            &setup(),
            &ScenarioSpec::hover(10.0),
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(result.metrics.rows, 5000);
        assert!(
            result.metrics.max_position_error < 1e-3,
            "hover drifted {:.2e} m",
            result.metrics.max_position_error
        );
        assert!(result.metrics.max_attitude_cmd_error < 1e-3);
    }

    #[test]
    fn zero_thrust_override_is_ballistic() {
        let mut sim = Simulation::new(
            setup(),
            ScenarioSpec::hover(5.0),
            SimOptions::default(),
        )
        .unwrap();
        let n = sim.nominal.n();
        sim.actuators = ActuatorState::zeros(n);
        sim.command_override = Some(ActuatorState::zeros(n));
        for _ in 0..500 {
            sim.step().unwrap();
        }
        // One second of free fall in NED: z increases by g/2.
        let g = sim.plant.gravity;
        let z = sim.state().position.z;
        assert!(
            (z - (-3.0 + 0.5 * g)).abs() < 1e-9,
            "free-fall altitude off: {z}"
        );
        assert!(sim.state().position.x.abs() < 1e-12);
        assert!((sim.state().velocity.z - g).abs() < 1e-9);
    }

    #[test]
    fn telemetry_rows_tick_at_the_control_rate() {
        let result = run_scenario(
            &setup(),
            &ScenarioSpec::hover(2.0),
            &SimOptions::default(),
        )
        .unwrap();
        assert_eq!(result.telemetry.len(), 1000);
        assert_eq!(result.telemetry[0].time, 0.0);
        for pair in result.telemetry.windows(2) {
            let dt = pair[1].time - pair[0].time;
            assert!((dt - 0.002).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let spec = ScenarioSpec::level_translation(0.5, 0.7);
        let mut short = spec.clone();
        short.duration = 3.0;
        let a = run_scenario(&setup(), &short, &SimOptions::default()).unwrap();
        let b = run_scenario(&setup(), &short, &SimOptions::default()).unwrap();
        assert_eq!(to_csv(&a.telemetry, a.n_motors), to_csv(&b.telemetry, b.n_motors));
    }

    #[test]
    fn halving_the_substep_barely_moves_the_trajectory() {
        let mut spec = ScenarioSpec::level_translation(0.5, 0.7);
        spec.duration = 12.0;
        let coarse = run_scenario(&setup(), &spec, &SimOptions::default()).unwrap();
        let fine = run_scenario(
            &setup(),
            &spec,
            &SimOptions {
                substeps: Some(8),
                ..Default::default()
            },
        )
        .unwrap();
        let last_c = coarse.telemetry.last().unwrap();
        let last_f = fine.telemetry.last().unwrap();
        let diff = (0..3)
            .map(|k| (last_c.pos[k] - last_f.pos[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(diff < 1e-5, "substep halving moved final position {diff:.2e} m");
    }

    #[test]
    fn lateral_disturbance_is_rejected_within_seconds() {
        let mut spec = ScenarioSpec::hover(10.0);
        spec.disturbances = vec![DisturbancePulse {
            start: 2.0,
            end: 8.0,
            accel: [1.0, 0.0, 0.0],
        }];
        let result = run_scenario(&setup(), &spec, &SimOptions::default()).unwrap();
        let err = |row: &TelemetryRow| {
            (0..3)
                .map(|k| (row.pos[k] - row.pos_ref[k]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let peak = result
            .telemetry
            .iter()
            .filter(|r| r.time >= 2.0 && r.time < 3.0)
            .map(|r| err(r))
            .fold(0.0, f64::max);
        let settled = result
            .telemetry
            .iter()
            .filter(|r| r.time >= 7.0 && r.time < 8.0)
            .map(|r| err(r))
            .fold(0.0, f64::max);
        assert!(peak > 0.005, "disturbance had no visible effect ({peak:.2e})");
        assert!(settled < 0.05, "error still {settled:.3} m five seconds in");
        assert!(settled < 0.5 * peak);
    }

    #[test]
    fn non_finite_state_aborts_with_a_diagnostic() {
        let mut sim = Simulation::new(
            setup(),
            ScenarioSpec::hover(5.0),
            SimOptions::default(),
        )
        .unwrap();
        sim.state.velocity.x = f64::NAN;
        let err = loop {
            match sim.step() {
                Ok(()) => continue,
                Err(e) => break e,
            }
        };
        match err {
            SimError::Aborted { reason, .. } => {
                assert!(reason.contains("non-finite") || reason.contains("allocation"))
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn attitude_reference_is_tracked_through_the_cascade() {
        // A gentle roll reference: measured attitude should follow within a
        // few hundredths of a radian after the filters settle.
        let mut spec = ScenarioSpec::hover(8.0);
        spec.attitude = crate::scenario::RefSignal {
            x: AxisSignal::sine(0.2, 0.3),
            y: AxisSignal::default(),
            z: AxisSignal::default(),
        };
        let result = run_scenario(&setup(), &spec, &SimOptions::default()).unwrap();
        let worst = result
            .telemetry
            .iter()
            .filter(|r| r.time > 3.0)
            .map(|r| (r.att[0] - r.att_ref[0]).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.05, "roll tracking error {worst:.3} rad");
        // Position holds while rolling.
        assert!(result.metrics.max_position_error < 0.05);
    }
}
