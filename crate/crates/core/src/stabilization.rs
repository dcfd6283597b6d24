//! Inner-loop stabilization: a cascaded attitude law produces an angular
//! acceleration reference, an incremental law turns the tracking error into a
//! torque increment, and an actuator-level allocation maps commanded wrench
//! increments to tilt and speed commands within hardware limits.

use nalgebra::{DMatrix, DVector};

use crate::config::{AllocationWeights, InnerGains};
use crate::model::{
    skew, thrust_direction, thrust_direction_jacobian, wrap_angle, ActuatorState, Mat3,
    MultirotorConfig, Vec3, Vec6,
};
use crate::signal::FirstOrderBlock;
use crate::wls::{WlsError, WlsProblem, WlsSolution};

/// Cascaded attitude/rate law, one block pair per body axis:
/// `rate_dot_ref = Kr(Ka(wrapped att err) - omega_m)`.
pub struct AttitudeLaw {
    attitude: [FirstOrderBlock; 3],
    rate: [FirstOrderBlock; 3],
}

impl AttitudeLaw {
    pub fn new(gains: &InnerGains, dt: f64) -> Self {
        let block = |p: &crate::signal::BlockParams| FirstOrderBlock::new(p.clone(), dt);
        Self {
            attitude: [
                block(&gains.attitude[0]),
                block(&gains.attitude[1]),
                block(&gains.attitude[2]),
            ],
            rate: [
                block(&gains.rate[0]),
                block(&gains.rate[1]),
                block(&gains.rate[2]),
            ],
        }
    }

    /// One control tick: angular acceleration reference from the attitude
    /// command, measured attitude, and measured body rate.
    pub fn step(&mut self, mu_c: Vec3, mu_m: Vec3, omega_m: Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for axis in 0..3 {
            let err = wrap_angle(mu_c[axis] - mu_m[axis]);
            let rate_ref = self.attitude[axis].step(err);
            out[axis] = self.rate[axis].step(rate_ref - omega_m[axis]);
        }
        out
    }
}

/// Incremental torque command: inertia times the angular-acceleration error.
/// Gyroscopic terms appear in both the reference and the measurement, so they
/// cancel out of the increment.
pub fn incremental_torque(inertia: &Mat3, omega_dot_ref: Vec3, omega_dot_m: Vec3) -> Vec3 {
    inertia * (omega_dot_ref - omega_dot_m)
}

/// Jacobian of the total body wrench with respect to the flattened actuator
/// vector `[a1, b1, g1, w1, a2, ...]`, 6 x 4n. The gamma columns vanish
/// because the mount keeps the thrust axis on that rotation axis; all columns
/// of a stopped motor vanish because thrust scales with speed squared.
pub fn actuator_jacobian(config: &MultirotorConfig, actuators: &ActuatorState) -> DMatrix<f64> {
    assert_eq!(actuators.n(), config.n(), "actuator count must match config");
    let n = config.n();
    let r = config.drag_ratio();
    let mut jac = DMatrix::zeros(6, 4 * n);
    for i in 0..n {
        let torque_map = skew(config.motors[i].position)
            + Mat3::identity() * (r * config.motors[i].spin);
        let w = actuators.omega[i];
        let thrust = config.thrust_coeff * w * w;
        let dir = thrust_direction(actuators.tilt[i]);
        let dir_jac = thrust_direction_jacobian(actuators.tilt[i]);
        for axis in 0..3 {
            let df = thrust * dir_jac.column(axis).into_owned();
            let dt = torque_map * df;
            for row in 0..3 {
                jac[(row, 4 * i + axis)] = df[row];
                jac[(3 + row, 4 * i + axis)] = dt[row];
            }
        }
        let df_dw = 2.0 * config.thrust_coeff * w * dir;
        let dt_dw = torque_map * df_dw;
        for row in 0..3 {
            jac[(row, 4 * i + 3)] = df_dw[row];
            jac[(3 + row, 4 * i + 3)] = dt_dw[row];
        }
    }
    jac
}

/// Clamps tilt angles and speeds into the configured hardware box. Gamma is
/// left untouched: it is a mounting angle unless the vehicle morphs.
pub fn clamp_to_limits(config: &MultirotorConfig, u: &ActuatorState) -> ActuatorState {
    let mut c = u.clone();
    for i in 0..config.n() {
        c.tilt[i].x = c.tilt[i].x.clamp(-config.alpha_limit, config.alpha_limit);
        c.tilt[i].y = c.tilt[i].y.clamp(-config.beta_limit, config.beta_limit);
        c.omega[i] = c.omega[i].clamp(config.omega_min, config.omega_max);
    }
    c
}

/// Output of one actuator allocation step.
pub struct InnerCommand {
    /// Absolute actuator command, always within hardware limits.
    pub command: ActuatorState,
    pub solution: WlsSolution,
}

/// Indices into the flattened actuator vector that the allocation may move:
/// tilt angles and speed per motor, plus gamma only on morphing vehicles.
fn decision_columns(config: &MultirotorConfig) -> Vec<usize> {
    let mut cols = Vec::new();
    for i in 0..config.n() {
        cols.push(4 * i);
        cols.push(4 * i + 1);
        if config.gamma_morphing {
            cols.push(4 * i + 2);
        }
        cols.push(4 * i + 3);
    }
    cols
}

/// Full travel of one decision column: servo range for tilt angles, speed
/// range for rotor speed. Increment penalties are measured against this so a
/// "unit" move means the same fraction of authority on every actuator; raw SI
/// units would price a full-scale tilt swing (~1 rad) like a 0.5% speed change
/// (1 rad/s), push roll/pitch torque onto the rotor-drag tilt patterns, and
/// destabilize the loop under moderate transients.
fn column_range(config: &MultirotorConfig, col: usize) -> f64 {
    match col % 4 {
        0 => 2.0 * config.alpha_limit,
        1 => 2.0 * config.beta_limit,
        2 => 2.0 * std::f64::consts::PI,
        _ => config.omega_max - config.omega_min,
    }
}

/// One actuator allocation step: finds the actuator increment whose linearized
/// wrench change best matches `delta_wrench` while staying close to the
/// current state and inside hardware limits.
///
/// The measured state is clamped into the limit box first (filtering can
/// overshoot the box slightly), which guarantees the zero increment is always
/// feasible and therefore the solve cannot fail on constraints.
pub fn inner_allocation_step(
    config: &MultirotorConfig,
    weights: &AllocationWeights,
    delta_wrench: Vec6,
    u_a_m: &ActuatorState,
    warm_start: Option<DVector<f64>>,
) -> Result<InnerCommand, WlsError> {
    let base = clamp_to_limits(config, u_a_m);
    let jac = actuator_jacobian(config, &base);
    let cols = decision_columns(config);
    let k = cols.len();
    let sqrt_gamma = weights.gamma_in.sqrt();

    let mut a = DMatrix::zeros(6 + k, k);
    let mut b = DVector::zeros(6 + k);
    for row in 0..6 {
        let w = sqrt_gamma * weights.w_nu[row];
        for (j, &col) in cols.iter().enumerate() {
            a[(row, j)] = w * jac[(row, col)];
        }
        b[row] = w * delta_wrench[row];
    }
    for (j, &col) in cols.iter().enumerate() {
        a[(6 + j, j)] = weights.w_a / column_range(config, col);
    }

    let base_vec = base.to_vector();
    let mut lower = DVector::zeros(k);
    let mut upper = DVector::zeros(k);
    for (j, &col) in cols.iter().enumerate() {
        let (lo, hi) = match col % 4 {
            0 => (-config.alpha_limit, config.alpha_limit),
            1 => (-config.beta_limit, config.beta_limit),
            2 => (f64::NEG_INFINITY, f64::INFINITY),
            _ => (config.omega_min, config.omega_max),
        };
        lower[j] = lo - base_vec[col];
        upper[j] = hi - base_vec[col];
    }

    let mut problem = WlsProblem::new(a, b);
    problem.lower = lower;
    problem.upper = upper;
    problem.x0 = warm_start;
    let solution = problem.solve()?;

    let mut command_vec = base_vec;
    for (j, &col) in cols.iter().enumerate() {
        command_vec[col] += solution.x[j];
    }
    Ok(InnerCommand {
        command: ActuatorState::from_vector(&command_vec),
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::fd_jacobian;
    use crate::config::SimSetup;
    use crate::model::total_wrench;
    use crate::signal::BlockParams;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hexa() -> MultirotorConfig {
        SimSetup::default_hexacopter().vehicle
    }

    fn inner_weights() -> AllocationWeights {
        SimSetup::default_hexacopter().weights
    }

    fn random_actuators(config: &MultirotorConfig, rng: &mut ChaCha8Rng) -> ActuatorState {
        let mut u = ActuatorState::hover(config);
        for i in 0..config.n() {
            u.tilt[i].x = rng.gen_range(-0.6..0.6);
            u.tilt[i].y = rng.gen_range(-0.6..0.6);
            u.omega[i] = rng.gen_range(20.0..200.0);
        }
        u
    }

    fn wrench_of(config: &MultirotorConfig, v: &DVector<f64>) -> DVector<f64> {
        let w = total_wrench(config, &ActuatorState::from_vector(v));
        DVector::from_column_slice(&[
            w.force.x, w.force.y, w.force.z, w.torque.x, w.torque.y, w.torque.z,
        ])
    }

    #[test]
    fn attitude_law_composes_static_gains_with_wrap() {
        let gains = InnerGains {
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
        };
        let mut law = AttitudeLaw::new(&gains, 0.002);
        let mu_c = Vec3::new(0.1, 0.0, std::f64::consts::PI - 0.05);
        let mu_m = Vec3::new(0.0, 0.05, -std::f64::consts::PI + 0.05);
        let omega_m = Vec3::new(0.2, 0.0, -0.1);
        let out = law.step(mu_c, mu_m, omega_m);
        // Yaw error wraps to -0.1 instead of +2pi - 0.1.
        assert_relative_eq!(out.x, 28.0 * (16.0 * 0.1 - 0.2), epsilon = 1e-12);
        assert_relative_eq!(out.y, 28.0 * (16.0 * -0.05), epsilon = 1e-12);
        assert_relative_eq!(out.z, 28.0 * (16.0 * -0.1 + 0.1), epsilon = 1e-12);
    }

    #[test]
    fn incremental_torque_scales_by_inertia() {
        let config = hexa();
        let tau = incremental_torque(&config.inertia, Vec3::new(1.0, 0.0, 0.0), Vec3::zeros());
        assert_relative_eq!(tau, Vec3::new(0.0041, 0.0, 0.0), epsilon = 1e-15);
        let tau = incremental_torque(&config.inertia, Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 1.0));
        assert_relative_eq!(tau, Vec3::new(0.0, 0.0, 0.0599), epsilon = 1e-15);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let config = hexa();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let u = random_actuators(&config, &mut rng);
            let jac = actuator_jacobian(&config, &u);
            let map = |v: &DVector<f64>| wrench_of(&config, v);
            let fd = fd_jacobian(&map, &u.to_vector(), 1e-5);
            let scale = jac.amax().max(1.0);
            assert!(
                (&jac - &fd).amax() <= 1e-5 * scale,
                "FD mismatch {:.3e}",
                (&jac - &fd).amax() / scale
            );
        }
    }

    #[test]
    fn stopped_motor_has_zero_columns() {
        let config = hexa();
        let mut u = ActuatorState::hover(&config);
        u.omega[2] = 0.0;
        let jac = actuator_jacobian(&config, &u);
        for col in 8..12 {
            assert_eq!(jac.column(col).amax(), 0.0, "column {col}");
        }
        // Other motors still act.
        assert!(jac.column(3).amax() > 1e-3);
    }

    #[test]
    fn gamma_columns_vanish_by_mount_geometry() {
        let config = hexa();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..10 {
            let u = random_actuators(&config, &mut rng);
            let jac = actuator_jacobian(&config, &u);
            for i in 0..config.n() {
                assert!(jac.column(4 * i + 2).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_demand_returns_the_clamped_state() {
        let config = hexa();
        let hover = ActuatorState::hover(&config);
        let out = inner_allocation_step(&config, &inner_weights(), Vec6::zeros(), &hover, None)
            .unwrap();
        assert_eq!(out.command.to_vector(), hover.to_vector());

        // A measured tilt beyond the servo range is pulled back to the edge.
        let mut over = hover.clone();
        over.tilt[0].x = 0.9;
        let out = inner_allocation_step(&config, &inner_weights(), Vec6::zeros(), &over, None)
            .unwrap();
        assert_relative_eq!(out.command.tilt[0].x, config.alpha_limit, epsilon = 1e-12);
    }

    #[test]
    fn small_increment_is_realized_to_first_order() {
        let config = hexa();
        let weights = inner_weights();
        let hover = ActuatorState::hover(&config);
        let delta = Vec6::new(0.05, -0.04, -0.1, 0.002, -0.001, 0.003);
        let out = inner_allocation_step(&config, &weights, delta, &hover, None).unwrap();

        let before = wrench_of(&config, &hover.to_vector());
        let after = wrench_of(&config, &out.command.to_vector());
        let achieved = &after - &before;
        // Torque rows carry weight 100 and must match tightly; force rows are
        // softer. Check the realized increment against the demand.
        for row in 3..6 {
            assert!(
                (achieved[row] - delta[row]).abs() <= 5e-4,
                "torque row {row}: {} vs {}",
                achieved[row],
                delta[row]
            );
        }
        for row in 0..3 {
            assert!(
                (achieved[row] - delta[row]).abs() <= 0.3 * delta[row].abs() + 1e-4,
                "force row {row}: {} vs {}",
                achieved[row],
                delta[row]
            );
        }
    }

    #[test]
    fn huge_roll_torque_saturates_motor_speeds() {
        let config = hexa();
        let weights = inner_weights();
        let hover = ActuatorState::hover(&config);
        // At zero tilt the roll authority sits in the speed columns, and
        // 1.5 Nm needs a speed split far beyond the allowed range.
        let delta = Vec6::new(0.0, 0.0, 0.0, 1.5, 0.0, 0.0);
        let out = inner_allocation_step(&config, &weights, delta, &hover, None).unwrap();
        assert!(!out.solution.active.is_empty());
        let mut at_limit = 0;
        for i in 0..config.n() {
            let t = &out.command.tilt[i];
            assert!(t.x.abs() <= config.alpha_limit + 1e-9);
            assert!(t.y.abs() <= config.beta_limit + 1e-9);
            let w = out.command.omega[i];
            assert!(w >= config.omega_min - 1e-9 && w <= config.omega_max + 1e-9);
            if w <= config.omega_min + 1e-6 || w >= config.omega_max - 1e-6 {
                at_limit += 1;
            }
        }
        assert!(at_limit > 0, "expected speed limits to engage");
        // The realized roll torque falls short of the unreachable demand.
        let before = wrench_of(&config, &hover.to_vector());
        let after = wrench_of(&config, &out.command.to_vector());
        assert!(after[3] - before[3] < 1.45);
        assert!(after[3] - before[3] > 0.2);
    }

    #[test]
    fn lateral_force_demand_beyond_tilt_range_pins_servos() {
        let config = hexa();
        let weights = inner_weights();
        let hover = ActuatorState::hover(&config);
        // 10 N sideways exceeds what the tilt range provides at hover thrust.
        let delta = Vec6::new(10.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let out = inner_allocation_step(&config, &weights, delta, &hover, None).unwrap();
        let pinned = (0..config.n())
            .filter(|&i| out.command.tilt[i].y.abs() >= config.beta_limit - 1e-9)
            .count();
        assert!(pinned >= 4, "expected most pivot servos at the stop, got {pinned}");
        let before = wrench_of(&config, &hover.to_vector());
        let after = wrench_of(&config, &out.command.to_vector());
        let achieved = after[0] - before[0];
        assert!(achieved > 1.0 && achieved < 10.0, "achieved {achieved}");
    }

    #[test]
    fn climb_demand_beyond_thrust_range_pins_speeds() {
        let config = hexa();
        let weights = inner_weights();
        let hover = ActuatorState::hover(&config);
        // The allocator works in its linearization: around hover each motor
        // offers 2 k_t w_h * w_h of +z force by stopping, ~13 N over six
        // motors. Demand far enough beyond that (the increment penalty on
        // ~100 rad/s speed moves resists until ~17 N) and every speed floors.
        let delta = Vec6::new(0.0, 0.0, 25.0, 0.0, 0.0, 0.0);
        let out = inner_allocation_step(&config, &weights, delta, &hover, None).unwrap();
        for i in 0..config.n() {
            assert!(out.command.omega[i] >= config.omega_min - 1e-9);
            assert!(out.command.omega[i] <= config.omega_max + 1e-9);
        }
        let pinned_low = (0..config.n())
            .filter(|&i| out.command.omega[i] <= config.omega_min + 1e-6)
            .count();
        assert_eq!(pinned_low, config.n(), "expected every speed at the floor");
        // With all motors stopped the true realized gain is the hover thrust.
        let before = wrench_of(&config, &hover.to_vector());
        let after = wrench_of(&config, &out.command.to_vector());
        let mg = config.mass * config.gravity;
        assert_relative_eq!(after[2] - before[2], mg, epsilon = 1e-9);
    }

    #[test]
    fn linearization_error_shrinks_quadratically() {
        let config = hexa();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let u = random_actuators(&config, &mut rng);
        let jac = actuator_jacobian(&config, &u);
        let dir = DVector::from_fn(4 * config.n(), |i, _| {
            if i % 4 == 3 {
                rng.gen_range(-1.0..1.0)
            } else {
                rng.gen_range(-0.01..0.01)
            }
        });
        let base = u.to_vector();
        let f0 = wrench_of(&config, &base);
        let remainder = |h: f64| {
            let fh = wrench_of(&config, &(&base + h * &dir));
            (&fh - &f0 - h * (&jac * &dir)).norm()
        };
        let r1 = remainder(1.0);
        let r2 = remainder(0.5);
        let ratio = r1 / r2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x shrink, got {ratio:.2} (r1 = {r1:.3e})"
        );
    }

    #[test]
    fn allocation_is_deterministic_and_warm_start_agrees() {
        let config = hexa();
        let weights = inner_weights();
        let hover = ActuatorState::hover(&config);
        let delta = Vec6::new(0.02, 0.01, -0.08, 0.001, -0.002, 0.001);
        let cold1 = inner_allocation_step(&config, &weights, delta, &hover, None).unwrap();
        let cold2 = inner_allocation_step(&config, &weights, delta, &hover, None).unwrap();
        assert_eq!(cold1.command.to_vector(), cold2.command.to_vector());
        let warm = inner_allocation_step(
            &config,
            &weights,
            delta,
            &hover,
            Some(cold1.solution.x.clone()),
        )
        .unwrap();
        assert!(
            (warm.command.to_vector() - cold1.command.to_vector()).amax() <= 1e-9,
            "warm start moved the optimum"
        );
    }
}
