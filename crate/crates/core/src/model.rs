//! Rigid-body model of an over-actuated multirotor in NED world coordinates.
//!
//! Each motor sits at a body-frame position, spins with a fixed handedness,
//! and tilts on two servo axes (roll tilt `alpha`, pitch tilt `beta`) plus an
//! optional fixed yaw mounting angle `gamma`. At zero tilt every thrust axis
//! points along -z_B (up). Thrust is `k_t * omega^2`, rotor drag torque is
//! `spin * k_d * omega^2` about the thrust axis.

use nalgebra::DMatrix;
use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec6 = nalgebra::Vector6<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("motor speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("motor index {index} out of range for {count} motors")]
    MotorIndex { index: usize, count: usize },
}

/// Geometry of one motor: body-frame position, spin handedness (+1 or -1),
/// and the fixed yaw mounting angle of its tilt gimbal.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorGeometry {
    pub position: Vec3,
    pub spin: f64,
    pub gamma: f64,
}

/// Physical parameters shared by the plant and the controller model.
#[derive(Debug, Clone, PartialEq)]
pub struct MultirotorConfig {
    pub mass: f64,
    pub inertia: Mat3,
    pub gravity: f64,
    pub thrust_coeff: f64,
    pub drag_coeff: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub alpha_limit: f64,
    pub beta_limit: f64,
    /// When false the yaw tilt of every motor is a fixed mounting angle and
    /// is excluded from the allocation decision space.
    pub gamma_morphing: bool,
    pub motors: Vec<MotorGeometry>,
}

impl MultirotorConfig {
    pub fn n(&self) -> usize {
        self.motors.len()
    }

    /// Rotor drag-to-thrust ratio `k_d / k_t`.
    pub fn drag_ratio(&self) -> f64 {
        self.drag_coeff / self.thrust_coeff
    }

    /// Thrust of one motor at full speed.
    pub fn max_thrust(&self) -> f64 {
        self.thrust_coeff * self.omega_max * self.omega_max
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Speed at which all motors at zero tilt exactly cancel gravity.
    pub fn hover_speed(&self) -> f64 {
        (self.weight() / (self.n() as f64 * self.thrust_coeff)).sqrt()
    }
}

/// Rigid-body state; `rotation` maps body vectors into the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyState {
    pub position: Vec3,
    pub velocity: Vec3,
    pub rotation: Mat3,
    pub angular_rate: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            velocity: Vec3::zeros(),
            rotation: Mat3::identity(),
            angular_rate: Vec3::zeros(),
        }
    }
}

/// Tilt angles (alpha, beta, gamma) and speed of every motor. Flattened
/// vector order is `[a1, b1, g1, w1, a2, ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorState {
    pub tilt: Vec<Vec3>,
    pub omega: Vec<f64>,
}

impl ActuatorState {
    pub fn zeros(n: usize) -> Self {
        Self {
            tilt: vec![Vec3::zeros(); n],
            omega: vec![0.0; n],
        }
    }

    /// All motors untilted at hover speed.
    pub fn hover(config: &MultirotorConfig) -> Self {
        let mut s = Self::zeros(config.n());
        let w = config.hover_speed();
        for (i, t) in s.tilt.iter_mut().enumerate() {
            t.z = config.motors[i].gamma;
        }
        for w_i in &mut s.omega {
            *w_i = w;
        }
        s
    }

    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn to_vector(&self) -> nalgebra::DVector<f64> {
        let n = self.n();
        let mut v = nalgebra::DVector::zeros(4 * n);
        for i in 0..n {
            v[4 * i] = self.tilt[i].x;
            v[4 * i + 1] = self.tilt[i].y;
            v[4 * i + 2] = self.tilt[i].z;
            v[4 * i + 3] = self.omega[i];
        }
        v
    }

    pub fn from_vector(v: &nalgebra::DVector<f64>) -> Self {
        let n = v.len() / 4;
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.tilt[i] = Vec3::new(v[4 * i], v[4 * i + 1], v[4 * i + 2]);
            s.omega[i] = v[4 * i + 3];
        }
        s
    }
}

/// Body-frame force and torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Self {
            force: Vec3::zeros(),
            torque: Vec3::zeros(),
        }
    }

    pub fn to_vector(&self) -> Vec6 {
        Vec6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.torque.x,
            self.torque.y,
            self.torque.z,
        )
    }
}

/// External disturbance wrench in world-frame force / body-frame torque.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub force_world: Vec3,
    pub torque_body: Vec3,
}

impl Disturbance {
    pub fn none() -> Self {
        Self {
            force_world: Vec3::zeros(),
            torque_body: Vec3::zeros(),
        }
    }
}

/// Cross-product matrix: `skew(a) * b == a x b`.
pub fn skew(v: Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn rot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Body-to-world rotation from XYZ Euler angles: `R = Rx(phi) Ry(theta) Rz(psi)`.
pub fn euler_to_rotation(mu: Vec3) -> Mat3 {
    rot_x(mu.x) * rot_y(mu.y) * rot_z(mu.z)
}

fn drot_x(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn drot_y(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drot_z(a: f64) -> Mat3 {
    let (s, c) = a.sin_cos();
    Mat3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Jacobian of the rotated vector `R(mu) f` with respect to the Euler angles,
/// holding `f` fixed. Columns are the partials in `(phi, theta, psi)` order.
pub fn rotated_force_jacobian(mu: Vec3, f: Vec3) -> Mat3 {
    let rx = rot_x(mu.x);
    let ry = rot_y(mu.y);
    let rz = rot_z(mu.z);
    let d_phi = drot_x(mu.x) * ry * rz * f;
    let d_theta = rx * drot_y(mu.y) * rz * f;
    let d_psi = rx * ry * drot_z(mu.z) * f;
    Mat3::from_columns(&[d_phi, d_theta, d_psi])
}

/// Jacobian of the unit thrust direction with respect to the tilt angles
/// `lambda = (alpha, beta, gamma)`. The gamma column is identically zero
/// because the mount keeps the thrust axis on the gamma rotation axis.
pub fn thrust_direction_jacobian(lambda: Vec3) -> Mat3 {
    let rx = rot_x(lambda.x);
    let ry = rot_y(lambda.y);
    let rz = rot_z(lambda.z);
    let m = mount_rotation() * Vec3::z();
    let d_alpha = drot_x(lambda.x) * ry * rz * m;
    let d_beta = rx * drot_y(lambda.y) * rz * m;
    let d_gamma = rx * ry * drot_z(lambda.z) * m;
    Mat3::from_columns(&[d_alpha, d_beta, d_gamma])
}

/// True when the pitch angle is within ~1e-9 of +-90 degrees, where roll and
/// yaw are no longer separable.
pub fn gimbal_locked(r: &Mat3) -> bool {
    r[(0, 2)].abs() > 1.0 - 1e-9
}

/// Recovers XYZ Euler angles from a rotation matrix. At the pitch
/// singularity roll is set to zero by convention.
pub fn rotation_to_euler(r: &Mat3) -> Vec3 {
    if gimbal_locked(r) {
        let theta = if r[(0, 2)] > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        // With phi = 0 the remaining rows collapse to functions of psi alone.
        let psi = r[(1, 0)].atan2(r[(1, 1)]);
        return Vec3::new(0.0, theta, psi);
    }
    let theta = r[(0, 2)].clamp(-1.0, 1.0).asin();
    let phi = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let psi = (-r[(0, 1)]).atan2(r[(0, 0)]);
    Vec3::new(phi, theta, psi)
}

/// Wraps an angle to the interval (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = (x + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if y == -std::f64::consts::PI {
        y = std::f64::consts::PI;
    }
    y
}

/// Zero-tilt mounting rotation: motor +z maps to body -z.
fn mount_rotation() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
}

/// Motor-to-body rotation for tilt angles `lambda = (alpha, beta, gamma)`:
/// `R = Rx(alpha) Ry(beta) Rz(gamma) R0`.
pub fn motor_rotation(lambda: Vec3) -> Mat3 {
    rot_x(lambda.x) * rot_y(lambda.y) * rot_z(lambda.z) * mount_rotation()
}

/// Unit thrust direction in the body frame for tilt `lambda`.
pub fn thrust_direction(lambda: Vec3) -> Vec3 {
    motor_rotation(lambda) * Vec3::z()
}

/// Scalar thrust and drag torque of motor `index` at speed `omega`.
pub fn motor_thrust_torque(
    config: &MultirotorConfig,
    index: usize,
    omega: f64,
) -> Result<(f64, f64), ModelError> {
    if omega < 0.0 {
        return Err(ModelError::NegativeSpeed(omega));
    }
    let motor = config
        .motors
        .get(index)
        .ok_or(ModelError::MotorIndex { index, count: config.n() })?;
    let thrust = config.thrust_coeff * omega * omega;
    let drag = motor.spin * config.drag_coeff * omega * omega;
    Ok((thrust, drag))
}

/// Per-motor 6x3 map from a body-frame motor force to its wrench
/// contribution: force passes through, torque is `d x f + r * spin * f`.
fn wrench_map(config: &MultirotorConfig, index: usize) -> (Mat3, Mat3) {
    let motor = &config.motors[index];
    let torque = skew(motor.position) + Mat3::identity() * (config.drag_ratio() * motor.spin);
    (Mat3::identity(), torque)
}

/// Static allocation matrices `(B1, B2)` mapping stacked body-frame motor
/// forces to total force (`B1`, 3 x 3n) and torque (`B2`, 3 x 3n).
pub fn allocation_matrices(config: &MultirotorConfig) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = config.n();
    let mut b1 = DMatrix::zeros(3, 3 * n);
    let mut b2 = DMatrix::zeros(3, 3 * n);
    for i in 0..n {
        let (bf, bt) = wrench_map(config, i);
        b1.view_mut((0, 3 * i), (3, 3)).copy_from(&bf);
        b2.view_mut((0, 3 * i), (3, 3)).copy_from(&bt);
    }
    (b1, b2)
}

/// Tilt-dependent 6 x 3n allocation matrix mapping motor-frame forces to the
/// body wrench; block `i` is `[I; skew(d_i) + r c_i I] * R_i(lambda_i)`.
pub fn extended_allocation_matrix(
    config: &MultirotorConfig,
    tilts: &[Vec3],
) -> DMatrix<f64> {
    assert_eq!(tilts.len(), config.n(), "one tilt vector per motor");
    let n = config.n();
    let mut b = DMatrix::zeros(6, 3 * n);
    for i in 0..n {
        let (bf, bt) = wrench_map(config, i);
        let r = motor_rotation(tilts[i]);
        b.view_mut((0, 3 * i), (3, 3)).copy_from(&(bf * r));
        b.view_mut((3, 3 * i), (3, 3)).copy_from(&(bt * r));
    }
    b
}

/// Total body wrench produced by an actuator state.
pub fn total_wrench(config: &MultirotorConfig, actuators: &ActuatorState) -> Wrench {
    assert_eq!(actuators.n(), config.n(), "actuator count must match config");
    let r = config.drag_ratio();
    let mut force = Vec3::zeros();
    let mut torque = Vec3::zeros();
    for i in 0..config.n() {
        let w = actuators.omega[i];
        let f = config.thrust_coeff * w * w * thrust_direction(actuators.tilt[i]);
        force += f;
        torque += config.motors[i].position.cross(&f) + r * config.motors[i].spin * f;
    }
    Wrench { force, torque }
}

/// Time derivative of the rigid-body state.
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub velocity: Vec3,
    pub acceleration: Vec3,
    pub rotation_rate: Mat3,
    pub angular_acceleration: Vec3,
}

/// Newton-Euler derivative: translational dynamics in the world frame,
/// rotational dynamics in the body frame.
pub fn dynamics_derivative(
    state: &RigidBodyState,
    actuators: &ActuatorState,
    disturbance: &Disturbance,
    config: &MultirotorConfig,
) -> StateDerivative {
    let wrench = total_wrench(config, actuators);
    dynamics_with_wrench(state, &wrench, disturbance, config)
}

fn dynamics_with_wrench(
    state: &RigidBodyState,
    wrench: &Wrench,
    disturbance: &Disturbance,
    config: &MultirotorConfig,
) -> StateDerivative {
    let acceleration = config.gravity * Vec3::z()
        + (state.rotation * wrench.force + disturbance.force_world) / config.mass;
    let omega = state.angular_rate;
    let torque = wrench.torque + disturbance.torque_body - omega.cross(&(config.inertia * omega));
    let inertia_inv = config
        .inertia
        .try_inverse()
        .expect("inertia matrix must be invertible");
    StateDerivative {
        velocity: state.velocity,
        acceleration,
        rotation_rate: state.rotation * skew(omega),
        angular_acceleration: inertia_inv * torque,
    }
}

/// Projects a near-rotation matrix back onto the rotation group by Newton
/// iteration on the polar factor.
pub fn orthonormalize(r: Mat3) -> Mat3 {
    let mut x = r;
    for _ in 0..8 {
        let xt_inv = match x.try_inverse() {
            Some(inv) => inv.transpose(),
            None => return r,
        };
        let next = 0.5 * (x + xt_inv);
        let delta = (next - x).norm();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    x
}

/// One RK4 step with the actuator state (hence the body wrench) held
/// constant. The rotation matrix is re-orthonormalized afterwards.
pub fn rk4_step(
    state: &RigidBodyState,
    actuators: &ActuatorState,
    disturbance: &Disturbance,
    config: &MultirotorConfig,
    dt: f64,
) -> RigidBodyState {
    let wrench = total_wrench(config, actuators);
    rk4_step_with(state, disturbance, config, dt, |_| wrench.clone())
}

/// One RK4 step with a time-varying body wrench, evaluated at the stage
/// offsets 0, dt/2, dt from the step start.
pub fn rk4_step_with(
    state: &RigidBodyState,
    disturbance: &Disturbance,
    config: &MultirotorConfig,
    dt: f64,
    wrench_at: impl Fn(f64) -> Wrench,
) -> RigidBodyState {
    let w0 = wrench_at(0.0);
    let w_half = wrench_at(0.5 * dt);
    let w1 = wrench_at(dt);
    let f = |s: &RigidBodyState, w: &Wrench| dynamics_with_wrench(s, w, disturbance, config);

    let k1 = f(state, &w0);
    let k2 = f(&advance(state, &k1, 0.5 * dt), &w_half);
    let k3 = f(&advance(state, &k2, 0.5 * dt), &w_half);
    let k4 = f(&advance(state, &k3, dt), &w1);

    let sixth = dt / 6.0;
    let mut next = RigidBodyState {
        position: state.position
            + sixth * (k1.velocity + 2.0 * k2.velocity + 2.0 * k3.velocity + k4.velocity),
        velocity: state.velocity
            + sixth
                * (k1.acceleration
                    + 2.0 * k2.acceleration
                    + 2.0 * k3.acceleration
                    + k4.acceleration),
        rotation: state.rotation
            + sixth
                * (k1.rotation_rate
                    + 2.0 * k2.rotation_rate
                    + 2.0 * k3.rotation_rate
                    + k4.rotation_rate),
        angular_rate: state.angular_rate
            + sixth
                * (k1.angular_acceleration
                    + 2.0 * k2.angular_acceleration
                    + 2.0 * k3.angular_acceleration
                    + k4.angular_acceleration),
    };
    next.rotation = orthonormalize(next.rotation);
    next
}

fn advance(state: &RigidBodyState, d: &StateDerivative, dt: f64) -> RigidBodyState {
    RigidBodyState {
        position: state.position + dt * d.velocity,
        velocity: state.velocity + dt * d.acceleration,
        rotation: state.rotation + dt * d.rotation_rate,
        angular_rate: state.angular_rate + dt * d.angular_acceleration,
    }
}
