//! Outer-loop guidance: a cascaded position law produces an incremental
//! acceleration demand, and a weighted least-squares stage splits that demand
//! between a body-frame force increment and an attitude command while
//! respecting the attainable lateral force set.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::config::{AllocationWeights, OuterGains};
use crate::force_sets::{PlaneSlice, Polytope};
use crate::model::{euler_to_rotation, rotated_force_jacobian, wrap_angle, Vec3};
use crate::signal::FirstOrderBlock;
use crate::wls::{WlsError, WlsProblem, WlsSolution};

#[derive(Debug, Error)]
pub enum GuidanceError {
    /// The lateral force set has no usable cross-section near the requested
    /// vertical force. Indicates a degenerate force set, not a runtime state.
    #[error("force set has no usable slice near fz = {0:.4}")]
    EmptySlice(f64),
    #[error(transparent)]
    Solver(#[from] WlsError),
}

/// Cascaded position/velocity law, one block pair per world axis:
/// `acc_ref = Kv(Kp(pos_err) - vel_m)`.
pub struct PositionLaw {
    position: [FirstOrderBlock; 3],
    velocity: [FirstOrderBlock; 3],
}

impl PositionLaw {
    pub fn new(gains: &OuterGains, dt: f64) -> Self {
        let p = || FirstOrderBlock::new(gains.position.clone(), dt);
        let v = || FirstOrderBlock::new(gains.velocity.clone(), dt);
        Self {
            position: [p(), p(), p()],
            velocity: [v(), v(), v()],
        }
    }

    /// Seed the internal states for steady tracking at a trajectory point:
    /// the position blocks already output the reference velocity, so the
    /// first ticks demand no correction from a vehicle that starts on the
    /// trajectory. Without this the blocks wake at zero and the velocity
    /// term alone demands `gain * |v_ref|` of acceleration.
    pub fn seed_tracking(&mut self, position_error: Vec3, velocity_ref: Vec3) {
        for axis in 0..3 {
            self.position[axis].seed(position_error[axis], velocity_ref[axis]);
        }
    }

    /// One control tick: world-frame acceleration reference from the position
    /// error and the measured velocity.
    pub fn step(&mut self, position_error: Vec3, velocity_m: Vec3) -> Vec3 {
        let mut acc = Vec3::zeros();
        for axis in 0..3 {
            let vel_ref = self.position[axis].step(position_error[axis]);
            acc[axis] = self.velocity[axis].step(vel_ref - velocity_m[axis]);
        }
        acc
    }
}

/// Linearized map from the stacked increment `(delta f_b, delta mu)` to the
/// world-frame force increment: `[R(mu_m) | d(R(mu) f_b_m)/dmu]`, 3 x 6.
pub fn effectiveness_matrix(mu_m: Vec3, f_b_m: Vec3) -> DMatrix<f64> {
    let r = euler_to_rotation(mu_m);
    let phi = rotated_force_jacobian(mu_m, f_b_m);
    let mut g = DMatrix::zeros(3, 6);
    g.view_mut((0, 0), (3, 3)).copy_from(&r);
    g.view_mut((0, 3), (3, 3)).copy_from(&phi);
    g
}

/// Body-frame force that would realize the commanded acceleration increment
/// at the measured attitude: rotate the measured force to the world frame,
/// add `m * delta_acc`, and rotate back.
pub fn reference_body_force(mass: f64, delta_acc: Vec3, mu_m: Vec3, f_b_m: Vec3) -> Vec3 {
    let r = euler_to_rotation(mu_m);
    r.transpose() * (mass * delta_acc + r * f_b_m)
}

/// Per-tick attitude-command increment caps (rad). The allocation linearizes
/// the force map around the measured attitude, so one tick may only move the
/// command as far as that linearization — and the inner loop's torque
/// authority — stays honest. Yaw is capped tighter because its rotor torque
/// authority is an order of magnitude below roll/pitch.
const ROLL_PITCH_TRUST: f64 = 0.3;
const YAW_TRUST: f64 = 0.05;

/// Feasible region handed to the guidance QP, expressed in increment
/// coordinates around the measured input.
pub struct GuidanceConstraints {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Lateral force-set rows: `gen_a * x <= gen_b`, acting on the first two
    /// components of the increment only.
    pub gen_a: DMatrix<f64>,
    pub gen_b: DVector<f64>,
    /// Cross-section of the force set used for the lateral rows.
    pub slice: PlaneSlice,
    /// Vertical force the slice was taken at, after clamping into the set's
    /// vertical range.
    pub f_bz_target: f64,
}

/// Builds box and half-plane constraints from the zero-torque force set, the
/// measured input, and the roll/pitch command limit.
///
/// The slice is taken at the reference vertical force, clamped 1% inside the
/// set's vertical extent so a cross-section always exists. Box bounds are
/// widened to contain the zero increment; the lateral rows are not, so a
/// measured force that drifted outside the set is pulled back in.
pub fn build_constraints(
    force_set: &Polytope,
    f_b_m: Vec3,
    f_bz_ref: f64,
    mu_m: Vec3,
    attitude_limit: f64,
) -> Result<GuidanceConstraints, GuidanceError> {
    let (z_min, z_max) = force_set.z_range();
    let span = z_max - z_min;
    if !(span > 0.0) {
        return Err(GuidanceError::EmptySlice(f_bz_ref));
    }
    let margin = 0.01 * span;
    let f_bz_target = f_bz_ref.clamp(z_min + margin, z_max - margin);
    let slice = force_set
        .plane_slice(f_bz_target)
        .ok_or(GuidanceError::EmptySlice(f_bz_target))?;

    let inf = f64::INFINITY;
    let mut lower = DVector::from_element(6, -inf);
    let mut upper = DVector::from_element(6, inf);
    // Vertical force stays bracketed by the set's extent.
    lower[2] = (z_min - f_b_m.z).min(0.0);
    upper[2] = (z_max - f_b_m.z).max(0.0);
    // Roll/pitch commands stay inside the configured box; yaw has no absolute
    // limit. All three attitude increments are additionally held inside the
    // trust region of the Taylor linearization: the effectiveness matrix is a
    // first-order expansion around the measured input, and letting one tick
    // command a radian-scale rotation (as the cheap yaw column will when the
    // lateral demand saturates the slice) acts on pure extrapolation error.
    // Each cap sits below the attitude-command jump whose torque the rotors
    // can realize within a tick, so a clipped command is one the inner loop
    // could not have followed anyway; commands still slew at >= 25 rad/s.
    for (axis, angle) in [(3, mu_m.x), (4, mu_m.y)] {
        lower[axis] = (-attitude_limit - angle).min(0.0).max(-ROLL_PITCH_TRUST);
        upper[axis] = (attitude_limit - angle).max(0.0).min(ROLL_PITCH_TRUST);
    }
    lower[5] = -YAW_TRUST;
    upper[5] = YAW_TRUST;

    let rows = slice.a.nrows();
    let mut gen_a = DMatrix::zeros(rows, 6);
    let mut gen_b = DVector::zeros(rows);
    for k in 0..rows {
        gen_a[(k, 0)] = slice.a[(k, 0)];
        gen_a[(k, 1)] = slice.a[(k, 1)];
        gen_b[k] = slice.b[k] - slice.a[(k, 0)] * f_b_m.x - slice.a[(k, 1)] * f_b_m.y;
    }

    Ok(GuidanceConstraints {
        lower,
        upper,
        gen_a,
        gen_b,
        slice,
        f_bz_target,
    })
}

/// Output of one guidance allocation step.
pub struct GuidanceCommand {
    /// Commanded body-frame force increment over the measured force.
    pub delta_force: Vec3,
    /// Absolute attitude command `mu_m + delta_mu`.
    pub attitude_cmd: Vec3,
    pub solution: WlsSolution,
}

/// Stacked least-squares system for the guidance trade-off. The top block
/// tracks the acceleration demand through the effectiveness matrix; the
/// bottom block holds the increment near its preferred value, which is zero
/// force change plus the full attitude error.
pub(crate) fn assemble_system(
    weights: &AllocationWeights,
    mass: f64,
    delta_acc: Vec3,
    attitude_error: Vec3,
    g: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let sqrt_gamma = weights.gamma_opt.sqrt();
    let mut a = DMatrix::zeros(9, 6);
    let mut b = DVector::zeros(9);
    for row in 0..3 {
        let w = sqrt_gamma * weights.w_v[row];
        for col in 0..6 {
            a[(row, col)] = w * g[(row, col)];
        }
        b[row] = w * mass * delta_acc[row];
    }
    for j in 0..6 {
        a[(3 + j, j)] = weights.w_u[j];
    }
    for axis in 0..3 {
        b[6 + axis] = weights.w_u[3 + axis] * attitude_error[axis];
    }
    (a, b)
}

/// One guidance allocation step: splits the acceleration increment between a
/// body-force increment and an attitude command, subject to the constraint
/// set. Angle errors are wrapped so the command takes the short way around.
pub fn guidance_allocation_step(
    weights: &AllocationWeights,
    mass: f64,
    delta_acc: Vec3,
    mu_ref: Vec3,
    mu_m: Vec3,
    f_b_m: Vec3,
    constraints: &GuidanceConstraints,
    warm_start: Option<DVector<f64>>,
) -> Result<GuidanceCommand, GuidanceError> {
    let g = effectiveness_matrix(mu_m, f_b_m);
    let attitude_error = Vec3::new(
        wrap_angle(mu_ref.x - mu_m.x),
        wrap_angle(mu_ref.y - mu_m.y),
        wrap_angle(mu_ref.z - mu_m.z),
    );
    let (a, b) = assemble_system(weights, mass, delta_acc, attitude_error, &g);
    let mut problem = WlsProblem::new(a, b);
    problem.lower = constraints.lower.clone();
    problem.upper = constraints.upper.clone();
    problem.c = constraints.gen_a.clone();
    problem.d = constraints.gen_b.clone();
    problem.x0 = warm_start;
    let solution = problem.solve()?;
    let x = &solution.x;
    Ok(GuidanceCommand {
        delta_force: Vec3::new(x[0], x[1], x[2]),
        attitude_cmd: mu_m + Vec3::new(x[3], x[4], x[5]),
        solution,
    })
}
