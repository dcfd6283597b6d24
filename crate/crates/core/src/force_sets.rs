//! Attainable and zero-torque-feasible force sets of the vehicle, their
//! membership tests, and the lateral-force plane slice the guidance
//! allocation uses as linear constraints.
//!
//! Both sets are built as support-function samples over a well-spread
//! direction list: for each direction a small LP maximizes the force
//! component over convex combinations of per-motor force-set vertices (with
//! the net-torque equality added for the zero-torque set), and the optimum
//! becomes one halfspace of the polytope. Per-motor vertex lists combine a
//! tilt-angle grid with the exact per-direction support maximizer, so every
//! emitted support value is attained by an admissible actuator state.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lp::{max_standard_form, LpOutcome};
use crate::model::{skew, thrust_direction, Mat3, MultirotorConfig, Vec3};

#[derive(Debug, Error)]
pub enum ForceSetError {
    #[error("requested torque is not attainable by any admissible actuator state")]
    UnattainableTorque,
    #[error("support LP failed: {0}")]
    LpFailure(String),
}

/// Convexified set of body-frame forces one motor can produce, as a vertex
/// list. The thrust direction does not depend on the mount yaw, so for a
/// uniform-limit vehicle every motor shares the same set.
#[derive(Debug, Clone)]
pub struct MotorForceSet {
    pub vertices: Vec<Vec3>,
}

/// Bounded convex polytope in halfspace form `A x <= b`; rows of `A` are the
/// unit support directions used to build it, so `b` holds support values.
#[derive(Debug, Clone)]
pub struct Polytope {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub dim: usize,
    /// Strictly interior point when one is known (used by mesh export).
    pub interior: Option<DVector<f64>>,
    /// Per-axis extent, recorded from the +/- axis support values.
    pub axis_range: Vec<(f64, f64)>,
}

impl Polytope {
    pub fn contains(&self, point: &DVector<f64>, tol: f64) -> bool {
        assert_eq!(point.len(), self.dim);
        let residual = &self.a * point - &self.b;
        residual.max() <= tol
    }

    pub fn contains3(&self, point: &Vec3, tol: f64) -> bool {
        self.contains(&DVector::from_row_slice(point.as_slice()), tol)
    }

    pub fn z_range(&self) -> (f64, f64) {
        self.axis_range[2]
    }

    /// Intersection with the plane `f_z = z`, reduced to halfspaces on
    /// `(f_x, f_y)`. `None` when `z` lies outside the polytope's z-extent.
    pub fn plane_slice(&self, z: f64) -> Option<PlaneSlice> {
        assert_eq!(self.dim, 3);
        let (z_min, z_max) = self.z_range();
        let scale = 1.0 + z_min.abs().max(z_max.abs());
        if z < z_min - 1e-9 * scale || z > z_max + 1e-9 * scale {
            return None;
        }
        let mut rows: Vec<[f64; 2]> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for i in 0..self.a.nrows() {
            let ax = self.a[(i, 0)];
            let ay = self.a[(i, 1)];
            let b = self.b[i] - self.a[(i, 2)] * z;
            let norm = ax.hypot(ay);
            if norm < 1e-12 {
                // halfspace parallel to the slice plane: vacuous or fatal
                if b < -1e-9 * scale {
                    return None;
                }
                continue;
            }
            rows.push([ax / norm, ay / norm]);
            rhs.push(b / norm);
        }
        Some(PlaneSlice {
            a: DMatrix::from_fn(rows.len(), 2, |r, c| rows[r][c]),
            b: DVector::from_vec(rhs),
        })
    }
}

/// 2-D halfspace set `A (f_x, f_y)^T <= b` with unit rows.
#[derive(Debug, Clone)]
pub struct PlaneSlice {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl PlaneSlice {
    pub fn contains(&self, fx: f64, fy: f64, tol: f64) -> bool {
        (0..self.a.nrows())
            .all(|i| self.a[(i, 0)] * fx + self.a[(i, 1)] * fy <= self.b[i] + tol)
    }

    /// Worst constraint violation at `(fx, fy)`; non-positive inside.
    pub fn violation(&self, fx: f64, fy: f64) -> f64 {
        (0..self.a.nrows())
            .map(|i| self.a[(i, 0)] * fx + self.a[(i, 1)] * fy - self.b[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Vertex list of motor `index`'s force set: the zero point (or the
/// min-speed shell when the floor speed is nonzero) plus the max-thrust
/// shell over a uniform tilt grid. Inner approximation of the true cone cap.
pub fn motor_force_polytope(
    config: &MultirotorConfig,
    index: usize,
    grid: (usize, usize),
) -> MotorForceSet {
    assert!(index < config.n());
    assert!(grid.0 >= 3 && grid.1 >= 3, "grid must be at least 3x3");
    let f_max = config.max_thrust();
    let f_min = config.thrust_coeff * config.omega_min * config.omega_min;

    let mut vertices = Vec::with_capacity(grid.0 * grid.1 + 1);
    if f_min < 1e-12 {
        vertices.push(Vec3::zeros());
    }
    let mut shell = |magnitude: f64| {
        for ia in 0..grid.0 {
            let alpha = lerp(-config.alpha_limit, config.alpha_limit, ia, grid.0);
            for ib in 0..grid.1 {
                let beta = lerp(-config.beta_limit, config.beta_limit, ib, grid.1);
                vertices.push(magnitude * thrust_direction(Vec3::new(alpha, beta, 0.0)));
            }
        }
    };
    if f_min >= 1e-12 {
        shell(f_min);
    }
    shell(f_max);
    MotorForceSet { vertices }
}

fn lerp(lo: f64, hi: f64, i: usize, count: usize) -> f64 {
    lo + (hi - lo) * (i as f64) / ((count - 1) as f64)
}

/// Exact maximizer of `d . f` over one motor's true (non-gridded) force set:
/// the projection factors into two 1-D sinusoid maximizations over the tilt
/// box because the thrust direction is `(-sin b, sin a cos b, -cos a cos b)`
/// and `cos b > 0` within the limits. Returns the optimal force and support
/// value.
pub fn motor_support_point(config: &MultirotorConfig, d: &Vec3) -> (Vec3, f64) {
    // alpha maximizes A(a) = d_y sin a - d_z cos a
    let (alpha, a_best) = best_angle(d.y, -d.z, config.alpha_limit);
    // beta then maximizes -d_x sin b + A* cos b
    let (beta, gain) = best_angle(-d.x, a_best, config.beta_limit);

    let f_max = config.max_thrust();
    let f_min = config.thrust_coeff * config.omega_min * config.omega_min;
    let dir = thrust_direction(Vec3::new(alpha, beta, 0.0));
    let candidates = [(f_min * gain, f_min), (f_max * gain, f_max)];
    let best = candidates
        .iter()
        .cloned()
        .fold((f_min * gain, f_min), |acc, c| if c.0 > acc.0 { c } else { acc });
    if f_min < 1e-12 && best.0 <= 0.0 {
        (Vec3::zeros(), 0.0)
    } else {
        (best.1 * dir, best.0)
    }
}

/// Maximize `p sin t + q cos t` over `|t| <= limit` (limit < pi/2): the
/// unconstrained peak at `atan2(p, q)` if it falls inside, else an endpoint.
fn best_angle(p: f64, q: f64, limit: f64) -> (f64, f64) {
    let eval = |t: f64| p * t.sin() + q * t.cos();
    let mut best = (-limit, eval(-limit));
    for t in [limit, p.atan2(q)] {
        if t.abs() <= limit && eval(t) > best.1 {
            best = (t, eval(t));
        }
    }
    best
}

/// Unit direction list: icosphere vertices at the given subdivision level
/// (162 at level 2) plus the six axis directions.
pub fn support_directions(subdivisions: u32) -> Vec<Vec3> {
    let mut dirs = icosphere_directions(subdivisions);
    for axis in [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
    ] {
        if dirs.iter().all(|d| (d - axis).norm() > 1e-9) {
            dirs.push(axis);
        }
    }
    dirs
}

/// Icosahedron vertices refined by midpoint subdivision and projected onto
/// the unit sphere; `10 * 4^s + 2` directions at level `s`.
pub fn icosphere_directions(subdivisions: u32) -> Vec<Vec3> {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ];
    let mut verts: Vec<Vec3> = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoint_cache: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint_cache.entry(key).or_insert_with(|| {
                let v = ((verts[a] + verts[b]) / 2.0).normalize();
                verts.push(v);
                verts.len() - 1
            })
        };
        let mut next_faces = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next_faces.push([a, ab, ca]);
            next_faces.push([b, bc, ab]);
            next_faces.push([c, ca, bc]);
            next_faces.push([ab, bc, ca]);
        }
        faces = next_faces;
    }
    verts
}

/// Torque map of motor `i`: `tau_i = (skew(d_i) + r c_i I) f_i`.
fn torque_map(config: &MultirotorConfig, i: usize) -> Mat3 {
    skew(config.motors[i].position) + config.drag_ratio() * config.motors[i].spin * Mat3::identity()
}

/// Set of net body forces attainable while producing exactly `tau_s` net
/// torque. Per direction, maximizes the force component over convex
/// combinations of per-motor vertices subject to the torque equality.
pub fn feasible_force_set(
    config: &MultirotorConfig,
    tau_s: &Vec3,
    directions: &[Vec3],
    grid: (usize, usize),
) -> Result<Polytope, ForceSetError> {
    build_set(config, Some(*tau_s), directions, grid)
}

/// Set of all attainable net body forces (no torque requirement).
pub fn attainable_force_set(
    config: &MultirotorConfig,
    directions: &[Vec3],
    grid: (usize, usize),
) -> Result<Polytope, ForceSetError> {
    build_set(config, None, directions, grid)
}

fn build_set(
    config: &MultirotorConfig,
    tau_s: Option<Vec3>,
    directions: &[Vec3],
    grid: (usize, usize),
) -> Result<Polytope, ForceSetError> {
    assert!(directions.len() >= 32, "need a well-spread direction list");
    let n = config.n();
    let base_sets: Vec<MotorForceSet> =
        (0..n).map(|i| motor_force_polytope(config, i, grid)).collect();
    let torque_maps: Vec<Mat3> = (0..n).map(|i| torque_map(config, i)).collect();

    let mut b = DVector::zeros(directions.len());
    for (row, d) in directions.iter().enumerate() {
        let support = support_lp(config, &base_sets, &torque_maps, tau_s.as_ref(), d)?;
        b[row] = support;
    }

    let a = DMatrix::from_fn(directions.len(), 3, |r, c| directions[r][c]);

    let mut axis_range = vec![(f64::NEG_INFINITY, f64::INFINITY); 3];
    for axis in 0..3 {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (row, d) in directions.iter().enumerate() {
            let mut unit = Vec3::zeros();
            unit[axis] = 1.0;
            if (d - unit).norm() < 1e-9 {
                hi = b[row];
            }
            if (d + unit).norm() < 1e-9 {
                lo = -b[row];
            }
        }
        axis_range[axis] = (lo, hi);
    }

    let mid = DVector::from_vec(axis_range.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect());
    let interior = if mid.iter().all(|v| v.is_finite()) {
        let slack = (&b - &a * &mid).min();
        (slack > 1e-9).then_some(mid)
    } else {
        None
    };

    Ok(Polytope { a, b, dim: 3, interior, axis_range })
}

/// One support LP: maximize `d . sum_i f_i` over `f_i` in the convex hull of
/// motor vertices (augmented with the exact per-direction maximizer), with
/// the optional torque equality. Standard-form variables are the per-motor
/// convex-combination weights.
fn support_lp(
    config: &MultirotorConfig,
    base_sets: &[MotorForceSet],
    torque_maps: &[Mat3],
    tau_s: Option<&Vec3>,
    d: &Vec3,
) -> Result<f64, ForceSetError> {
    let n = config.n();
    let (exact_point, _) = motor_support_point(config, d);

    // per-motor vertex lists with the direction-specific exact maximizer
    let counts: Vec<usize> = base_sets.iter().map(|s| s.vertices.len() + 1).collect();
    let total: usize = counts.iter().sum();
    let rows = if tau_s.is_some() { 3 + n } else { n };

    let mut a = DMatrix::zeros(rows, total);
    let mut rhs = DVector::zeros(rows);
    let mut c = DVector::zeros(total);

    let mut col = 0;
    for i in 0..n {
        let vertices = base_sets[i].vertices.iter().chain(std::iter::once(&exact_point));
        for v in vertices {
            c[col] = d.dot(v);
            if let Some(_tau) = tau_s {
                let tv = torque_maps[i] * v;
                for r in 0..3 {
                    a[(r, col)] = tv[r];
                }
                a[(3 + i, col)] = 1.0;
            } else {
                a[(i, col)] = 1.0;
            }
            col += 1;
        }
    }
    if let Some(tau) = tau_s {
        for r in 0..3 {
            rhs[r] = tau[r];
        }
        for i in 0..n {
            rhs[3 + i] = 1.0;
        }
    } else {
        for i in 0..n {
            rhs[i] = 1.0;
        }
    }

    match max_standard_form(&c, &a, &rhs, 50_000) {
        LpOutcome::Optimal { value, .. } => Ok(value),
        LpOutcome::Infeasible => Err(ForceSetError::UnattainableTorque),
        LpOutcome::Unbounded => Err(ForceSetError::LpFailure(
            "support LP unbounded over a compact set".into(),
        )),
        LpOutcome::Stalled => Err(ForceSetError::LpFailure("simplex stalled".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimSetup;
    use crate::model::{total_wrench, ActuatorState, MotorGeometry};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hexa() -> MultirotorConfig {
        SimSetup::default_hexacopter().vehicle
    }

    /// Coarse settings keep the LP-heavy tests quick.
    fn coarse_dirs() -> Vec<Vec3> {
        support_directions(1)
    }
    const COARSE_GRID: (usize, usize) = (7, 7);

    #[test]
    fn icosphere_counts_and_unit_norm() {
        assert_eq!(icosphere_directions(0).len(), 12);
        assert_eq!(icosphere_directions(1).len(), 42);
        assert_eq!(icosphere_directions(2).len(), 162);
        for d in icosphere_directions(2) {
            assert_relative_eq!(d.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_tilt_limits_degenerate_to_a_segment() {
        let mut config = hexa();
        config.alpha_limit = 1e-12;
        config.beta_limit = 1e-12;
        let set = motor_force_polytope(&config, 0, (3, 3));
        let f_max = config.max_thrust();
        assert!(set.vertices.iter().any(|v| v.norm() < 1e-12));
        for v in set.vertices.iter().filter(|v| v.norm() > 1e-12) {
            assert!((v - Vec3::new(0.0, 0.0, -f_max)).norm() < 1e-9);
        }
    }

    #[test]
    fn max_lateral_vertex_force() {
        let config = hexa();
        let set = motor_force_polytope(&config, 0, (9, 9));
        let max_fx = set.vertices.iter().map(|v| v.x.abs()).fold(0.0, f64::max);
        let expected = config.max_thrust() * config.beta_limit.sin();
        assert_relative_eq!(max_fx, expected, epsilon = 1e-9);
        assert_relative_eq!(expected, 3.2144, epsilon = 1e-3);
    }

    #[test]
    fn grid_vertices_invert_to_admissible_tilts() {
        let config = hexa();
        let set = motor_force_polytope(&config, 0, (9, 9));
        let f_max = config.max_thrust();
        for v in &set.vertices {
            if v.norm() < 1e-12 {
                continue;
            }
            assert!(v.norm() <= f_max + 1e-9);
            let unit = v / v.norm();
            let beta = (-unit.x).asin();
            let alpha = unit.y.atan2(-unit.z);
            assert!(alpha.abs() <= config.alpha_limit + 1e-9);
            assert!(beta.abs() <= config.beta_limit + 1e-9);
            let rebuilt = v.norm() * thrust_direction(Vec3::new(alpha, beta, 0.0));
            assert!((rebuilt - v).norm() < 1e-9);
        }
    }

    #[test]
    fn motor_sets_identical_across_motors() {
        let config = hexa();
        let a = motor_force_polytope(&config, 0, (5, 5));
        let b = motor_force_polytope(&config, 5, (5, 5));
        for (va, vb) in a.vertices.iter().zip(&b.vertices) {
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn support_point_dominates_dense_sampling() {
        let config = hexa();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..25 {
            let d = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let (point, value) = motor_support_point(&config, &d);
            assert_relative_eq!(d.dot(&point), value, epsilon = 1e-12);

            let mut dense = 0.0_f64;
            for ia in 0..200 {
                let alpha = lerp(-config.alpha_limit, config.alpha_limit, ia, 200);
                for ib in 0..200 {
                    let beta = lerp(-config.beta_limit, config.beta_limit, ib, 200);
                    let f = config.max_thrust() * thrust_direction(Vec3::new(alpha, beta, 0.0));
                    dense = dense.max(d.dot(&f));
                }
            }
            dense = dense.max(0.0);
            assert!(value >= dense - 1e-12, "analytic support below a sampled point");
            assert!(value - dense <= 2e-4, "analytic support too far above dense grid");
        }
    }

    #[test]
    fn zero_torque_set_key_points() {
        let config = hexa();
        let s0 = feasible_force_set(&config, &Vec3::zeros(), &coarse_dirs(), COARSE_GRID).unwrap();

        let tol = 1e-6 * config.max_thrust();
        assert!(s0.contains3(&Vec3::zeros(), tol));
        assert!(s0.contains3(&Vec3::new(0.0, 0.0, -config.weight()), tol));
        assert_relative_eq!(config.weight(), 6.529536, epsilon = 1e-9);

        // all motors at full speed, zero tilt: torques cancel by symmetry
        let (z_min, z_max) = s0.z_range();
        assert_relative_eq!(z_min, -6.0 * config.max_thrust(), epsilon = 1e-6);
        assert_relative_eq!(z_min, -30.0036, epsilon = 1e-3);
        assert!(z_max.abs() < 1e-9);
    }

    #[test]
    fn attainable_set_contains_and_matches_zero_torque_set() {
        let config = hexa();
        let dirs = coarse_dirs();
        let s0 = feasible_force_set(&config, &Vec3::zeros(), &dirs, COARSE_GRID).unwrap();
        let afs = attainable_force_set(&config, &dirs, COARSE_GRID).unwrap();

        let f_max = config.max_thrust();
        for i in 0..dirs.len() {
            assert!(
                afs.b[i] >= s0.b[i] - 1e-9 * f_max,
                "relaxing the torque constraint must not shrink support"
            );
            // identical per-motor sets let the attainable-set optimum put the
            // same force on every motor, cancelling all torques; the two
            // supports therefore coincide for this symmetric layout
            let gap = (afs.b[i] - s0.b[i]).abs();
            assert!(
                gap <= 0.02 * afs.b[i].abs().max(1e-3),
                "direction {i}: supports differ by {gap:.3e} (afs {}, s0 {})",
                afs.b[i],
                s0.b[i]
            );
        }
    }

    #[test]
    fn random_admissible_states_stay_inside_attainable_set() {
        let config = hexa();
        let afs = attainable_force_set(&config, &coarse_dirs(), COARSE_GRID).unwrap();
        let tol = 1e-6 * config.max_thrust();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let mut act = ActuatorState::zeros(config.n());
            for i in 0..config.n() {
                act.tilt[i] = Vec3::new(
                    rng.gen_range(-config.alpha_limit..config.alpha_limit),
                    rng.gen_range(-config.beta_limit..config.beta_limit),
                    0.0,
                );
                act.omega[i] = rng.gen_range(0.0..config.omega_max);
            }
            let wrench = total_wrench(&config, &act);
            assert!(
                afs.contains3(&wrench.force, tol),
                "admissible force {} escaped the attainable set",
                wrench.force
            );
        }
    }

    #[test]
    fn attainable_set_has_the_tilt_box_mirror_symmetries() {
        // Every motor's force set is the same frame-fixed spherical rectangle,
        // which is invariant under x-flip (beta -> -beta) and y-flip
        // (alpha -> -alpha); the attainable set inherits both mirrors exactly.
        let config = hexa();
        let dirs = coarse_dirs();
        for mirror in [Vec3::new(-1.0, 1.0, 1.0), Vec3::new(1.0, -1.0, 1.0)] {
            let mirrored: Vec<Vec3> =
                dirs.iter().map(|d| d.component_mul(&mirror)).collect();
            let afs = attainable_force_set(&config, &dirs, COARSE_GRID).unwrap();
            let afs_m = attainable_force_set(&config, &mirrored, COARSE_GRID).unwrap();
            for i in 0..dirs.len() {
                assert!(
                    (afs.b[i] - afs_m.b[i]).abs() <= 1e-6 * (1.0 + afs.b[i].abs()),
                    "support changed under mirror {mirror:?}"
                );
            }
        }
    }

    #[test]
    fn more_directions_only_cut() {
        let config = hexa();
        let few = icosphere_directions(1);
        let mut more = few.clone();
        more.extend(support_directions(1));

        let small = feasible_force_set(&config, &Vec3::zeros(), &more, (5, 5)).unwrap();
        let large = feasible_force_set(
            &config,
            &Vec3::zeros(),
            &few.iter().cloned().chain(support_directions(0)).collect::<Vec<_>>(),
            (5, 5),
        )
        .unwrap();
        // shared leading directions keep identical support values
        for i in 0..few.len() {
            assert_relative_eq!(small.b[i], large.b[i], epsilon = 1e-9);
        }
        // and any point of the tighter set lies in the looser one
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let p = Vec3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-31.0..1.0),
            );
            if small.contains3(&p, 1e-9) {
                assert!(large.contains3(&p, 1e-9));
            }
        }
    }

    #[test]
    fn unattainable_torque_is_an_error() {
        let config = hexa();
        let result = feasible_force_set(
            &config,
            &Vec3::new(0.0, 0.0, 10.0),
            &coarse_dirs(),
            COARSE_GRID,
        );
        assert!(matches!(result, Err(ForceSetError::UnattainableTorque)));
    }

    #[test]
    fn single_motor_attainable_set_is_the_motor_set() {
        let config = MultirotorConfig {
            motors: vec![MotorGeometry { position: Vec3::zeros(), spin: 1.0, gamma: 0.0 }],
            ..hexa()
        };
        let dirs = coarse_dirs();
        let afs = attainable_force_set(&config, &dirs, COARSE_GRID).unwrap();
        for (row, d) in dirs.iter().enumerate() {
            let (_, support) = motor_support_point(&config, d);
            assert_relative_eq!(afs.b[row], support, epsilon = 1e-9);
        }
    }

    #[test]
    fn unit_cube_slices() {
        let mut a = DMatrix::zeros(6, 3);
        let mut b = DVector::zeros(6);
        for axis in 0..3 {
            a[(2 * axis, axis)] = 1.0;
            b[2 * axis] = 1.0;
            a[(2 * axis + 1, axis)] = -1.0;
            b[2 * axis + 1] = 1.0;
        }
        let cube = Polytope {
            a,
            b,
            dim: 3,
            interior: Some(DVector::zeros(3)),
            axis_range: vec![(-1.0, 1.0); 3],
        };

        let slice = cube.plane_slice(0.0).unwrap();
        assert!(slice.contains(0.99, 0.0, 0.0));
        assert!(slice.contains(0.0, -0.99, 0.0));
        assert!(!slice.contains(1.01, 0.0, 0.0));
        assert!(!slice.contains(0.0, 1.01, 0.0));
        assert!(cube.plane_slice(2.0).is_none());
        assert!(cube.plane_slice(-2.0).is_none());
    }

    #[test]
    fn hover_slice_contains_origin_and_is_symmetric() {
        let config = hexa();
        let s0 = feasible_force_set(&config, &Vec3::zeros(), &coarse_dirs(), COARSE_GRID).unwrap();
        let slice = s0.plane_slice(-config.weight()).unwrap();
        assert!(slice.contains(0.0, 0.0, 1e-9));
        // symmetric vehicle: equal headroom along +x and -x
        let mut pos = 0.0_f64;
        let mut neg = 0.0_f64;
        for step in 0..2000 {
            let x = step as f64 * 0.01;
            if slice.contains(x, 0.0, 1e-9) {
                pos = x;
            }
            if slice.contains(-x, 0.0, 1e-9) {
                neg = x;
            }
        }
        assert!(pos > 0.5, "hover slice should allow lateral force");
        assert_relative_eq!(pos, neg, epsilon = 0.02);
    }

    #[test]
    fn slice_membership_matches_3d_membership() {
        let config = hexa();
        let s0 = feasible_force_set(&config, &Vec3::zeros(), &coarse_dirs(), COARSE_GRID).unwrap();
        let z = -config.weight();
        let slice = s0.plane_slice(z).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut mismatches = 0;
        for _ in 0..10_000 {
            let x = rng.gen_range(-8.0..8.0);
            let y = rng.gen_range(-8.0..8.0);
            let in3d = s0.contains3(&Vec3::new(x, y, z), 1e-6);
            let in2d = slice.contains(x, y, 1e-6);
            if in3d != in2d {
                mismatches += 1;
            }
        }
        assert_eq!(mismatches, 0);
    }
}
