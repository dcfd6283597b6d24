//! Geometry export: vertex enumeration of halfspace polytopes, Wavefront OBJ
//! meshes (one face per supporting plane), and slice polygons as CSV — the
//! raw material for external force-set plots.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};

use crate::force_sets::{PlaneSlice, Polytope};
use crate::model::Vec3;

/// All vertices of a bounded 3-D polytope by exhaustive plane-triple
/// intersection. Quadratic-ish in the plane count; meant for export and
/// tests, not the control path.
pub fn polytope_vertices(p: &Polytope) -> Vec<Vec3> {
    assert_eq!(p.dim, 3);
    let planes = unique_planes(&p.a, &p.b);
    let scale = 1.0 + p.b.amax();
    let tol = 1e-7 * scale;

    let mut vertices: Vec<Vec3> = Vec::new();
    for i in 0..planes.len() {
        for j in (i + 1)..planes.len() {
            for k in (j + 1)..planes.len() {
                let m = Matrix3::from_rows(&[
                    planes[i].0.transpose(),
                    planes[j].0.transpose(),
                    planes[k].0.transpose(),
                ]);
                let rhs = Vec3::new(planes[i].1, planes[j].1, planes[k].1);
                let Some(point) = m.lu().solve(&rhs) else { continue };
                if !point.iter().all(|v| v.is_finite()) {
                    continue;
                }
                let feasible = planes
                    .iter()
                    .all(|(normal, b)| normal.dot(&point) <= b + tol);
                if feasible && vertices.iter().all(|v| (v - point).norm() > 10.0 * tol) {
                    vertices.push(point);
                }
            }
        }
    }
    vertices
}

/// Rows merged by identical (normal, offset) within tolerance.
fn unique_planes(a: &DMatrix<f64>, b: &DVector<f64>) -> Vec<(Vec3, f64)> {
    let mut planes: Vec<(Vec3, f64)> = Vec::new();
    for row in 0..a.nrows() {
        let normal = Vec3::new(a[(row, 0)], a[(row, 1)], a[(row, 2)]);
        let offset = b[row];
        let dup = planes
            .iter()
            .any(|(n, o)| (n - normal).norm() < 1e-9 && (o - offset).abs() < 1e-9);
        if !dup {
            planes.push((normal, offset));
        }
    }
    planes
}

/// Wavefront OBJ text: one polygon face per supporting plane with at least
/// three incident vertices, wound counter-clockwise seen from outside.
pub fn polytope_to_obj(p: &Polytope) -> String {
    let vertices = polytope_vertices(p);
    let planes = unique_planes(&p.a, &p.b);
    let scale = 1.0 + p.b.amax();
    let tol = 1e-6 * scale;

    let mut out = String::new();
    out.push_str("# force-set polytope\n");
    for v in &vertices {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }

    for (normal, offset) in &planes {
        let incident: Vec<usize> = (0..vertices.len())
            .filter(|&i| (normal.dot(&vertices[i]) - offset).abs() <= tol)
            .collect();
        if incident.len() < 3 {
            continue;
        }
        // order around the face centroid in an in-plane basis
        let centroid: Vec3 =
            incident.iter().map(|&i| vertices[i]).sum::<Vec3>() / incident.len() as f64;
        let u = pick_orthogonal(normal);
        let w = normal.cross(&u);
        let mut ordered = incident.clone();
        ordered.sort_by(|&i, &j| {
            let ai = angle_in_plane(&(vertices[i] - centroid), &u, &w);
            let aj = angle_in_plane(&(vertices[j] - centroid), &u, &w);
            ai.partial_cmp(&aj).unwrap()
        });
        // counter-clockwise from outside means the winding normal matches
        // the outward plane normal
        if ordered.len() >= 3 {
            let e1 = vertices[ordered[1]] - vertices[ordered[0]];
            let e2 = vertices[ordered[2]] - vertices[ordered[1]];
            if e1.cross(&e2).dot(normal) < 0.0 {
                ordered.reverse();
            }
        }
        out.push_str("f");
        for i in &ordered {
            out.push_str(&format!(" {}", i + 1));
        }
        out.push('\n');
    }
    out
}

fn pick_orthogonal(n: &Vec3) -> Vec3 {
    let trial = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    (trial - n * n.dot(&trial)).normalize()
}

fn angle_in_plane(v: &Vec3, u: &Vec3, w: &Vec3) -> f64 {
    v.dot(w).atan2(v.dot(u))
}

/// Corner points of a bounded 2-D halfspace set, ordered counter-clockwise.
pub fn slice_polygon(s: &PlaneSlice) -> Vec<(f64, f64)> {
    let rows = s.a.nrows();
    let scale = 1.0 + s.b.amax();
    let tol = 1e-7 * scale;

    let mut corners: Vec<Vector2<f64>> = Vec::new();
    for i in 0..rows {
        for j in (i + 1)..rows {
            let m = Matrix2::new(s.a[(i, 0)], s.a[(i, 1)], s.a[(j, 0)], s.a[(j, 1)]);
            let rhs = Vector2::new(s.b[i], s.b[j]);
            let Some(point) = m.lu().solve(&rhs) else { continue };
            if !point.iter().all(|v| v.is_finite()) {
                continue;
            }
            let feasible = (0..rows)
                .all(|k| s.a[(k, 0)] * point.x + s.a[(k, 1)] * point.y <= s.b[k] + tol);
            if feasible && corners.iter().all(|c| (c - point).norm() > 10.0 * tol) {
                corners.push(point);
            }
        }
    }

    let n = corners.len() as f64;
    if corners.is_empty() {
        return vec![];
    }
    let cx = corners.iter().map(|c| c.x).sum::<f64>() / n;
    let cy = corners.iter().map(|c| c.y).sum::<f64>() / n;
    corners.sort_by(|p, q| {
        let ap = (p.y - cy).atan2(p.x - cx);
        let aq = (q.y - cy).atan2(q.x - cx);
        ap.partial_cmp(&aq).unwrap()
    });
    corners.iter().map(|c| (c.x, c.y)).collect()
}

/// CSV text of a slice polygon: header plus one `fx,fy` row per corner.
pub fn slice_to_csv(s: &PlaneSlice) -> String {
    let mut out = String::from("fx,fy\n");
    for (x, y) in slice_polygon(s) {
        out.push_str(&format!("{x},{y}\n"));
    }
    out
}
