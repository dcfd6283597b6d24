//! Dense two-phase simplex for the small support LPs behind the force-set
//! construction (hundreds of variables, ~10 rows).
//!
//! Standard form: maximize `c^T x` subject to `A x = b`, `x >= 0`. Entering
//! column follows Bland's rule (lowest improving index); the leaving row uses
//! a lexicographic ratio test, which stays anti-cycling even when floating
//! point blurs the ratio ties these highly degenerate geometry problems
//! produce in abundance.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal { value: f64, x: DVector<f64> },
    Infeasible,
    Unbounded,
    /// Iteration safety net tripped; Bland's rule should make this
    /// unreachable, so callers treat it as a numerical failure.
    Stalled,
}

const PIVOT_TOL: f64 = 1e-9;

pub fn max_standard_form(
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    max_iter: usize,
) -> LpOutcome {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // tableau [A | I | b] with b >= 0; artificial columns n..n+m
    let mut t = DMatrix::zeros(m, n + m + 1);
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = flip * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = flip * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase 1: maximize -sum(artificials)
    let phase1_cost = |j: usize| if j >= n { -1.0 } else { 0.0 };
    match run_simplex(&mut t, &mut basis, &phase1_cost, n + m, max_iter) {
        SimplexEnd::Optimal(value) => {
            if value < -1e-7 {
                return LpOutcome::Infeasible;
            }
        }
        SimplexEnd::Unbounded => unreachable!("phase-1 objective is bounded above by 0"),
        SimplexEnd::Stalled => return LpOutcome::Stalled,
    }

    // drive leftover artificials out of the basis; rows that offer no pivot
    // are redundant constraints and are dropped
    let mut drop_rows: Vec<usize> = Vec::new();
    for i in 0..m {
        if basis[i] < n {
            continue;
        }
        let mut pivot_col = None;
        for j in 0..n {
            if t[(i, j)].abs() > PIVOT_TOL {
                pivot_col = Some(j);
                break;
            }
        }
        match pivot_col {
            Some(j) => {
                pivot(&mut t, &mut basis, i, j);
            }
            None => drop_rows.push(i),
        }
    }
    if !drop_rows.is_empty() {
        let keep: Vec<usize> = (0..m).filter(|i| !drop_rows.contains(i)).collect();
        let mut t2 = DMatrix::zeros(keep.len(), n + m + 1);
        let mut basis2 = Vec::with_capacity(keep.len());
        for (new_i, &old_i) in keep.iter().enumerate() {
            t2.row_mut(new_i).copy_from(&t.row(old_i));
            basis2.push(basis[old_i]);
        }
        t = t2;
        basis = basis2;
    }

    // phase 2: real objective, artificial columns barred from entering
    let phase2_cost = |j: usize| if j < n { c[j] } else { 0.0 };
    match run_simplex(&mut t, &mut basis, &phase2_cost, n, max_iter) {
        SimplexEnd::Optimal(value) => {
            let mut x = DVector::zeros(n);
            let last = t.ncols() - 1;
            for (i, &bj) in basis.iter().enumerate() {
                if bj < n {
                    x[bj] = t[(i, last)];
                }
            }
            LpOutcome::Optimal { value, x }
        }
        SimplexEnd::Unbounded => LpOutcome::Unbounded,
        SimplexEnd::Stalled => LpOutcome::Stalled,
    }
}

enum SimplexEnd {
    Optimal(f64),
    Unbounded,
    Stalled,
}

/// Entering = lowest-index improving column among the first `enterable`
/// columns (Bland); leaving = lexicographically minimal ratio row, comparing
/// the rhs first and then every tableau column scaled by the pivot element.
/// Distinct rows can never compare equal (each holds a distinct unit basic
/// column), so the selection is a strict total order and cannot cycle.
fn run_simplex(
    t: &mut DMatrix<f64>,
    basis: &mut Vec<usize>,
    cost: &dyn Fn(usize) -> f64,
    enterable: usize,
    max_iter: usize,
) -> SimplexEnd {
    let m = t.nrows();
    let last = t.ncols() - 1;

    for _ in 0..max_iter {
        // reduced costs z_j - c_j from scratch each pass: O(m * n), cheap at
        // this scale and immune to drift
        let mut entering = None;
        for j in 0..enterable {
            if basis.contains(&j) {
                continue;
            }
            let mut zj = 0.0;
            for i in 0..m {
                zj += cost(basis[i]) * t[(i, j)];
            }
            if zj - cost(j) < -PIVOT_TOL {
                entering = Some(j);
                break;
            }
        }
        let Some(col) = entering else {
            let mut value = 0.0;
            for i in 0..m {
                value += cost(basis[i]) * t[(i, last)];
            }
            return SimplexEnd::Optimal(value);
        };

        let mut leave: Option<usize> = None;
        for i in 0..m {
            if t[(i, col)] > PIVOT_TOL {
                leave = match leave {
                    None => Some(i),
                    Some(best) => {
                        if lex_less(t, i, best, col, last) {
                            Some(i)
                        } else {
                            Some(best)
                        }
                    }
                };
            }
        }
        let Some(row) = leave else {
            return SimplexEnd::Unbounded;
        };
        pivot(t, basis, row, col);
    }
    SimplexEnd::Stalled
}

/// `true` when row `i` scaled by its pivot entry is lexicographically smaller
/// than row `best` scaled by its pivot entry, scanning the rhs column first.
fn lex_less(t: &DMatrix<f64>, i: usize, best: usize, col: usize, last: usize) -> bool {
    let pi = t[(i, col)];
    let pb = t[(best, col)];
    let scan = std::iter::once(last).chain(0..last);
    for j in scan {
        let a = t[(i, j)] / pi;
        let b = t[(best, j)] / pb;
        let scale = 1.0 + a.abs().max(b.abs());
        if (a - b).abs() > 1e-11 * scale {
            return a < b;
        }
    }
    false
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], row: usize, col: usize) {
    let p = t[(row, col)];
    let ncols = t.ncols();
    for j in 0..ncols {
        t[(row, j)] /= p;
    }
    for i in 0..t.nrows() {
        if i == row {
            continue;
        }
        let factor = t[(i, col)];
        if factor != 0.0 {
            for j in 0..ncols {
                let v = t[(row, j)];
                t[(i, j)] -= factor * v;
            }
        }
    }
    basis[row] = col;
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// `max 3x + 2y, x + y <= 4, x + 3y <= 6` with explicit slacks.
    #[test]
    fn small_inequality_problem() {
        let c = dv(&[3.0, 2.0, 0.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 0.0, 1.0, 3.0, 0.0, 1.0]);
        let b = dv(&[4.0, 6.0]);
        match max_standard_form(&c, &a, &b, 1000) {
            LpOutcome::Optimal { value, x } => {
                assert_relative_eq!(value, 12.0, epsilon = 1e-9);
                assert_relative_eq!(x[0], 4.0, epsilon = 1e-9);
                assert_relative_eq!(x[1], 0.0, epsilon = 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn detects_infeasible() {
        // x1 = -1 contradicts x1 >= 0
        let c = dv(&[1.0]);
        let a = DMatrix::from_row_slice(1, 1, &[1.0]);
        let b = dv(&[-1.0]);
        assert!(matches!(max_standard_form(&c, &a, &b, 1000), LpOutcome::Infeasible));
    }

    #[test]
    fn detects_unbounded() {
        // max x1 with only x2 = 1
        let c = dv(&[1.0, 0.0]);
        let a = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let b = dv(&[1.0]);
        assert!(matches!(max_standard_form(&c, &a, &b, 1000), LpOutcome::Unbounded));
    }

    /// Beale's classic cycling example; Bland's rule must terminate at the
    /// known optimum 0.05.
    #[test]
    fn beale_cycling_example() {
        let c = dv(&[0.75, -150.0, 0.02, -6.0, 0.0, 0.0, 0.0]);
        let a = DMatrix::from_row_slice(
            3,
            7,
            &[
                0.25, -60.0, -0.04, 9.0, 1.0, 0.0, 0.0, //
                0.5, -90.0, -0.02, 3.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0,
            ],
        );
        let b = dv(&[0.0, 0.0, 1.0]);
        match max_standard_form(&c, &a, &b, 10000) {
            LpOutcome::Optimal { value, x } => {
                assert_relative_eq!(value, 0.05, epsilon = 1e-9);
                assert_relative_eq!(x[2], 1.0, epsilon = 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn redundant_rows_are_dropped() {
        // the same constraint twice must not confuse phase 2
        let c = dv(&[1.0, 1.0]);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = dv(&[1.0, 1.0]);
        match max_standard_form(&c, &a, &b, 1000) {
            LpOutcome::Optimal { value, .. } => assert_relative_eq!(value, 1.0, epsilon = 1e-9),
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn equality_with_negative_rhs() {
        // x1 - x2 = -2, max -x1 - x2 -> x = (0, 2)
        let c = dv(&[-1.0, -1.0]);
        let a = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let b = dv(&[-2.0]);
        match max_standard_form(&c, &a, &b, 1000) {
            LpOutcome::Optimal { value, x } => {
                assert_relative_eq!(value, -2.0, epsilon = 1e-9);
                assert_relative_eq!(x[1], 2.0, epsilon = 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // three planes through one vertex; Dantzig cycles are possible here
        let c = dv(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        let a = DMatrix::from_row_slice(
            3,
            5,
            &[
                1.0, 0.0, 1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 1.0, 0.0, //
                1.0, 1.0, 0.0, 0.0, 1.0,
            ],
        );
        let b = dv(&[1.0, 1.0, 1.0]);
        match max_standard_form(&c, &a, &b, 1000) {
            LpOutcome::Optimal { value, .. } => assert_relative_eq!(value, 1.0, epsilon = 1e-9),
            other => panic!("expected optimal, got {other:?}"),
        }
    }
}
