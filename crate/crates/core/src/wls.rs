//! Weighted least-squares allocation solver.
//!
//! Minimizes `||A x - b||^2` subject to box bounds and linear inequalities
//! `C x <= d` with a primal active-set method. Each working-set subproblem is
//! an equality-constrained least-squares solve, factored by QR on the reduced
//! (free-variable, null-space) system; QR keeps the solve stable when rows of
//! `A` carry weights that differ by a few orders of magnitude, as the
//! allocation weighting deliberately does.
//!
//! Priorities are encoded by row scaling: multiplying a row block of `(A, b)`
//! by `sqrt(gamma)` weights that block's squared residual by `gamma`, so a
//! single solver covers every weighted stage of the control allocation.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WlsError {
    #[error("bound contradiction at index {0}: lower > upper")]
    BoundContradiction(usize),
    #[error("no point satisfies the bounds and inequalities (restore residual {0:.3e})")]
    Infeasible(f64),
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("problem data contains a non-finite value ({0})")]
    NonFinite(&'static str),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("problem too large for exhaustive enumeration (n <= 8 and p + 2n <= 20 required)")]
    TooLarge,
    #[error("enumeration found no KKT point; problem is likely infeasible")]
    NoKktPoint,
}

/// `min ||A x - b||^2` s.t. `lower <= x <= upper`, `C x <= d`.
///
/// `A` must have full column rank (callers guarantee it with positive
/// definite regularization rows). Infinite bounds are expressed with
/// `f64::INFINITY` sentinels. `x0`, when given, is clamped to the bounds and
/// projected onto the inequalities before iteration; equal lower and upper
/// bounds pin a variable for the whole solve.
#[derive(Debug, Clone)]
pub struct WlsProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub x0: Option<DVector<f64>>,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterReached,
}

/// A constraint held active at the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveConstraint {
    Lower(usize),
    Upper(usize),
    Inequality(usize),
}

#[derive(Debug, Clone)]
pub struct WlsSolution {
    pub x: DVector<f64>,
    pub status: SolveStatus,
    pub active: Vec<ActiveConstraint>,
    pub iterations: usize,
    pub residual: f64,
}

impl WlsProblem {
    /// Unbounded, unconstrained problem; callers tighten what they need.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let n = a.ncols();
        Self {
            a,
            b,
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
            c: DMatrix::zeros(0, n),
            d: DVector::zeros(0),
            x0: None,
            max_iter: 100,
        }
    }

    fn check_shapes(&self) -> Result<(), WlsError> {
        let n = self.a.ncols();
        if self.b.len() != self.a.nrows() {
            return Err(WlsError::Shape(format!(
                "b has {} rows, A has {}",
                self.b.len(),
                self.a.nrows()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(WlsError::Shape("bound length must equal column count".into()));
        }
        if self.c.ncols() != n || self.d.len() != self.c.nrows() {
            return Err(WlsError::Shape("inequality shapes must match column count".into()));
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<WlsSolution, WlsError> {
        self.check_shapes()?;
        let n = self.a.ncols();
        let p = self.c.nrows();

        // Reject garbage input up front: a NaN anywhere would otherwise
        // poison every comparison in the active-set loop. Bounds may be
        // infinite, but never NaN.
        if self.a.iter().any(|v| !v.is_finite()) || self.b.iter().any(|v| !v.is_finite()) {
            return Err(WlsError::NonFinite("objective"));
        }
        if self.c.iter().any(|v| !v.is_finite()) || self.d.iter().any(|v| !v.is_finite()) {
            return Err(WlsError::NonFinite("inequalities"));
        }
        if self.lower.iter().any(|v| v.is_nan()) || self.upper.iter().any(|v| v.is_nan()) {
            return Err(WlsError::NonFinite("bounds"));
        }
        if let Some(x0) = &self.x0 {
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(WlsError::NonFinite("warm start"));
            }
        }

        for i in 0..n {
            if self.lower[i] > self.upper[i] {
                return Err(WlsError::BoundContradiction(i));
            }
        }

        let mut x = match &self.x0 {
            Some(x0) => {
                if x0.len() != n {
                    return Err(WlsError::Shape("x0 length must equal column count".into()));
                }
                x0.clone()
            }
            None => DVector::zeros(n),
        };
        clamp_to_bounds(&mut x, &self.lower, &self.upper);
        if p > 0 {
            self.restore_feasibility(&mut x)?;
        }

        let pinned: Vec<bool> = (0..n).map(|i| self.lower[i] == self.upper[i]).collect();

        // working set in activation order; pinned variables are handled
        // implicitly and never appear here
        let mut working: Vec<ActiveConstraint> = Vec::new();
        for i in 0..n {
            if pinned[i] {
                continue;
            }
            if x[i] <= self.lower[i] {
                working.push(ActiveConstraint::Lower(i));
            } else if x[i] >= self.upper[i] {
                working.push(ActiveConstraint::Upper(i));
            }
        }

        let mut iterations = 0usize;
        let mut status = SolveStatus::MaxIterReached;
        let mut prev_obj = (&self.a * &x - &self.b).norm_squared();

        let tracing = std::env::var_os("WLS_TRACE").is_some();
        let mut trace: Vec<String> = Vec::new();

        while iterations < self.max_iter {
            iterations += 1;

            let free = self.free_variables(&pinned, &working);
            let step = self.constrained_step(&x, &free, &working);

            let step_scale = 1.0 + x.amax();
            if step.amax() <= 1e-11 * step_scale {
                // stationary on the working set; check multipliers (pinned
                // variables are implicit equalities and absorb their own
                // gradient component)
                let ls_residual = &self.a * &x - &self.b;
                // Convergence is enforced in x (step below 1e-11 * scale), so
                // the gradient at the stop point legitimately carries up to
                // 2 ||A^T A|| * step_tol of residue, plus the backward-stable
                // rounding of the products themselves. Both scale with the
                // problem's magnitudes, not with grad.
                let a_max = self.a.amax();
                let b_max = if self.b.is_empty() { 0.0 } else { self.b.amax() };
                let noise = ((self.a.nrows() * self.a.ncols()).max(1) as f64)
                    * 1e-15
                    * (1.0 + a_max * (a_max * (1.0 + x.amax()) + b_max));
                let gap_floor =
                    2.0 * self.a.norm_squared() * 1e-11 * step_scale + 100.0 * noise;
                let mut grad = 2.0 * self.a.transpose() * ls_residual;
                for i in 0..n {
                    if pinned[i] {
                        grad[i] = 0.0;
                    }
                }
                match self.most_negative_multiplier(&grad, &working, gap_floor) {
                    None => {
                        status = SolveStatus::Optimal;
                        debug_assert!(
                            self.kkt_satisfied(&x, &grad, &working, gap_floor),
                            "kkt gap at declared optimum: grad.amax {:.3e}, floor {:.3e}, working {:?}",
                            grad.amax(),
                            gap_floor,
                            working
                        );
                        break;
                    }
                    Some(worst) => {
                        if tracing {
                            trace.push(format!(
                                "it {iterations}: stationary, drop {:?} (grad.amax {:.3e}, floor {:.3e})",
                                working[worst],
                                grad.amax(),
                                gap_floor
                            ));
                        }
                        working.remove(worst);
                    }
                }
            } else {
                let (alpha, blocker) = self.ratio_test(&x, &step, &pinned, &working);
                x += alpha * &step;
                match blocker {
                    Some(ActiveConstraint::Lower(i)) => {
                        x[i] = self.lower[i];
                        working.push(ActiveConstraint::Lower(i));
                    }
                    Some(ActiveConstraint::Upper(i)) => {
                        x[i] = self.upper[i];
                        working.push(ActiveConstraint::Upper(i));
                    }
                    Some(ActiveConstraint::Inequality(j)) => {
                        working.push(ActiveConstraint::Inequality(j));
                    }
                    None => {}
                }
                let obj = (&self.a * &x - &self.b).norm_squared();
                if tracing {
                    trace.push(format!(
                        "it {iterations}: step {:.3e}, alpha {:.3e}, add {:?}, obj {:.12e}",
                        step.amax(),
                        alpha,
                        blocker,
                        obj
                    ));
                }
                debug_assert!(
                    obj <= prev_obj + 1e-9 * (1.0 + prev_obj),
                    "objective increased: {prev_obj} -> {obj}"
                );
                debug_assert!(self.feasible(&x, 1e-9));
                prev_obj = obj;
            }
        }

        if tracing && status == SolveStatus::MaxIterReached {
            eprintln!(
                "WLS max_iter: {} rows x {} cols, {} gen rows, working {:?}",
                self.a.nrows(),
                self.a.ncols(),
                p,
                working
            );
            for line in &trace {
                eprintln!("  {line}");
            }
        }

        let residual = (&self.a * &x - &self.b).norm();
        Ok(WlsSolution { x, status, active: working, iterations, residual })
    }

    fn free_variables(&self, pinned: &[bool], working: &[ActiveConstraint]) -> Vec<usize> {
        let n = self.a.ncols();
        let mut bound_active = vec![false; n];
        for w in working {
            match *w {
                ActiveConstraint::Lower(i) | ActiveConstraint::Upper(i) => bound_active[i] = true,
                ActiveConstraint::Inequality(_) => {}
            }
        }
        (0..n).filter(|&i| !pinned[i] && !bound_active[i]).collect()
    }

    /// Least-squares step restricted to free variables and the null space of
    /// the active inequality rows.
    fn constrained_step(
        &self,
        x: &DVector<f64>,
        free: &[usize],
        working: &[ActiveConstraint],
    ) -> DVector<f64> {
        let n = self.a.ncols();
        let nf = free.len();
        let mut step = DVector::zeros(n);
        if nf == 0 {
            return step;
        }

        let residual = &self.b - &self.a * x;
        let a_free = self.a.select_columns(free.iter());

        let gen_rows: Vec<DVector<f64>> = working
            .iter()
            .filter_map(|w| match *w {
                ActiveConstraint::Inequality(j) => {
                    Some(DVector::from_iterator(nf, free.iter().map(|&i| self.c[(j, i)])))
                }
                _ => None,
            })
            .collect();

        let q_free = if gen_rows.is_empty() {
            lstsq(&a_free, &residual)
        } else {
            let basis = orthonormalize_rows(&gen_rows);
            let z = complement_basis(&basis, nf);
            if z.ncols() == 0 {
                return step;
            }
            let reduced = &a_free * &z;
            let y = lstsq(&reduced, &residual);
            z * y
        };

        for (k, &i) in free.iter().enumerate() {
            step[i] = q_free[k];
        }
        step
    }

    /// Largest feasible fraction of the step and the first constraint that
    /// blocks it. Candidates are scanned lower/upper bound per variable in
    /// index order, then inequality rows in index order, so exact ties
    /// activate the lowest-indexed constraint.
    fn ratio_test(
        &self,
        x: &DVector<f64>,
        step: &DVector<f64>,
        pinned: &[bool],
        working: &[ActiveConstraint],
    ) -> (f64, Option<ActiveConstraint>) {
        let n = self.a.ncols();
        let mut alpha = 1.0_f64;
        let mut blocker = None;
        let dir_tol = 1e-13 * (1.0 + step.amax());

        for i in 0..n {
            if pinned[i] {
                continue;
            }
            if step[i] < -dir_tol && self.lower[i].is_finite() {
                let a_i = ((self.lower[i] - x[i]) / step[i]).max(0.0);
                if a_i < alpha {
                    alpha = a_i;
                    blocker = Some(ActiveConstraint::Lower(i));
                }
            }
            if step[i] > dir_tol && self.upper[i].is_finite() {
                let a_i = ((self.upper[i] - x[i]) / step[i]).max(0.0);
                if a_i < alpha {
                    alpha = a_i;
                    blocker = Some(ActiveConstraint::Upper(i));
                }
            }
        }

        let mut gen_active = vec![false; self.c.nrows()];
        for w in working {
            if let ActiveConstraint::Inequality(j) = *w {
                gen_active[j] = true;
            }
        }
        for j in 0..self.c.nrows() {
            if gen_active[j] {
                continue;
            }
            let row = self.c.row(j);
            let along = row.transpose().dot(step);
            if along > dir_tol {
                let slack = (self.d[j] - row.transpose().dot(x)).max(0.0);
                let a_j = slack / along;
                if a_j < alpha {
                    alpha = a_j;
                    blocker = Some(ActiveConstraint::Inequality(j));
                }
            }
        }

        (alpha, blocker)
    }

    /// Constraint normals as columns, with rows on pinned coordinates zeroed:
    /// pinned variables carry their own implicit equality multipliers, so
    /// their components must not influence the fit for the working set.
    fn working_normals(&self, working: &[ActiveConstraint]) -> DMatrix<f64> {
        let n = self.a.ncols();
        DMatrix::from_fn(n, working.len(), |r, k| {
            if self.lower[r] == self.upper[r] {
                return 0.0;
            }
            match working[k] {
                ActiveConstraint::Lower(i) => {
                    if r == i {
                        -1.0
                    } else {
                        0.0
                    }
                }
                ActiveConstraint::Upper(i) => {
                    if r == i {
                        1.0
                    } else {
                        0.0
                    }
                }
                ActiveConstraint::Inequality(j) => self.c[(j, r)],
            }
        })
    }

    /// Index into `working` of the most negative Lagrange multiplier, or
    /// `None` when every multiplier is non-negative (KKT satisfied). Ties
    /// resolve to the earliest working-set entry.
    fn most_negative_multiplier(
        &self,
        grad: &DVector<f64>,
        working: &[ActiveConstraint],
        gap_floor: f64,
    ) -> Option<usize> {
        if working.is_empty() {
            return None;
        }
        let normals = self.working_normals(working);
        let mu = lstsq(&normals, &(-grad));
        let tol = -(1e-9 * (1.0 + grad.amax()) + gap_floor);
        let mut worst: Option<(usize, f64)> = None;
        for (k, &m) in mu.iter().enumerate() {
            if m < tol && worst.map_or(true, |(_, w)| m < w) {
                worst = Some((k, m));
            }
        }
        worst.map(|(k, _)| k)
    }

    fn kkt_satisfied(
        &self,
        _x: &DVector<f64>,
        grad: &DVector<f64>,
        working: &[ActiveConstraint],
        gap_floor: f64,
    ) -> bool {
        let n = self.a.ncols();
        let mut residual = grad.clone();
        if !working.is_empty() {
            let normals = self.working_normals(working);
            let mu = lstsq(&normals, &(-grad));
            residual += normals * mu;
        }
        // pinned variables absorb any gradient component
        for i in 0..n {
            if self.lower[i] == self.upper[i] {
                residual[i] = 0.0;
            }
        }
        residual.amax() <= 1e-8 * (1.0 + grad.amax()) + gap_floor
    }

    fn feasible(&self, x: &DVector<f64>, tol: f64) -> bool {
        for i in 0..x.len() {
            let scale = 1.0 + x[i].abs();
            if x[i] < self.lower[i] - tol * scale || x[i] > self.upper[i] + tol * scale {
                return false;
            }
        }
        if self.c.nrows() > 0 {
            let slack = &self.d - &self.c * x;
            let scale = 1.0 + x.amax();
            if slack.min() < -tol * scale * 10.0 {
                return false;
            }
        }
        true
    }

    /// Cyclic projection onto the most violated halfspace, re-clamping the
    /// bounds after each move. Converges for any consistent constraint set;
    /// controller call sites only ever start mildly infeasible.
    fn restore_feasibility(&self, x: &mut DVector<f64>) -> Result<(), WlsError> {
        let feas_tol = 1e-12 * (1.0 + self.d.amax());
        for _ in 0..2000 {
            let slack = &self.d - &self.c * &*x;
            let (mut j_worst, mut worst) = (0usize, f64::INFINITY);
            for j in 0..slack.len() {
                if slack[j] < worst {
                    worst = slack[j];
                    j_worst = j;
                }
            }
            if worst >= -feas_tol {
                return Ok(());
            }
            let row = self.c.row(j_worst).transpose();
            let nrm2 = row.norm_squared();
            if nrm2 < 1e-30 {
                return Err(WlsError::Infeasible(-worst));
            }
            // worst < 0 here: step against the row gradient back to the
            // feasible side of the hyperplane, with a hair of margin
            *x -= row * ((-worst) / nrm2) * (1.0 + 1e-14);
            clamp_to_bounds(x, &self.lower, &self.upper);
        }
        let final_violation = -(&self.d - &self.c * &*x).min();
        if final_violation > 1e-7 * (1.0 + self.d.amax()) {
            Err(WlsError::Infeasible(final_violation))
        } else {
            Ok(())
        }
    }
}

fn clamp_to_bounds(x: &mut DVector<f64>, lower: &DVector<f64>, upper: &DVector<f64>) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

/// Least-squares solve via QR with an SVD fallback for rank-deficient input.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    if n == 0 {
        return DVector::zeros(0);
    }
    let qr = a.clone().qr();
    let rhs = qr.q().transpose() * b;
    match qr.r().solve_upper_triangular(&rhs) {
        Some(x) => x,
        None => a
            .clone()
            .svd(true, true)
            .solve(b, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(n)),
    }
}

/// Orthonormal basis of the span of `rows`, dropping dependent rows.
fn orthonormalize_rows(rows: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for row in rows {
        let mut v = row.clone();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dot(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-12 * (1.0 + row.norm()) {
            basis.push(v / norm);
        }
    }
    basis
}

/// Orthonormal basis of the subspace orthogonal to `basis` in R^dim,
/// assembled column-wise.
fn complement_basis(basis: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for i in 0..dim {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        for _ in 0..2 {
            for b in basis {
                let proj = b.dot(&v);
                v -= b * proj;
            }
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-10 {
            cols.push(v / norm);
        }
        if cols.len() + basis.len() == dim {
            break;
        }
    }
    if cols.is_empty() {
        return DMatrix::zeros(dim, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Exhaustive reference solver: enumerates every independent subset of
/// constraints as equalities, solves the equality-constrained least squares
/// through its KKT system, and keeps the best feasible candidate whose
/// multipliers have valid signs. Exponential in the constraint count, so it
/// guards `n <= 8` and `p + 2n <= 20`; intended purely as a test oracle.
pub fn brute_force_oracle(problem: &WlsProblem) -> Result<DVector<f64>, OracleError> {
    let n = problem.a.ncols();
    let p = problem.c.nrows();
    if n > 8 || p + 2 * n > 20 {
        return Err(OracleError::TooLarge);
    }

    #[derive(Clone, Copy)]
    enum Cand {
        Lo(usize),
        Up(usize),
        Gen(usize),
    }

    let mut pinned: Vec<usize> = Vec::new();
    let mut cands: Vec<Cand> = Vec::new();
    for i in 0..n {
        if problem.lower[i] == problem.upper[i] {
            pinned.push(i);
        } else {
            if problem.lower[i].is_finite() {
                cands.push(Cand::Lo(i));
            }
            if problem.upper[i].is_finite() {
                cands.push(Cand::Up(i));
            }
        }
    }
    for j in 0..p {
        cands.push(Cand::Gen(j));
    }

    let normal_rhs = |c: &Cand| -> (DVector<f64>, f64) {
        match *c {
            Cand::Lo(i) => {
                let mut v = DVector::zeros(n);
                v[i] = -1.0;
                (v, -problem.lower[i])
            }
            Cand::Up(i) => {
                let mut v = DVector::zeros(n);
                v[i] = 1.0;
                (v, problem.upper[i])
            }
            Cand::Gen(j) => (problem.c.row(j).transpose(), problem.d[j]),
        }
    };

    let ata2 = 2.0 * problem.a.transpose() * &problem.a;
    let atb2 = 2.0 * problem.a.transpose() * &problem.b;
    let max_k = n - pinned.len();
    let mut best: Option<(f64, DVector<f64>)> = None;

    let mut subset: Vec<usize> = Vec::new();
    enumerate_subsets(cands.len(), max_k, &mut subset, &mut |subset| {
        // a lower and an upper bound of the same variable cannot both be active
        let mut seen = vec![0u8; n];
        for &s in subset {
            match cands[s] {
                Cand::Lo(i) | Cand::Up(i) => {
                    seen[i] += 1;
                    if seen[i] > 1 {
                        return;
                    }
                }
                Cand::Gen(_) => {}
            }
        }

        let neq = pinned.len() + subset.len();
        let dim = n + neq;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&ata2);
        rhs.rows_mut(0, n).copy_from(&atb2);
        for (row, &i) in pinned.iter().enumerate() {
            kkt[(n + row, i)] = 1.0;
            kkt[(i, n + row)] = 1.0;
            rhs[n + row] = problem.lower[i];
        }
        for (k, &s) in subset.iter().enumerate() {
            let (nv, r) = normal_rhs(&cands[s]);
            let row = n + pinned.len() + k;
            for col in 0..n {
                kkt[(row, col)] = nv[col];
                kkt[(col, row)] = nv[col];
            }
            rhs[row] = r;
        }

        let sol = match kkt.clone().lu().solve(&rhs) {
            Some(s) => s,
            None => return,
        };
        // reject garbage from a near-singular system
        if (&kkt * &sol - &rhs).amax() > 1e-6 * (1.0 + rhs.amax()) {
            return;
        }

        let x = DVector::from_iterator(n, sol.iter().take(n).cloned());
        let ftol = 1e-8 * (1.0 + x.amax());
        for i in 0..n {
            if x[i] < problem.lower[i] - ftol || x[i] > problem.upper[i] + ftol {
                return;
            }
        }
        for j in 0..p {
            if problem.c.row(j).transpose().dot(&x) > problem.d[j] + ftol {
                return;
            }
        }
        // multipliers of the subset constraints must be non-negative
        for k in 0..subset.len() {
            if sol[n + pinned.len() + k] < -1e-8 * (1.0 + sol.amax()) {
                return;
            }
        }

        let obj = (&problem.a * &x - &problem.b).norm_squared();
        if best.as_ref().map_or(true, |(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    });

    best.map(|(_, x)| x).ok_or(OracleError::NoKktPoint)
}

/// Calls `visit` on every subset of `{0..count}` with at most `max_k`
/// elements, in lexicographic order.
fn enumerate_subsets(
    count: usize,
    max_k: usize,
    subset: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    fn recurse(
        start: usize,
        count: usize,
        max_k: usize,
        subset: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        visit(subset);
        if subset.len() == max_k {
            return;
        }
        for next in start..count {
            subset.push(next);
            recurse(next + 1, count, max_k, subset, visit);
            subset.pop();
        }
    }
    recurse(0, count, max_k, subset, visit);
}
