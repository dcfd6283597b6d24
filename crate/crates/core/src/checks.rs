//! Self-check suites shared by the test harness and the `selftest` CLI
//! command: randomized problem generators, finite-difference oracles, and
//! the pass/fail reports they produce.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::wls::{brute_force_oracle, SolveStatus, WlsProblem};

/// Random `m x n` matrix with smallest singular value bounded away from
/// zero, paired with a random right-hand side.
pub fn random_full_rank_system(
    rng: &mut ChaCha8Rng,
    m: usize,
    n: usize,
) -> (DMatrix<f64>, DVector<f64>) {
    assert!(m >= n);
    let a = loop {
        let cand = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
        let smin = cand.clone().svd(false, false).singular_values.min();
        if smin > 0.15 {
            break cand;
        }
    };
    let b = DVector::from_fn(m, |_, _| rng.gen_range(-3.0..3.0));
    (a, b)
}

/// Random bounded WLS problem with `n <= 5` variables and up to 6 general
/// inequality rows, guaranteed feasible by construction around a hidden
/// feasible point. Bounds are occasionally infinite or pinned to exercise
/// those solver paths; a random (possibly infeasible) warm start is included
/// roughly a third of the time.
pub fn random_wls_problem(rng: &mut ChaCha8Rng) -> WlsProblem {
    let n = rng.gen_range(2..=5);
    let m = n + 2;
    let p = rng.gen_range(0..=6);

    let (a, b) = random_full_rank_system(rng, m, n);
    let x_feas = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));

    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    for i in 0..n {
        let style: f64 = rng.gen();
        if style < 0.10 {
            lower[i] = x_feas[i];
            upper[i] = x_feas[i];
        } else {
            lower[i] = if rng.gen::<f64>() < 0.15 {
                f64::NEG_INFINITY
            } else {
                x_feas[i] - rng.gen_range(0.1..2.0)
            };
            upper[i] = if rng.gen::<f64>() < 0.15 {
                f64::INFINITY
            } else {
                x_feas[i] + rng.gen_range(0.1..2.0)
            };
        }
    }

    let mut c = DMatrix::zeros(p, n);
    let mut d = DVector::zeros(p);
    for j in 0..p {
        let row = loop {
            let cand = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            if cand.norm() > 0.3 {
                break cand;
            }
        };
        let slack = rng.gen_range(0.05..1.5);
        d[j] = row.dot(&x_feas) + slack;
        c.row_mut(j).copy_from(&row.transpose());
    }

    let x0 = if rng.gen::<f64>() < 0.3 {
        Some(DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)))
    } else {
        None
    };

    WlsProblem { a, b, lower, upper, c, d, x0, max_iter: 100 }
}

/// Central finite-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(
    f: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let fx = f(x);
    let mut jac = DMatrix::zeros(fx.len(), x.len());
    for j in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.column_mut(j).copy_from(&col);
    }
    jac
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub cases: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} cases, worst {:.3e} vs tolerance {:.1e}: {}",
            self.cases,
            self.worst,
            self.tolerance,
            if self.passed() { "ok" } else { "FAILED" }
        )
    }
}

/// Random WLS problems solved twice: once by the active-set solver, once by
/// exhaustive enumeration. Reports the worst solution gap.
pub fn wls_oracle_suite(cases: usize, seed: u64) -> Result<SuiteReport, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for case in 0..cases {
        let problem = random_wls_problem(&mut rng);
        let sol = problem
            .solve()
            .map_err(|e| format!("case {case}: solver error: {e}"))?;
        if sol.status != SolveStatus::Optimal {
            return Err(format!("case {case}: iteration limit reached"));
        }
        let oracle = brute_force_oracle(&problem).map_err(|e| format!("case {case}: {e}"))?;
        worst = worst.max((&sol.x - &oracle).amax());
    }
    Ok(SuiteReport { cases, worst, tolerance: 1e-6 })
}
