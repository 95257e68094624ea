//! Dense strictly convex QP solver.
//!
//! Solves
//!
//! ```text
//! minimize    1/2 x' H x + f' x
//! subject to  a_k' x >= b_k    for every row k
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani. The method starts
//! at the unconstrained minimizer and adds violated rows one at a time, so it
//! needs no feasible starting point and reports infeasibility directly. The
//! problems built by the controllers are tiny (a handful of variables, a few
//! dozen rows), so the factorizations are recomputed from scratch every
//! iteration instead of being updated in place.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub const TOL_FEAS: f64 = 1e-8;
pub const TOL_KKT: f64 = 1e-7;

/// `a . x >= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraintRow {
    pub a: Vec<f64>,
    pub b: f64,
}

impl LinearConstraintRow {
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        Self { a, b }
    }

    pub fn slack(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) - self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub rows: Vec<LinearConstraintRow>,
}

impl QpProblem {
    pub fn new(hessian: DMatrix<f64>, linear: DVector<f64>) -> Self {
        Self {
            hessian,
            linear,
            rows: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn push_row(&mut self, row: LinearConstraintRow) {
        debug_assert_eq!(row.a.len(), self.dim());
        self.rows.push(row);
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        0.5 * x.dot(&(&self.hessian * &x)) + self.linear.dot(&x)
    }

    /// Largest row violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| (-r.slack(x)).max(0.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: QpStatus,
    /// Scaled max of stationarity, complementarity and dual infeasibility.
    pub kkt_residual: f64,
    /// One multiplier per row, zero for inactive rows.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("problem dimensions are inconsistent: {0}")]
    Dimension(String),
    #[error("active-set iteration limit reached ({0} iterations)")]
    IterationLimit(usize),
    #[error("non-finite value encountered")]
    NonFinite,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn validate(problem: &QpProblem) -> Result<(), QpError> {
    let n = problem.dim();
    if problem.hessian.nrows() != n || problem.hessian.ncols() != n {
        return Err(QpError::Dimension(format!(
            "hessian is {}x{}, expected {n}x{n}",
            problem.hessian.nrows(),
            problem.hessian.ncols()
        )));
    }
    for (k, row) in problem.rows.iter().enumerate() {
        if row.a.len() != n {
            return Err(QpError::Dimension(format!(
                "row {k} has {} coefficients, expected {n}",
                row.a.len()
            )));
        }
        if !row.b.is_finite() || row.a.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite);
        }
    }
    if problem.hessian.iter().chain(problem.linear.iter()).any(|v| !v.is_finite()) {
        return Err(QpError::NonFinite);
    }
    Ok(())
}

pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution, QpError> {
    validate(problem)?;
    let n = problem.dim();
    let m = problem.rows.len();

    let chol = problem
        .hessian
        .clone()
        .cholesky()
        .ok_or(QpError::NotPositiveDefinite)?;
    // J = L^{-T}, so that H^{-1} = J J'.
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    let j_mat = l_inv.transpose();

    let normals: Vec<DVector<f64>> = problem
        .rows
        .iter()
        .map(|r| DVector::from_column_slice(&r.a))
        .collect();
    // J' a_k for every row, reused across iterations.
    let projected: Vec<DVector<f64>> = normals.iter().map(|a| j_mat.tr_mul(a)).collect();

    let mut x = -chol.solve(&problem.linear);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let max_iterations = 20 * (n + m) + 100;

    let row_scale: Vec<f64> = normals
        .iter()
        .zip(&problem.rows)
        .map(|(a, r)| 1.0 + a.amax() + r.b.abs())
        .collect();

    let infeasible = |x: &DVector<f64>, mult: &[f64], active: &[usize], iterations| {
        Ok(finish(problem, x, mult, active, QpStatus::Infeasible, iterations))
    };

    loop {
        // Most violated row, measured relative to its scale.
        let mut entering = None;
        let mut worst = 0.0;
        for k in 0..m {
            if active.contains(&k) {
                continue;
            }
            let s = normals[k].dot(&x) - problem.rows[k].b;
            let tol = 1e-12 * (row_scale[k] + normals[k].amax() * x.amax());
            if s < -tol {
                let scaled = s / normals[k].norm();
                if scaled < worst {
                    worst = scaled;
                    entering = Some(k);
                }
            }
        }
        let Some(p) = entering else {
            return Ok(finish(problem, &x, &mult, &active, QpStatus::Optimal, iterations));
        };

        let mut mult_plus = mult.clone();
        mult_plus.push(0.0);

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(QpError::IterationLimit(iterations));
            }
            let q = active.len();
            let d = &projected[p];
            let (z, r) = step_directions(&j_mat, &projected, &active, d);

            // Largest dual step keeping the active multipliers nonnegative.
            let mut t_dual = f64::INFINITY;
            let mut drop = None;
            for (idx, &rj) in r.iter().enumerate() {
                if rj > 1e-14 {
                    let ratio = mult_plus[idx] / rj;
                    if ratio < t_dual {
                        t_dual = ratio;
                        drop = Some(idx);
                    }
                }
            }

            let zn = z.dot(&normals[p]);
            let z_is_zero = z.norm() <= 1e-13 * (1.0 + d.norm()) || zn <= 0.0;
            let t_primal = if z_is_zero {
                f64::INFINITY
            } else {
                let s = normals[p].dot(&x) - problem.rows[p].b;
                (-s / zn).max(0.0)
            };

            let t = t_dual.min(t_primal);
            if t.is_infinite() {
                return infeasible(&x, &mult, &active, iterations);
            }
            if !t.is_finite() {
                return Err(QpError::NonFinite);
            }

            for idx in 0..q {
                mult_plus[idx] -= t * r[idx];
            }
            mult_plus[q] += t;

            if t_primal.is_finite() {
                x += &z * t;
            }

            if t_primal <= t_dual {
                active.push(p);
                mult = mult_plus;
                break;
            }
            let idx = drop.expect("finite dual step implies a blocking row");
            active.remove(idx);
            mult_plus.remove(idx);
        }

        if x.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite);
        }
    }
}

/// Primal direction `z = J Q2 Q2' d` and dual direction `r = R^{-1} Q1' d`
/// from a QR factorization of `J' N` for the active normals `N`.
fn step_directions(
    j_mat: &DMatrix<f64>,
    projected: &[DVector<f64>],
    active: &[usize],
    d: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let n = d.len();
    let q = active.len();
    if q == 0 {
        return (j_mat * d, DVector::zeros(0));
    }
    let mut b = DMatrix::zeros(n, q);
    for (col, &k) in active.iter().enumerate() {
        b.set_column(col, &projected[k]);
    }
    let qr = b.qr();
    let q_full = qr.q();
    let r_mat = qr.r();
    let q1 = q_full.columns(0, q.min(n));
    let q1td = q1.tr_mul(d);

    // Orthogonal complement of the active span: d minus its projection.
    let complement = d - &q1 * &q1td;
    let z = j_mat * complement;

    let r = r_mat
        .solve_upper_triangular(&q1td)
        .unwrap_or_else(|| DVector::from_element(q, f64::NAN));
    (z, r)
}

fn finish(
    problem: &QpProblem,
    x: &DVector<f64>,
    mult: &[f64],
    active: &[usize],
    status: QpStatus,
    iterations: usize,
) -> QpSolution {
    let xs: Vec<f64> = x.iter().copied().collect();
    let mut multipliers = vec![0.0; problem.rows.len()];
    for (&k, &mu) in active.iter().zip(mult) {
        multipliers[k] = mu;
    }
    QpSolution {
        objective: problem.objective(&xs),
        kkt_residual: kkt_residual(problem, &xs, &multipliers),
        x: xs,
        status,
        multipliers,
        iterations,
    }
}

/// Scaled KKT residual of a primal-dual pair. Stationarity is measured
/// relative to the size of the gradient terms, complementarity relative to
/// the row scale.
pub fn kkt_residual(problem: &QpProblem, x: &[f64], multipliers: &[f64]) -> f64 {
    let xv = DVector::from_column_slice(x);
    let hx = &problem.hessian * &xv;
    let mut grad = &hx + &problem.linear;
    let mut scale = 1.0f64.max(hx.amax()).max(problem.linear.amax());
    for (row, &mu) in problem.rows.iter().zip(multipliers) {
        for (g, a) in grad.iter_mut().zip(&row.a) {
            *g -= mu * a;
        }
        scale = scale.max(mu.abs() * row.a.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    let stationarity = grad.amax() / scale;
    let mut residual = stationarity;
    for (row, &mu) in problem.rows.iter().zip(multipliers) {
        let row_scale = 1.0 + row.b.abs() + dot(&row.a, x).abs();
        residual = residual.max((mu * row.slack(x)).abs() / (row_scale * (1.0 + mu.abs())));
        residual = residual.max((-mu).max(0.0));
    }
    residual
}
