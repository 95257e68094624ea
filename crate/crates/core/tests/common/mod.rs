#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use vocbf::qp::{LinearConstraintRow, QpProblem};

/// Dual projected-gradient reference for `min 1/2 x'Hx + f'x, Ax >= b`.
///
/// Works on `g(mu) = -1/2 (A'mu - f)' H^-1 (A'mu - f) + b'mu` over
/// `mu >= 0` with accelerated steps and adaptive restart. Any `mu >= 0`
/// gives a lower bound on the primal optimum, so the returned value is a
/// certificate independent of the solver under test.
pub struct DualReference {
    pub mu: Vec<f64>,
    pub lower_bound: f64,
    pub iterations: usize,
}

pub fn dual_reference(problem: &QpProblem, target: f64, max_iter: usize) -> DualReference {
    let n = problem.dim();
    let m = problem.rows.len();
    let h_inv = problem
        .hessian
        .clone()
        .try_inverse()
        .expect("reference needs an invertible hessian");
    let a = DMatrix::from_fn(m, n, |r, c| problem.rows[r].a[c]);
    let b = DVector::from_iterator(m, problem.rows.iter().map(|r| r.b));
    let f = &problem.linear;
    // g(mu) = -1/2 mu' Q mu + c' mu + const
    let q = &a * &h_inv * a.transpose();
    let c = &b + &a * &h_inv * f;
    let constant = -0.5 * f.dot(&(&h_inv * f));
    let value = |mu: &DVector<f64>| -0.5 * mu.dot(&(&q * mu)) + c.dot(mu) + constant;

    if m == 0 {
        return DualReference {
            mu: Vec::new(),
            lower_bound: constant,
            iterations: 0,
        };
    }
    let lipschitz = q.symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lipschitz;
    let mut mu = DVector::zeros(m);
    let mut y = mu.clone();
    let mut theta = 1.0f64;
    let mut best = value(&mu);
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let grad = &c - &q * &y;
        let next = (&y + grad * step).map(|v| v.max(0.0));
        let next_value = value(&next);
        if next_value < value(&mu) {
            // Restart momentum when the dual value drops.
            theta = 1.0;
            y = mu.clone();
            continue;
        }
        let theta_next = (1.0 + (1.0 + 4.0 * theta * theta).sqrt()) / 2.0;
        y = &next + (&next - &mu) * ((theta - 1.0) / theta_next);
        theta = theta_next;
        mu = next;
        best = best.max(next_value);
        if target - best <= 1e-9 * target.abs().max(1.0) {
            break;
        }
    }
    DualReference {
        mu: mu.iter().copied().collect(),
        lower_bound: best,
        iterations,
    }
}

/// Random strictly convex QP with a known feasible point. Hessian
/// eigenvalues lie in `[0.1, 10]` with a random rotation.
pub fn random_feasible_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let basis = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = basis.qr().q();
    let eig = DVector::from_fn(n, |_, _| rng.random_range(0.1..10.0));
    let hessian = &q * DMatrix::from_diagonal(&eig) * q.transpose();
    let hessian = (&hessian + hessian.transpose()) * 0.5;
    let linear = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut problem = QpProblem::new(hessian, linear);
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at_x0: f64 = a.iter().zip(&x0).map(|(u, v)| u * v).sum();
        // Some rows pass through x0 so degenerate vertices show up.
        let margin = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..1.0) };
        problem.push_row(LinearConstraintRow::new(a, at_x0 - margin));
    }
    problem
}
