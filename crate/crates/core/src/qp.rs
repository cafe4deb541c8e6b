//! Primal active-set method for strictly convex quadratic programs
//!
//! ```text
//! minimise ½ vᵀ G v + cᵀ v   subject to   A v ≥ b
//! ```
//!
//! started from a feasible point. Used for Euclidean projection onto piece
//! polyhedra (`G = I`) inside the projected-gradient solver.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{least_squares, Lu};

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub active: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

/// Rows of `a` with slack at most `tol` at `x`, reduced to a linearly
/// independent subset (greedy, in row order).
pub fn independent_active_rows(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    tol: f64,
) -> Vec<usize> {
    let n = a.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut chosen = Vec::new();
    for r in 0..a.nrows() {
        let row = a.row(r).transpose();
        let slack = row.dot(x) - b[r];
        if slack.abs() > tol * (1.0 + b[r].abs()) {
            continue;
        }
        if basis.len() == n {
            break;
        }
        let mut v = row.clone();
        for q in &basis {
            let proj = q.dot(&v);
            v -= q * proj;
        }
        let nrm = v.norm();
        if nrm > 1e-9 * row.norm().max(1e-300) {
            basis.push(v / nrm);
            chosen.push(r);
        }
    }
    chosen
}

/// Solves the equality-constrained problem on the working set; returns the
/// step `p` from `x` and the multipliers of the working rows.
fn eq_step(
    g: &DMatrix<f64>,
    grad: &DVector<f64>,
    a: &DMatrix<f64>,
    working: &[usize],
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = g.nrows();
    let k = working.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(g);
    for (j, &r) in working.iter().enumerate() {
        for c in 0..n {
            kkt[(n + j, c)] = a[(r, c)];
            kkt[(c, n + j)] = -a[(r, c)];
        }
    }
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-grad));
    let sol = match Lu::new(&kkt) {
        Some(lu) => lu.solve(&rhs),
        None => least_squares(&kkt, &rhs).0,
    };
    Some((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

fn spanned(a: &DMatrix<f64>, working: &[usize], r: usize) -> bool {
    if working.is_empty() {
        return false;
    }
    if working.len() >= a.ncols() {
        return true;
    }
    let w = DMatrix::from_fn(a.ncols(), working.len(), |c, j| a[(working[j], c)]);
    let row = a.row(r).transpose();
    let (_, resid) = least_squares(&w, &row);
    resid <= 1e-9 * row.norm()
}

pub fn solve_convex_qp(
    g: &DMatrix<f64>,
    c: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    start: &DVector<f64>,
    max_iters: usize,
) -> QpSolution {
    let tol = 1e-12;
    let min_slack = |x: &DVector<f64>| (a * x - b).iter().cloned().fold(f64::INFINITY, f64::min);
    let floor = min_slack(start).min(0.0) - 1e-12;
    let mut x = start.clone();
    let mut last_good = start.clone();
    let mut working = independent_active_rows(a, b, &x, 1e-10);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        let grad = g * &x + c;
        let Some((p, lambda)) = eq_step(g, &grad, a, &working) else {
            break;
        };
        let scale = 1.0 + x.amax();
        if p.amax() <= 1e-13 * scale {
            // stationary on the working set: check multipliers
            let (worst, wval) = lambda
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .map(|(j, &v)| (j, v))
                .unwrap_or((0, 0.0));
            if working.is_empty() || wval >= -tol * (1.0 + grad.amax()) {
                converged = true;
                break;
            }
            working.remove(worst);
            continue;
        }
        // ratio test against rows outside the working set; rows spanned by
        // the working set cannot block a step in its null space
        let mut step = 1.0;
        let mut blocking = None;
        let pn = p.norm();
        for r in 0..a.nrows() {
            if working.contains(&r) {
                continue;
            }
            let row = a.row(r);
            let ap = row.dot(&p.transpose());
            if ap < -1e-11 * pn * row.norm() && !spanned(a, &working, r) {
                let slack = row.dot(&x.transpose()) - b[r];
                let t = (slack.max(0.0)) / -ap;
                if t < step {
                    step = t;
                    blocking = Some(r);
                }
            }
        }
        x += &p * step;
        if let Some(r) = blocking {
            working.push(r);
        }
        if min_slack(&x) >= floor {
            last_good.copy_from(&x);
        } else {
            break;
        }
    }
    if min_slack(&x) < floor {
        x = last_good;
        converged = false;
    }
    QpSolution {
        x,
        active: working,
        iterations,
        converged,
    }
}

/// Euclidean projection of `point` onto `{v : A v ≥ b}`, starting the active-set
/// iteration from the feasible `feasible`.
pub fn project(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    point: &DVector<f64>,
    feasible: &DVector<f64>,
) -> DVector<f64> {
    let n = point.len();
    if a.nrows() == 0 {
        return point.clone();
    }
    // quick exit: point already feasible
    let slack = a * point - b;
    if slack.iter().all(|&s| s >= 0.0) {
        return point.clone();
    }
    let g = DMatrix::identity(n, n);
    let sol = solve_convex_qp(&g, &(-point), a, b, feasible, 50 * (n + a.nrows()) + 100);
    sol.x
}
