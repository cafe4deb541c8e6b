//! Solvers for `min f(v) s.t. C v ≥ d` on a single piece.
//!
//! Linear objectives go to the LP solver. Everything else runs multistart
//! projected gradient (Barzilai–Borwein steps with Armijo backtracking);
//! quadratics are additionally polished on their detected active set and,
//! when the row count allows it, solved exactly by enumerating active sets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::piece::PieceProblem;
use super::{PieceStatus, SolveOptions, ENUMERATION_LIMIT, TIE_TOL};
use crate::linalg::{self, Lu};
use crate::lp::{Cmp, LinearProgram, LpOutcome};
use crate::poly::Polynomial;
use crate::qp;

pub(crate) struct NlpOutcome {
    pub status: PieceStatus,
    pub v: Option<DVector<f64>>,
    pub residual: f64,
    pub certified: bool,
    pub method: String,
    pub starts: usize,
}

/// Van der Corput radical inverses in the first primes.
#[derive(Clone, Debug)]
pub struct Halton {
    dim: usize,
    index: u64,
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

impl Halton {
    pub fn new(dim: usize) -> Self {
        Halton { dim, index: 1 }
    }

    fn radical_inverse(mut i: u64, base: u64) -> f64 {
        let mut out = 0.0;
        let mut f = 1.0 / base as f64;
        while i > 0 {
            out += f * (i % base) as f64;
            i /= base;
            f /= base as f64;
        }
        out
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;
    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some(
            (0..self.dim)
                .map(|k| Self::radical_inverse(i, PRIMES[k % PRIMES.len()] + 2 * (k / PRIMES.len()) as u64))
                .collect(),
        )
    }
}

struct Objective<'a> {
    f: &'a Polynomial,
    grad: Vec<Polynomial>,
}

impl<'a> Objective<'a> {
    fn new(f: &'a Polynomial) -> Self {
        let grad = (0..f.arity()).map(|k| f.partial(k)).collect();
        Objective { f, grad }
    }

    fn value(&self, v: &DVector<f64>) -> f64 {
        self.f.eval_unchecked(v.as_slice())
    }

    fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.grad.len(), self.grad.iter().map(|g| g.eval_unchecked(v.as_slice())))
    }
}

fn project(pp: &PieceProblem, point: &DVector<f64>, feasible: &DVector<f64>) -> DVector<f64> {
    qp::project(&pp.c, &pp.d, point, feasible)
}

/// `‖v − P(v − ∇f(v))‖∞`.
pub(crate) fn stationarity_residual(pp: &PieceProblem, v: &DVector<f64>) -> f64 {
    let obj = Objective::new(&pp.objective);
    let g = obj.gradient(v);
    let p = project(pp, &(v - &g), v);
    (v - p).amax()
}

const CENTER_BOX: f64 = 1e6;

/// Chebyshev centre of the piece, `None` when empty.
fn chebyshev(pp: &PieceProblem) -> Option<DVector<f64>> {
    let k = pp.dim();
    let mut obj = vec![0.0; k + 1];
    obj[k] = -1.0;
    let mut lp = LinearProgram::minimize(obj);
    lp.set_bounds(k, 0.0, 1.0);
    // keeps the LP bounded; desk-scale pieces have points well inside
    for j in 0..k {
        lp.set_bounds(j, -CENTER_BOX, CENTER_BOX);
    }
    for r in 0..pp.c.nrows() {
        let mut row: Vec<f64> = pp.c.row(r).iter().cloned().collect();
        row.push(-1.0);
        lp.add_row(row, Cmp::Ge, pp.d[r]);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(DVector::from_column_slice(&x[..k])),
        LpOutcome::Unbounded | LpOutcome::Infeasible => None,
    }
}

fn linear_program(pp: &PieceProblem, objective: &[f64]) -> LpOutcome {
    let mut lp = LinearProgram::minimize(objective.to_vec());
    for r in 0..pp.c.nrows() {
        lp.add_row(pp.c.row(r).iter().cloned().collect(), Cmp::Ge, pp.d[r]);
    }
    lp.solve()
}

/// Per-coordinate bounds of the piece; infinite where unbounded.
fn box_hull(pp: &PieceProblem) -> (Vec<f64>, Vec<f64>) {
    let k = pp.dim();
    let mut lo = vec![f64::NEG_INFINITY; k];
    let mut hi = vec![f64::INFINITY; k];
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        if let LpOutcome::Optimal { value, .. } = linear_program(pp, &e) {
            lo[j] = value;
        }
        e[j] = -1.0;
        if let LpOutcome::Optimal { value, .. } = linear_program(pp, &e) {
            hi[j] = -value;
        }
    }
    (lo, hi)
}

/// Projected gradient from `v0` (feasible), with periodic active-set polish
/// for quadratics. Returns the final point and its residual.
fn descend(
    pp: &PieceProblem,
    obj: &Objective,
    quad: Option<&(DMatrix<f64>, DVector<f64>)>,
    v0: DVector<f64>,
    opts: &SolveOptions,
) -> (DVector<f64>, f64) {
    let mut v = v0;
    let mut step = 1.0;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iters {
        let g = obj.gradient(&v);
        let pg = project(pp, &(&v - &g), &v);
        residual = (&v - &pg).amax();
        if residual <= opts.tol {
            break;
        }
        if let Some(q) = quad {
            if it % 10 == 0 {
                if let Some(p) = polish(pp, q, &v) {
                    let r = stationarity_residual(pp, &p);
                    if obj.value(&p) <= obj.value(&v) + 1e-12 * (1.0 + obj.value(&v).abs()) {
                        v = p;
                        residual = r;
                        if r <= opts.tol {
                            break;
                        }
                        continue;
                    }
                }
            }
        }
        let f0 = obj.value(&v);
        let mut t = step;
        let mut next = None;
        for _ in 0..60 {
            let cand = project(pp, &(&v - &g * t), &v);
            let decrease = g.dot(&(&cand - &v));
            if obj.value(&cand) <= f0 + 1e-4 * decrease {
                next = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let Some(vn) = next else { break };
        let s = &vn - &v;
        if s.amax() == 0.0 {
            break;
        }
        let y = obj.gradient(&vn) - &g;
        let sy = s.dot(&y);
        step = if sy > 0.0 { (s.dot(&s) / sy).clamp(1e-10, 1e10) } else { (t * 2.0).min(1e10) };
        v = vn;
        if !obj.value(&v).is_finite() || v.amax() > 1e15 {
            break;
        }
    }
    if let Some(q) = quad {
        if residual > opts.tol {
            if let Some(p) = polish(pp, q, &v) {
                let r = stationarity_residual(pp, &p);
                if r < residual {
                    return (p, r);
                }
            }
        }
    }
    (v, residual)
}

pub(crate) fn descend_from(pp: &PieceProblem, v0: DVector<f64>, opts: &SolveOptions) -> (DVector<f64>, f64) {
    let obj = Objective::new(&pp.objective);
    let quad = pp.objective.quadratic_form().map(|(h, g, _)| (h, g));
    let v0 = project(pp, &v0, &v0);
    descend(pp, &obj, quad.as_ref(), v0, opts)
}

/// Stationary point of the quadratic on the affine hull of the active set
/// at `v`, if feasible.
fn polish(pp: &PieceProblem, q: &(DMatrix<f64>, DVector<f64>), v: &DVector<f64>) -> Option<DVector<f64>> {
    let (h, g) = q;
    let k = pp.dim();
    let w = qp::independent_active_rows(&pp.c, &pp.d, v, 1e-7);
    let nw = w.len();
    let mut kkt = DMatrix::zeros(k + nw, k + nw);
    kkt.view_mut((0, 0), (k, k)).copy_from(h);
    let mut rhs = DVector::zeros(k + nw);
    rhs.rows_mut(0, k).copy_from(&(-g));
    for (j, &r) in w.iter().enumerate() {
        for c in 0..k {
            kkt[(k + j, c)] = pp.c[(r, c)];
            kkt[(c, k + j)] = -pp.c[(r, c)];
        }
        rhs[k + j] = pp.d[r];
    }
    let sol = match Lu::new(&kkt) {
        Some(lu) => lu.solve(&rhs),
        None => {
            let (s, res) = linalg::least_squares(&kkt, &rhs);
            if res > 1e-9 * (1.0 + rhs.amax()) {
                return None;
            }
            s
        }
    };
    let p = sol.rows(0, k).into_owned();
    let slack = &pp.c * &p - &pp.d;
    if slack.iter().any(|&s| s < -1e-10) {
        return None;
    }
    Some(p)
}

fn count_subsets(m: usize, k: usize, limit: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut binom: usize = 1;
    for s in 0..=k.min(m) {
        if s > 0 {
            binom = binom.checked_mul(m - s + 1)? / s;
        }
        total = total.checked_add(binom)?;
        if total > limit {
            return None;
        }
    }
    Some(total)
}

/// Exact minimum of a quadratic over a bounded polyhedron: the minimiser is
/// a stationary point of the objective restricted to the affine hull of its
/// minimal face, so every linearly independent active set is tried.
fn enumerate_active_sets(
    pp: &PieceProblem,
    q: &(DMatrix<f64>, DVector<f64>),
    obj: &Objective,
) -> Option<Option<DVector<f64>>> {
    let k = pp.dim();
    let m = pp.c.nrows();
    count_subsets(m, k, ENUMERATION_LIMIT)?;
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut stack: Vec<usize> = Vec::new();
    visit(pp, q, obj, &mut stack, 0, &mut Vec::new(), &mut best);
    Some(best.map(|b| b.0))
}

fn visit(
    pp: &PieceProblem,
    q: &(DMatrix<f64>, DVector<f64>),
    obj: &Objective,
    set: &mut Vec<usize>,
    from: usize,
    basis: &mut Vec<DVector<f64>>,
    best: &mut Option<(DVector<f64>, f64)>,
) {
    if let Some(v) = face_stationary_point(pp, q, set) {
        let val = obj.value(&v);
        if best.as_ref().map_or(true, |b| val < b.1 - TIE_TOL) {
            *best = Some((v, val));
        }
    }
    if set.len() == pp.dim() {
        return;
    }
    for r in from..pp.c.nrows() {
        let mut u = pp.c.row(r).transpose();
        for b in basis.iter() {
            let proj = b.dot(&u);
            u -= b * proj;
        }
        let nrm = u.norm();
        if nrm < 1e-9 {
            continue;
        }
        basis.push(u / nrm);
        set.push(r);
        visit(pp, q, obj, set, r + 1, basis, best);
        set.pop();
        basis.pop();
    }
}

fn face_stationary_point(
    pp: &PieceProblem,
    q: &(DMatrix<f64>, DVector<f64>),
    set: &[usize],
) -> Option<DVector<f64>> {
    let (h, g) = q;
    let k = pp.dim();
    let (vw, zw) = if set.is_empty() {
        (DVector::zeros(k), DMatrix::identity(k, k))
    } else {
        let e = DMatrix::from_fn(set.len(), k, |r, c| pp.c[(set[r], c)]);
        let f = DVector::from_iterator(set.len(), set.iter().map(|&r| pp.d[r]));
        linalg::affine_parametrization(&e, &f, 1e-10)?
    };
    let v = if zw.ncols() == 0 {
        vw
    } else {
        let hr = zw.transpose() * h * &zw;
        if linalg::min_eigenvalue(&hr) < -1e-10 * hr.amax().max(1.0) {
            return None;
        }
        let gr = zw.transpose() * (h * &vw + g);
        let (s, res) = linalg::least_squares(&hr, &(-&gr));
        if res > 1e-9 * (1.0 + gr.amax()) {
            return None;
        }
        &vw + &zw * s
    };
    let slack = &pp.c * &v - &pp.d;
    if slack.iter().any(|&s| s < -1e-9) {
        return None;
    }
    Some(v)
}

fn seeds(pp: &PieceProblem, center: &DVector<f64>, hull: &(Vec<f64>, Vec<f64>), count: usize, seed: u64) -> Vec<DVector<f64>> {
    let k = pp.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    let mut out = vec![center.clone()];
    for h in Halton::new(k).take(count.saturating_sub(1)) {
        let p = DVector::from_fn(k, |j, _| {
            let u = (h[j] + shift[j]).fract();
            let (lo, hi) = (hull.0[j], hull.1[j]);
            let r = 10.0 * (1.0 + center[j].abs());
            let lo = if lo.is_finite() { lo } else { center[j] - r };
            let hi = if hi.is_finite() { hi } else { center[j] + r };
            lo + u * (hi - lo)
        });
        out.push(project(pp, &p, center));
    }
    out
}

/// Improving recession direction of a convex quadratic: `C r ≥ 0`, `H r = 0`
/// and `gᵀr < 0`.
fn convex_unbounded(pp: &PieceProblem, h: &DMatrix<f64>, g: &DVector<f64>) -> bool {
    let k = pp.dim();
    let mut lp = LinearProgram::minimize(g.iter().cloned().collect());
    for j in 0..k {
        lp.set_bounds(j, -1.0, 1.0);
    }
    for r in 0..pp.c.nrows() {
        lp.add_row(pp.c.row(r).iter().cloned().collect(), Cmp::Ge, 0.0);
    }
    for r in 0..k {
        lp.add_row(h.row(r).iter().cloned().collect(), Cmp::Eq, 0.0);
    }
    matches!(lp.solve(), LpOutcome::Optimal { value, .. } if value < -1e-9)
}

pub(crate) fn solve_piece(pp: &PieceProblem, opts: &SolveOptions, seed: u64) -> NlpOutcome {
    let k = pp.dim();
    if k == 0 {
        return NlpOutcome {
            status: PieceStatus::Optimal,
            v: Some(DVector::zeros(0)),
            residual: 0.0,
            certified: true,
            method: "fixed point".into(),
            starts: 0,
        };
    }
    let Some(center) = chebyshev(pp) else {
        return NlpOutcome {
            status: PieceStatus::Empty,
            v: None,
            residual: f64::INFINITY,
            certified: true,
            method: "empty".into(),
            starts: 0,
        };
    };
    let obj = Objective::new(&pp.objective);
    let degree = pp.objective.degree();
    if degree <= 1 {
        let c: Vec<f64> = (0..k).map(|j| pp.objective.coeff(&unit(k, j))).collect();
        return match linear_program(pp, &c) {
            LpOutcome::Optimal { x, .. } => {
                let mut v = DVector::from_column_slice(&x);
                let zero_h = (DMatrix::zeros(k, k), DVector::from_column_slice(&c));
                if let Some(p) = polish(pp, &zero_h, &v) {
                    if obj.value(&p) <= obj.value(&v) + 1e-12 {
                        v = p;
                    }
                }
                let residual = stationarity_residual(pp, &v);
                NlpOutcome {
                    status: PieceStatus::Optimal,
                    v: Some(v),
                    residual,
                    certified: true,
                    method: "lp".into(),
                    starts: 1,
                }
            }
            LpOutcome::Unbounded => NlpOutcome {
                status: PieceStatus::Unbounded,
                v: None,
                residual: f64::INFINITY,
                certified: true,
                method: "lp".into(),
                starts: 1,
            },
            LpOutcome::Infeasible => NlpOutcome {
                status: PieceStatus::Empty,
                v: None,
                residual: f64::INFINITY,
                certified: true,
                method: "lp".into(),
                starts: 1,
            },
        };
    }
    let hull = box_hull(pp);
    let bounded = hull.0.iter().chain(&hull.1).all(|v| v.is_finite());
    let quad = pp.objective.quadratic_form().map(|(h, g, _)| (h, g));
    let convex = quad.as_ref().map_or(false, |(h, _)| linalg::is_psd(h));
    if let (Some((h, g)), true, false) = (quad.as_ref(), convex, bounded) {
        if convex_unbounded(pp, h, g) {
            return NlpOutcome {
                status: PieceStatus::Unbounded,
                v: None,
                residual: f64::INFINITY,
                certified: true,
                method: "recession ray".into(),
                starts: 0,
            };
        }
    }
    let starts = seeds(pp, &center, &hull, opts.multistart.max(1), seed);
    let mut results: Vec<(DVector<f64>, f64, f64)> = Vec::new();
    for s in &starts {
        let (v, r) = descend(pp, &obj, quad.as_ref(), s.clone(), opts);
        let val = obj.value(&v);
        results.push((v, val, r));
    }
    let mut method = "multistart projected gradient".to_string();
    let mut exact = false;
    if let Some(q) = quad.as_ref() {
        if bounded || convex {
            if let Some(found) = enumerate_active_sets(pp, q, &obj) {
                exact = true;
                method.push_str(" + active-set enumeration");
                if let Some(v) = found {
                    let val = obj.value(&v);
                    let r = stationarity_residual(pp, &v);
                    results.push((v, val, r));
                }
            }
        }
    }
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.1.is_finite() && (r.1 < results[best].1 || !results[best].1.is_finite()) {
            best = i;
        }
    }
    // the enumerated point is exact; prefer it over a tied descent iterate
    let last = results.len() - 1;
    if exact && last >= starts.len() && results[last].1 <= results[best].1 + TIE_TOL {
        best = last;
    }
    let (v, val, residual) = results[best].clone();
    let converged = residual <= opts.tol;
    let agree = results
        .iter()
        .take(starts.len())
        .all(|r| r.2 <= opts.tol && (r.1 - val).abs() <= TIE_TOL);
    let certified = (convex && converged) || (exact && bounded) || agree;
    NlpOutcome {
        status: if certified { PieceStatus::Optimal } else { PieceStatus::Incomplete },
        v: Some(v),
        residual,
        certified,
        method,
        starts: starts.len(),
    }
}

fn unit(k: usize, j: usize) -> Vec<u32> {
    let mut e = vec![0; k];
    e[j] = 1;
    e
}
