//! Parametric linear complementarity problems
//!
//! ```text
//! S(x) = { y ≥ 0 : w = M y + N x + q ≥ 0, yᵀw = 0 }
//! ```
//!
//! Small instances (p ≤ [`P_MAX`]) are solved exhaustively over the `2^p`
//! complementarity patterns; [`lemke_solve`] returns a single solution for
//! anything larger.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Lu, PIVOT_TOL};
use crate::lp::{Cmp, LinearProgram, LpOutcome};
use crate::model::{Polyhedron, TAU_FEAS};

/// Largest LCP dimension handled by exhaustive pattern enumeration.
pub const P_MAX: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricLcp {
    m: DMatrix<f64>,
    n: DMatrix<f64>,
    q: DVector<f64>,
}

/// Indicator of the indices where the LCP row is tight and `y` may be
/// positive. Orders lexicographically with `false < true`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pattern(pub Vec<bool>);

impl Pattern {
    pub fn from_index(p: usize, bits: usize) -> Pattern {
        Pattern((0..p).map(|j| bits >> (p - 1 - j) & 1 == 1).collect())
    }

    /// All `2^p` patterns in increasing order.
    pub fn all(p: usize) -> impl Iterator<Item = Pattern> {
        (0..1usize << p).map(move |b| Pattern::from_index(p, b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0[j]
    }

    /// No index selected.
    pub fn is_empty_set(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| self.0[j]).collect()
    }

    pub fn complement_indices(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&j| !self.0[j]).collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().iter().map(|j| (j + 1).to_string()).collect();
        write!(f, "{{{}}}", idx.join(","))
    }
}

/// The solution map on one pattern: `y = coef_x · x + offset + dirs · t`,
/// valid for `(x, t)` in `validity` and, when `x_eq` is non-empty, on the
/// affine subspace `x_eq.0 · x = x_eq.1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub alpha: Pattern,
    pub coef_x: DMatrix<f64>,
    pub offset: DVector<f64>,
    /// Columns spanning the solution family when `M_αα` is singular.
    pub dirs: DMatrix<f64>,
    pub x_eq: (DMatrix<f64>, DVector<f64>),
    /// Constraints over `(x, t)`.
    pub validity: Polyhedron,
    /// Whether the validity region has non-empty interior in x.
    pub full_dimensional: bool,
}

impl Piece {
    pub fn is_unique(&self) -> bool {
        self.dirs.ncols() == 0
    }

    /// `y` at `x` for a unique piece.
    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.coef_x * x + &self.offset
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.is_unique()
            && self.x_eq.0.nrows() == 0
            && self.validity.contains(x.as_slice(), tol)
    }
}

/// Solutions at a fixed parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct LcpSolutions {
    /// Distinct solutions (one representative per solution family).
    pub points: Vec<DVector<f64>>,
    /// True when some pattern admits a continuum of solutions.
    pub continuum: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LemkeOutcome {
    Solution(DVector<f64>),
    RayTermination,
}

impl ParametricLcp {
    pub fn new(m: DMatrix<f64>, n: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        let p = q.len();
        if p == 0 {
            return Err(Error::Semantic("follower LCP must have p >= 1".into()));
        }
        if m.shape() != (p, p) {
            return Err(Error::dim(p, m.nrows().max(m.ncols()), "follower matrix M"));
        }
        if n.nrows() != p {
            return Err(Error::dim(p, n.nrows(), "rows of follower matrix N"));
        }
        if m.iter().chain(n.iter()).chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Semantic("follower LCP has non-finite entries".into()));
        }
        Ok(ParametricLcp { m, n, q })
    }

    pub fn p(&self) -> usize {
        self.q.len()
    }

    pub fn x_dim(&self) -> usize {
        self.n.ncols()
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn n(&self) -> &DMatrix<f64> {
        &self.n
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    /// `w = M y + N x + q`.
    pub fn residual(&self, y: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        &self.m * y + &self.n * x + &self.q
    }

    pub fn is_solution(&self, y: &DVector<f64>, x: &DVector<f64>, tol: f64) -> bool {
        let w = self.residual(y, x);
        y.iter().all(|&v| v >= -tol)
            && w.iter().all(|&v| v >= -tol)
            && y.dot(&w).abs() <= tol
    }

    fn check_x(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.x_dim() {
            return Err(Error::dim(self.x_dim(), x.len(), "LCP parameter x"));
        }
        Ok(())
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.p() > P_MAX {
            return Err(Error::Capability(format!(
                "LCP dimension {} exceeds {P_MAX} for exhaustive enumeration; use lemke_solve",
                self.p()
            )));
        }
        Ok(())
    }

    fn sub(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| self.m[(rows[r], cols[c])])
    }
}

/// Every solution at `x`, by exhaustive pattern enumeration.
pub fn lcp_solve(lcp: &ParametricLcp, x: &DVector<f64>) -> Result<LcpSolutions> {
    lcp.check_x(x)?;
    lcp.check_enumerable()?;
    let p = lcp.p();
    let r = &lcp.n * x + &lcp.q;
    let mut out = LcpSolutions {
        points: Vec::new(),
        continuum: false,
    };
    for alpha in Pattern::all(p) {
        let a = alpha.indices();
        let c = alpha.complement_indices();
        let maa = lcp.sub(&a, &a);
        let ra = DVector::from_iterator(a.len(), a.iter().map(|&j| r[j]));
        let (ya, family) = if a.is_empty() {
            (DVector::zeros(0), DMatrix::zeros(0, 0))
        } else if let Some(lu) = Lu::new(&maa) {
            (lu.solve(&(-&ra)), DMatrix::zeros(a.len(), 0))
        } else {
            let (sol, res) = linalg::least_squares(&maa, &(-&ra));
            if res > TAU_FEAS * (1.0 + ra.amax()) {
                continue;
            }
            (sol, linalg::null_space(&maa))
        };
        let mut y = DVector::zeros(p);
        for (k, &j) in a.iter().enumerate() {
            y[j] = ya[k];
        }
        if family.ncols() == 0 {
            if lcp.is_solution(&y, x, TAU_FEAS) {
                push_unique(&mut out.points, y);
            }
            continue;
        }
        // y_α = ya + family · t; need y_α ≥ 0 and w_c ≥ 0.
        let k = family.ncols();
        let mut lp = LinearProgram::minimize(vec![0.0; k]);
        for row in 0..a.len() {
            lp.add_row(family.row(row).iter().cloned().collect(), Cmp::Ge, -ya[row]);
        }
        let w0 = lcp.residual(&y, x);
        for &j in &c {
            let coeffs: Vec<f64> = (0..k)
                .map(|col| a.iter().enumerate().map(|(row, &i)| lcp.m[(j, i)] * family[(row, col)]).sum())
                .collect();
            lp.add_row(coeffs, Cmp::Ge, -w0[j]);
        }
        if let Some((t, _)) = lp.solve().optimal() {
            let shift = &family * DVector::from_column_slice(t);
            for (row, &j) in a.iter().enumerate() {
                y[j] += shift[row];
            }
            if lcp.is_solution(&y, x, TAU_FEAS) {
                out.continuum = true;
                push_unique(&mut out.points, y);
            }
        }
    }
    Ok(out)
}

fn push_unique(points: &mut Vec<DVector<f64>>, y: DVector<f64>) {
    if !points.iter().any(|p| (p - &y).amax() <= 1e-9) {
        points.push(y);
    }
}

/// Lemke's complementary pivoting with covering vector `e` and lexicographic
/// minimum-ratio test.
pub fn lemke_solve(lcp: &ParametricLcp, x: &DVector<f64>) -> Result<LemkeOutcome> {
    lcp.check_x(x)?;
    let p = lcp.p();
    let qx = &lcp.n * x + &lcp.q;
    if qx.iter().all(|&v| v >= 0.0) {
        return Ok(LemkeOutcome::Solution(DVector::zeros(p)));
    }
    // Tableau rows: w - M y - e z0 = qx. Columns: w (0..p), y (p..2p), z0 (2p).
    // Basis starts as w. Lexicographic ordering uses [qx | B^-1] with B^-1 = I.
    let cols = 2 * p + 1;
    let mut tab = DMatrix::<f64>::zeros(p, cols);
    for r in 0..p {
        tab[(r, r)] = 1.0;
        for c in 0..p {
            tab[(r, p + c)] = -lcp.m[(r, c)];
        }
        tab[(r, 2 * p)] = -1.0;
    }
    let mut rhs = qx.clone();
    let mut binv = DMatrix::<f64>::identity(p, p);
    let mut basis: Vec<usize> = (0..p).collect();

    let pivot = |tab: &mut DMatrix<f64>,
                 rhs: &mut DVector<f64>,
                 binv: &mut DMatrix<f64>,
                 row: usize,
                 col: usize| {
        let piv = tab[(row, col)];
        for c in 0..cols {
            tab[(row, c)] /= piv;
        }
        for c in 0..p {
            binv[(row, c)] /= piv;
        }
        rhs[row] /= piv;
        for r in 0..p {
            if r == row {
                continue;
            }
            let f = tab[(r, col)];
            if f == 0.0 {
                continue;
            }
            for c in 0..cols {
                let v = tab[(row, c)];
                tab[(r, c)] -= f * v;
            }
            for c in 0..p {
                let v = binv[(row, c)];
                binv[(r, c)] -= f * v;
            }
            let v = rhs[row];
            rhs[r] -= f * v;
        }
    };

    // z0 enters; leaving row is the most negative qx (lexicographic tie-break).
    let mut row = (0..p)
        .min_by(|&a, &b| {
            rhs[a]
                .total_cmp(&rhs[b])
                .then_with(|| lex_cmp(&binv.row(b).transpose(), &binv.row(a).transpose()))
        })
        .unwrap();
    let mut entering = 2 * p;
    let max_pivots = 50 * (1usize << p.min(20)).max(100);
    for _ in 0..max_pivots {
        let leaving = basis[row];
        pivot(&mut tab, &mut rhs, &mut binv, row, entering);
        basis[row] = entering;
        if leaving == 2 * p {
            let mut y = DVector::zeros(p);
            for (r, &b) in basis.iter().enumerate() {
                if b >= p && b < 2 * p {
                    y[b - p] = rhs[r].max(0.0);
                }
            }
            return Ok(LemkeOutcome::Solution(y));
        }
        // complement of the leaving variable enters
        entering = if leaving < p { leaving + p } else { leaving - p };
        let candidates: Vec<usize> = (0..p)
            .filter(|&r| tab[(r, entering)] > PIVOT_TOL)
            .collect();
        if candidates.is_empty() {
            return Ok(LemkeOutcome::RayTermination);
        }
        // lexicographic minimum ratio over [rhs | B^-1] / column
        row = candidates
            .iter()
            .cloned()
            .min_by(|&a, &b| {
                let ka = lex_key(&rhs, &binv, a, tab[(a, entering)]);
                let kb = lex_key(&rhs, &binv, b, tab[(b, entering)]);
                lex_cmp(&ka, &kb)
            })
            .unwrap();
    }
    panic!("Lemke pivoting exceeded its iteration bound despite lexicographic anti-cycling");
}

fn lex_key(rhs: &DVector<f64>, binv: &DMatrix<f64>, row: usize, piv: f64) -> DVector<f64> {
    let p = rhs.len();
    DVector::from_fn(p + 1, |k, _| {
        if k == 0 {
            rhs[row] / piv
        } else {
            binv[(row, k - 1)] / piv
        }
    })
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let scale = 1.0 + x.abs().max(y.abs());
        if (x - y).abs() > 1e-12 * scale {
            return x.total_cmp(y);
        }
    }
    std::cmp::Ordering::Equal
}

/// The polyhedral pieces of the solution map. Patterns whose validity region
/// is empty are dropped.
pub fn enumerate_pieces(lcp: &ParametricLcp) -> Result<Vec<Piece>> {
    lcp.check_enumerable()?;
    let p = lcp.p();
    let nx = lcp.x_dim();
    let mut pieces = Vec::new();
    for alpha in Pattern::all(p) {
        let a = alpha.indices();
        let c = alpha.complement_indices();
        let maa = lcp.sub(&a, &a);
        let na = DMatrix::from_fn(a.len(), nx, |r, col| lcp.n[(a[r], col)]);
        let qa = DVector::from_iterator(a.len(), a.iter().map(|&j| lcp.q[j]));
        // y_α = -M_αα⁺ (N_α x + q_α) + dirs t, consistent iff U (N_α x + q_α) = 0.
        let (ya_x, ya_0, dirs_a, x_eq) = if a.is_empty() {
            (
                DMatrix::zeros(0, nx),
                DVector::zeros(0),
                DMatrix::zeros(0, 0),
                (DMatrix::zeros(0, nx), DVector::zeros(0)),
            )
        } else if let Some(lu) = Lu::new(&maa) {
            (
                -lu.solve_matrix(&na),
                -lu.solve(&qa),
                DMatrix::zeros(a.len(), 0),
                (DMatrix::zeros(0, nx), DVector::zeros(0)),
            )
        } else {
            let pinv = maa
                .clone()
                .pseudo_inverse(1e-12)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            let left = linalg::null_space(&maa.transpose());
            let eq_a = left.transpose() * &na;
            let eq_b = -(left.transpose() * &qa);
            // inconsistent for every x: 0·x = nonzero
            if linalg::affine_parametrization(&eq_a, &eq_b, 1e-9).is_none() {
                continue;
            }
            (-&pinv * &na, -&pinv * &qa, linalg::null_space(&maa), (eq_a, eq_b))
        };
        let k = dirs_a.ncols();
        let mut coef_x = DMatrix::zeros(p, nx);
        let mut offset = DVector::zeros(p);
        let mut dirs = DMatrix::zeros(p, k);
        for (r, &j) in a.iter().enumerate() {
            coef_x.set_row(j, &ya_x.row(r));
            offset[j] = ya_0[r];
            dirs.set_row(j, &dirs_a.row(r));
        }
        // validity rows over (x, t): y_α ≥ 0, w_c ≥ 0
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs: Vec<f64> = Vec::new();
        for &j in &a {
            let mut row: Vec<f64> = coef_x.row(j).iter().cloned().collect();
            row.extend(dirs.row(j).iter());
            rows.push(row);
            rhs.push(-offset[j]);
        }
        let w_x = &lcp.m * &coef_x + &lcp.n;
        let w_0 = &lcp.m * &offset + &lcp.q;
        let w_t = &lcp.m * &dirs;
        for &j in &c {
            let mut row: Vec<f64> = w_x.row(j).iter().cloned().collect();
            row.extend(w_t.row(j).iter());
            rows.push(row);
            rhs.push(-w_0[j]);
        }
        let validity = Polyhedron::from_rows(nx + k, rows, rhs)?;
        let Some(interior) = interior_margin(&validity, &x_eq, k) else {
            continue;
        };
        pieces.push(Piece {
            alpha,
            coef_x,
            offset,
            dirs,
            x_eq: x_eq.clone(),
            full_dimensional: x_eq.0.nrows() == 0 && k == 0 && interior > 1e-9,
            validity,
        });
    }
    Ok(pieces)
}

/// Largest `s ≤ 1` with `A z ≥ b + s‖A_r‖` (plus the x-equalities); `None` if
/// the region is empty.
fn interior_margin(
    poly: &Polyhedron,
    x_eq: &(DMatrix<f64>, DVector<f64>),
    _k: usize,
) -> Option<f64> {
    let dim = poly.dim();
    let mut obj = vec![0.0; dim + 1];
    obj[dim] = -1.0;
    let mut lp = LinearProgram::minimize(obj);
    lp.set_bounds(dim, f64::NEG_INFINITY, 1.0);
    for (row, b) in poly.rows() {
        let nrm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut coeffs = row.to_vec();
        coeffs.push(-nrm);
        lp.add_row(coeffs, Cmp::Ge, b);
    }
    for r in 0..x_eq.0.nrows() {
        let mut coeffs = vec![0.0; dim + 1];
        for c in 0..x_eq.0.ncols() {
            coeffs[c] = x_eq.0[(r, c)];
        }
        lp.add_row(coeffs, Cmp::Eq, x_eq.1[r]);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } if x[dim] >= -1e-9 => Some(x[dim]),
        _ => None,
    }
}

/// Sufficient test for single-valuedness: `M` is a P-matrix. Returns the
/// reason on failure.
pub fn is_single_valued(lcp: &ParametricLcp, _x_region: &Polyhedron) -> (bool, String) {
    let p = lcp.p();
    if p > P_MAX {
        return (false, format!("p = {p} exceeds {P_MAX}; P-matrix test not run"));
    }
    for alpha in Pattern::all(p).skip(1) {
        let a = alpha.indices();
        let det = linalg::determinant(&lcp.sub(&a, &a));
        if det <= 0.0 {
            return (
                false,
                format!("principal minor {alpha} of M is {det:.3e}, so M is not a P-matrix"),
            );
        }
    }
    (true, "M is a P-matrix".into())
}
