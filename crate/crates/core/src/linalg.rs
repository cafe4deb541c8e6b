//! Dense linear-algebra helpers shared by the LCP, MPEC and certificate code.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Pivots below this magnitude mark a matrix as singular.
pub const PIVOT_TOL: f64 = 1e-10;

/// LU factorisation with partial pivoting. Fails when a pivot falls below
/// [`PIVOT_TOL`] (relative to the largest entry of the matrix).
#[derive(Clone, Debug)]
pub struct Lu {
    lu: DMatrix<f64>,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &DMatrix<f64>) -> Option<Lu> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU of a non-square matrix");
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        let scale = a.amax().max(1.0);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, lu[(r, k)].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))?;
            if pmax <= PIVOT_TOL * scale {
                return None;
            }
            if p != k {
                lu.swap_rows(p, k);
                perm.swap(p, k);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for r in (k + 1)..n {
                let f = lu[(r, k)] / pivot;
                lu[(r, k)] = f;
                for c in (k + 1)..n {
                    let v = lu[(k, c)];
                    lu[(r, c)] -= f * v;
                }
            }
        }
        Some(Lu { lu, perm, sign })
    }

    pub fn determinant(&self) -> f64 {
        self.sign * self.lu.diagonal().iter().product::<f64>()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.lu.nrows();
        let mut x = DVector::from_iterator(n, self.perm.iter().map(|&p| b[p]));
        for r in 0..n {
            for c in 0..r {
                x[r] -= self.lu[(r, c)] * x[c];
            }
        }
        for r in (0..n).rev() {
            for c in (r + 1)..n {
                x[r] -= self.lu[(r, c)] * x[c];
            }
            x[r] /= self.lu[(r, r)];
        }
        x
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            out.set_column(j, &self.solve(&b.column(j).into_owned()));
        }
        out
    }
}

/// Determinant with a singularity cut-off; singular matrices report 0.
pub fn determinant(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    Lu::new(a).map(|lu| lu.determinant()).unwrap_or(0.0)
}

fn padded_svd(a: &DMatrix<f64>) -> SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    let (m, n) = a.shape();
    let rows = m.max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    SVD::new(padded, true, true)
}

fn rank_tol(sv: &DVector<f64>, shape: (usize, usize)) -> f64 {
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    (shape.0.max(shape.1) as f64) * f64::EPSILON * smax.max(1.0) * 1e3
}

/// Orthonormal basis (as columns) of the null space of `a`.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let svd = padded_svd(a);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let tol = rank_tol(&svd.singular_values, a.shape());
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&k| svd.singular_values[k] <= tol)
        .map(|k| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let svd = padded_svd(a);
    let tol = rank_tol(&svd.singular_values, a.shape());
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Minimum-norm least-squares solution of `a x = b` and its residual norm.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    if a.nrows() == 0 {
        return (DVector::zeros(n), 0.0);
    }
    let (m, _) = a.shape();
    let rows = m.max(n);
    let mut pa = DMatrix::zeros(rows, n);
    pa.view_mut((0, 0), (m, n)).copy_from(a);
    let mut pb = DVector::zeros(rows);
    pb.rows_mut(0, m).copy_from(b);
    let svd = SVD::new(pa, true, true);
    let tol = rank_tol(&svd.singular_values, a.shape());
    let x = svd.solve(&pb, tol).expect("SVD computed with U and V");
    let res = (a * &x - b).norm();
    (x, res)
}

/// The affine set `{u : e u = f}` as `u0 + Z v` with orthonormal `Z`, or `None`
/// when the system is inconsistent beyond `tol`.
pub fn affine_parametrization(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    tol: f64,
) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let (u0, res) = least_squares(e, f);
    let scale = 1.0 + f.amax();
    if res > tol * scale {
        return None;
    }
    Some((u0, null_space(e)))
}

pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    if sym.nrows() == 0 {
        return f64::INFINITY;
    }
    let s = 0.5 * (sym + sym.transpose());
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Positive semidefinite up to a relative tolerance.
pub fn is_psd(sym: &DMatrix<f64>) -> bool {
    let scale = sym.amax().max(1.0);
    min_eigenvalue(sym) >= -1e-10 * scale
}

pub fn is_pd(sym: &DMatrix<f64>) -> bool {
    let scale = sym.amax().max(1.0);
    min_eigenvalue(sym) > 1e-10 * scale
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}
