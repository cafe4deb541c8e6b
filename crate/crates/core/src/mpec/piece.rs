//! One complementarity piece as a polynomial problem over a polyhedron.
//!
//! With the pattern fixed, every complementarity pair becomes one equality
//! and one inequality. Equalities are eliminated through `u = u0 + Z v` with
//! orthonormal `Z`, leaving `min f(v) s.t. C v ≥ d` with unit-norm rows.

use nalgebra::{DMatrix, DVector};

use super::nlp;
use super::{MpecInstance, PieceStatus, SolveOptions};
use crate::lcp::Pattern;
use crate::linalg;
use crate::model::TAU_FEAS;
use crate::poly::Polynomial;

#[derive(Clone, Debug)]
pub struct PieceProblem {
    pub patterns: Vec<Pattern>,
    pub decision: Vec<usize>,
    pub u0: DVector<f64>,
    pub z: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub objective: Polynomial,
}

pub(crate) struct PieceOutcome {
    pub status: PieceStatus,
    pub solution: Option<(Vec<f64>, f64)>,
    pub certified: bool,
    pub method: String,
    pub starts: usize,
}

impl PieceOutcome {
    fn empty() -> Self {
        PieceOutcome {
            status: PieceStatus::Empty,
            solution: None,
            certified: true,
            method: "empty".into(),
            starts: 0,
        }
    }
}

struct Rows {
    pos: Vec<Option<usize>>,
    fixed: Vec<Option<f64>>,
    ge: Vec<(Vec<f64>, f64)>,
    eq: Vec<(Vec<f64>, f64)>,
    empty: bool,
}

impl Rows {
    /// Adds `Σ a_k z_k ≥ rhs` (or `=`), folding fixed slots into the rhs.
    fn add(&mut self, coeffs: &[(usize, f64)], rhs: f64, equality: bool) {
        let d = self.pos.iter().filter(|p| p.is_some()).count();
        let mut row = vec![0.0; d];
        let mut rhs = rhs;
        for &(k, a) in coeffs {
            match (self.pos[k], self.fixed[k]) {
                (Some(c), _) => row[c] += a,
                (None, Some(v)) => rhs -= a * v,
                (None, None) => unreachable!("slot is either decision or fixed"),
            }
        }
        if row.iter().all(|&a| a == 0.0) {
            let ok = if equality {
                rhs.abs() <= TAU_FEAS
            } else {
                rhs <= TAU_FEAS
            };
            if !ok {
                self.empty = true;
            }
            return;
        }
        if equality {
            self.eq.push((row, rhs));
        } else {
            self.ge.push((row, rhs));
        }
    }
}

impl PieceProblem {
    /// `None` when the piece is empty by its linear structure alone.
    pub fn build(inst: &MpecInstance, patterns: &[Pattern]) -> Option<PieceProblem> {
        let decision = inst.decision_vars();
        let mut pos = vec![None; inst.ambient_dim()];
        for (c, &k) in decision.iter().enumerate() {
            pos[k] = Some(c);
        }
        let mut rows = Rows {
            pos,
            fixed: inst.fixed.clone(),
            ge: Vec::new(),
            eq: Vec::new(),
            empty: false,
        };
        for block in &inst.polyhedral {
            for (row, b) in block.set.rows() {
                let coeffs: Vec<(usize, f64)> =
                    block.vars.iter().cloned().zip(row.iter().cloned()).collect();
                rows.add(&coeffs, b, false);
            }
        }
        for (con, alpha) in inst.lcps.iter().zip(patterns) {
            for j in 0..con.lcp.p() {
                let (g, q) = con.row(j);
                let y = [(con.y_vars[j], 1.0)];
                if alpha.contains(j) {
                    rows.add(&g, -q, true);
                    rows.add(&y, 0.0, false);
                } else {
                    rows.add(&y, 0.0, true);
                    rows.add(&g, -q, false);
                }
            }
        }
        if rows.empty {
            return None;
        }
        let d_dim = decision.len();
        let (u0, z) = if rows.eq.is_empty() {
            (DVector::zeros(d_dim), DMatrix::identity(d_dim, d_dim))
        } else {
            let e = DMatrix::from_fn(rows.eq.len(), d_dim, |r, c| rows.eq[r].0[c]);
            let f = DVector::from_iterator(rows.eq.len(), rows.eq.iter().map(|r| r.1));
            linalg::affine_parametrization(&e, &f, 1e-9)?
        };
        let k = z.ncols();
        let mut c_rows: Vec<Vec<f64>> = Vec::new();
        let mut d_vals: Vec<f64> = Vec::new();
        for (row, b) in &rows.ge {
            let a = DVector::from_column_slice(row);
            let cr = z.transpose() * &a;
            let dr = b - a.dot(&u0);
            let nrm = cr.norm();
            if nrm <= 1e-12 * (1.0 + a.norm()) {
                if dr > TAU_FEAS {
                    return None;
                }
                continue;
            }
            c_rows.push((cr / nrm).iter().cloned().collect());
            d_vals.push(dr / nrm);
        }
        let c = DMatrix::from_fn(c_rows.len(), k, |r, col| c_rows[r][col]);
        let d = DVector::from_vec(d_vals);
        let fixed: Vec<(usize, f64)> = inst
            .fixed
            .iter()
            .enumerate()
            .filter_map(|(k, f)| f.map(|v| (k, v)))
            .collect();
        let map: Vec<Option<usize>> = rows.pos.clone();
        let reduced = inst
            .objective
            .fix(&fixed)
            .reindex(&map, d_dim)
            .expect("fixed slots removed before reindexing");
        let objective = reduced.compose_affine(&u0, &z);
        Some(PieceProblem {
            patterns: patterns.to_vec(),
            decision,
            u0,
            z,
            c,
            d,
            objective,
        })
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn decision_values(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.u0 + &self.z * v
    }

    pub fn ambient(&self, inst: &MpecInstance, v: &DVector<f64>) -> Vec<f64> {
        let u = self.decision_values(v);
        let mut z: Vec<f64> = inst.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        for (c, &k) in self.decision.iter().enumerate() {
            z[k] = u[c];
        }
        z
    }

    /// Reduced coordinates of an ambient point, if it lies on the piece's
    /// affine hull and satisfies its inequalities within `tol`.
    pub fn locate(&self, z: &[f64], tol: f64) -> Option<DVector<f64>> {
        let u = DVector::from_iterator(self.decision.len(), self.decision.iter().map(|&k| z[k]));
        let v = self.z.transpose() * (&u - &self.u0);
        if (self.decision_values(&v) - &u).amax() > tol {
            return None;
        }
        let slack = &self.c * &v - &self.d;
        if slack.iter().any(|&s| s < -tol) {
            return None;
        }
        Some(v)
    }
}

pub(crate) fn solve_combo(
    inst: &MpecInstance,
    patterns: &[Pattern],
    opts: &SolveOptions,
    seed: u64,
) -> PieceOutcome {
    let Some(pp) = PieceProblem::build(inst, patterns) else {
        return PieceOutcome::empty();
    };
    let out = nlp::solve_piece(&pp, opts, seed);
    PieceOutcome {
        status: out.status,
        solution: out.v.map(|v| (pp.ambient(inst, &v), out.residual)),
        certified: out.certified,
        method: out.method,
        starts: out.starts,
    }
}

pub(crate) fn solve_local_on(
    inst: &MpecInstance,
    patterns: &[Pattern],
    start: &[f64],
    opts: &SolveOptions,
) -> crate::error::Result<PieceOutcome> {
    let Some(pp) = PieceProblem::build(inst, patterns) else {
        return Ok(PieceOutcome::empty());
    };
    let Some(v0) = pp.locate(start, 1e-6) else {
        return Ok(PieceOutcome::empty());
    };
    let (v, residual) = nlp::descend_from(&pp, v0, opts);
    Ok(PieceOutcome {
        status: if residual <= opts.tol {
            PieceStatus::Optimal
        } else {
            PieceStatus::Incomplete
        },
        solution: Some((pp.ambient(inst, &v), residual)),
        certified: false,
        method: "projected gradient".into(),
        starts: 1,
    })
}
