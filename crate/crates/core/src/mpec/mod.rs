//! Complementarity-constrained reformulations and their global solution.
//!
//! Every problem the crate optimises (potential minimisation over the joint
//! feasible set, the quasi-potential problem, implicit-potential pieces and
//! single-leader best responses) is an [`MpecInstance`]: a polynomial
//! objective over ambient variables, some of them fixed, subject to linear
//! inequalities and follower complementarity constraints. [`solve_global`]
//! enumerates all complementarity patterns and solves each resulting
//! polynomial-over-polyhedron problem.

mod nlp;
mod piece;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcp::{ParametricLcp, Pattern, P_MAX};
use crate::model::{Formulation, Game, Polyhedron, VariableLayout, TAU_FEAS};
use crate::poly::Polynomial;
use crate::structure::{StructureKind, StructureReport};

pub use nlp::Halton;
pub use piece::PieceProblem;

/// Projected-gradient stationarity tolerance.
pub const TAU_STAT: f64 = 1e-8;
pub const DEFAULT_MULTISTART: usize = 16;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
/// Values closer than this are ties.
pub const TIE_TOL: f64 = 1e-9;
/// Largest number of active-set combinations enumerated per piece.
pub const ENUMERATION_LIMIT: usize = 50_000;
/// Largest number of combined patterns per instance.
pub const MAX_PIECES: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveOptions {
    pub multistart: usize,
    pub tol: f64,
    pub max_iters: usize,
    pub threads: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            multistart: DEFAULT_MULTISTART,
            tol: TAU_STAT,
            max_iters: DEFAULT_MAX_ITERS,
            threads: 1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Quasi,
    Ae,
    ImpPiece(Pattern),
    BestResponse { leader: usize, formulation: Formulation },
    Custom,
}

/// `set` constrains the ambient variables `vars` (in that order).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearBlock {
    pub vars: Vec<usize>,
    pub set: Polyhedron,
}

/// `0 ≤ z[y_vars] ⊥ M z[y_vars] + N z[x_vars] + q ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LcpConstraint {
    pub lcp: ParametricLcp,
    pub y_vars: Vec<usize>,
    pub x_vars: Vec<usize>,
}

impl LcpConstraint {
    /// `(row coefficients over ambient slots, constant)` of `G_j`.
    pub fn row(&self, j: usize) -> (Vec<(usize, f64)>, f64) {
        let mut coeffs = Vec::new();
        for (c, &v) in self.y_vars.iter().enumerate() {
            coeffs.push((v, self.lcp.m()[(j, c)]));
        }
        for (c, &v) in self.x_vars.iter().enumerate() {
            coeffs.push((v, self.lcp.n()[(j, c)]));
        }
        (coeffs, self.lcp.q()[j])
    }

    pub fn g_at(&self, z: &[f64]) -> Vec<f64> {
        (0..self.lcp.p())
            .map(|j| {
                let (c, q) = self.row(j);
                c.iter().map(|&(v, a)| a * z[v]).sum::<f64>() + q
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpecInstance {
    pub kind: InstanceKind,
    pub names: Vec<String>,
    pub objective: Polynomial,
    /// Parameter values; `None` marks a decision variable.
    pub fixed: Vec<Option<f64>>,
    pub polyhedral: Vec<LinearBlock>,
    pub lcps: Vec<LcpConstraint>,
}

impl MpecInstance {
    pub fn ambient_dim(&self) -> usize {
        self.names.len()
    }

    pub fn decision_vars(&self) -> Vec<usize> {
        (0..self.fixed.len()).filter(|&k| self.fixed[k].is_none()).collect()
    }

    /// Ambient point from decision values.
    pub fn full_point(&self, u: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        for (&k, &v) in self.decision_vars().iter().zip(u) {
            z[k] = v;
        }
        z
    }

    /// Ambient point with fixed slots overwritten by their parameter values.
    pub fn with_fixed(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.fixed)
            .map(|(&v, f)| f.unwrap_or(v))
            .collect()
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.objective.eval_unchecked(z)
    }

    /// First violated constraint at the ambient point `z`.
    pub fn violation(&self, z: &[f64], tol: f64) -> Option<String> {
        for (b, block) in self.polyhedral.iter().enumerate() {
            let sub: Vec<f64> = block.vars.iter().map(|&v| z[v]).collect();
            if let Some(r) = block.set.slacks(&sub).iter().position(|&s| s < -tol) {
                return Some(format!("row {} of linear block {}", r + 1, b + 1));
            }
        }
        for (c, con) in self.lcps.iter().enumerate() {
            let g = con.g_at(z);
            for (j, &v) in con.y_vars.iter().enumerate() {
                let y = z[v];
                if y < -tol || g[j] < -tol || (y * g[j]).abs() > tol {
                    return Some(format!(
                        "complementarity row {} of constraint {} ({} = {y:.3e}, row = {:.3e})",
                        j + 1,
                        c + 1,
                        self.names[v],
                        g[j]
                    ));
                }
            }
        }
        None
    }

    pub fn is_feasible(&self, z: &[f64], tol: f64) -> bool {
        self.violation(z, tol).is_none()
    }

    /// The smallest pattern per complementarity constraint consistent with
    /// `z`: index `j` is selected only when `y_j > TAU_FEAS`.
    pub fn pattern_at(&self, z: &[f64]) -> Vec<Pattern> {
        self.lcps
            .iter()
            .map(|c| Pattern(c.y_vars.iter().map(|&v| z[v] > TAU_FEAS).collect()))
            .collect()
    }

    /// Adds `|z_k - center_k| ≤ radius` for every decision variable.
    pub fn restrict_box(&self, center: &[f64], radius: f64) -> MpecInstance {
        let vars = self.decision_vars();
        let lo: Vec<f64> = vars.iter().map(|&v| center[v] - radius).collect();
        let hi: Vec<f64> = vars.iter().map(|&v| center[v] + radius).collect();
        let mut out = self.clone();
        out.polyhedral.push(LinearBlock {
            vars,
            set: Polyhedron::boxed(&lo, &hi),
        });
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Incomplete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceStatus {
    Empty,
    Optimal,
    Unbounded,
    Incomplete,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PieceLog {
    pub patterns: Vec<Pattern>,
    pub status: PieceStatus,
    pub value: Option<f64>,
    pub method: String,
    pub certified: bool,
    pub starts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub point: Vec<f64>,
    pub value: f64,
    pub patterns: Vec<Pattern>,
    pub stationarity_residual: f64,
    pub log: Vec<PieceLog>,
}

// ---- builders ---------------------------------------------------------------

fn leader_blocks(game: &Game, lay: &VariableLayout, shared_y: bool) -> Vec<LinearBlock> {
    let mut out = Vec::new();
    for i in 0..game.num_leaders() {
        out.push(LinearBlock {
            vars: lay.x_range(i).collect(),
            set: game.leader(i).x_set.clone(),
        });
        if !shared_y || i == 0 {
            out.push(LinearBlock {
                vars: lay.y_range(i).collect(),
                set: game.leader(i).y_set.clone(),
            });
        }
    }
    out.retain(|b| b.set.num_rows() > 0);
    out
}

fn follower_constraint(game: &Game, lay: &VariableLayout, i: usize) -> LcpConstraint {
    LcpConstraint {
        lcp: game.follower().clone(),
        y_vars: lay.y_range(i).collect(),
        x_vars: lay.x_all().collect(),
    }
}

fn require_kind(report: &StructureReport, kind: StructureKind, what: &str) -> Result<()> {
    if report.kind != kind {
        return Err(Error::Contract(format!(
            "{what} needs a {kind:?} structure report, got {:?}",
            report.kind
        )));
    }
    Ok(())
}

/// Minimise `π(x) + h(x, w)` over x in the leader sets, `w ∈ Y`, `w ∈ S(x)`.
pub fn build_quasi(game: &Game, report: &StructureReport) -> Result<MpecInstance> {
    require_kind(report, StructureKind::QuasiPotential, "the quasi-potential problem")?;
    let lay = VariableLayout::quasi(game.layout().m().to_vec(), game.layout().p());
    let pi = report.pi.as_ref().expect("quasi report carries pi");
    let h = report.h.as_ref().expect("quasi report carries h");
    Ok(MpecInstance {
        kind: InstanceKind::Quasi,
        names: lay.names(),
        objective: pi + h,
        fixed: vec![None; lay.n()],
        polyhedral: leader_blocks(game, &lay, true),
        lcps: vec![follower_constraint(game, &lay, 0)],
    })
}

/// Minimise the potential over the joint feasible set with every follower
/// block constrained.
pub fn build_ae(game: &Game, report: &StructureReport) -> Result<MpecInstance> {
    require_kind(report, StructureKind::Potential, "the all-equilibrium potential problem")?;
    let lay = game.layout();
    Ok(MpecInstance {
        kind: InstanceKind::Ae,
        names: lay.names(),
        objective: report.pi.clone().expect("potential report carries pi"),
        fixed: vec![None; lay.n()],
        polyhedral: leader_blocks(game, lay, false),
        lcps: (0..game.num_leaders())
            .map(|i| follower_constraint(game, lay, i))
            .collect(),
    })
}

/// One instance per piece of the follower map: the piece potential over
/// the leader sets intersected with the piece's validity region.
pub fn build_imp(game: &Game, report: &StructureReport) -> Result<Vec<MpecInstance>> {
    require_kind(report, StructureKind::ImplicitPotential, "the implicit potential problem")?;
    let lay = game.layout();
    let xlay = VariableLayout::new(lay.m().to_vec(), 0);
    let nx = lay.x_dim();
    let mut out = Vec::new();
    for pp in &report.pieces {
        if !pp.piece.is_unique() {
            return Err(Error::Capability(
                "implicit potential problem needs a single-valued follower map".into(),
            ));
        }
        let mut polyhedral: Vec<LinearBlock> = (0..game.num_leaders())
            .map(|i| LinearBlock {
                vars: xlay.x_range(i).collect(),
                set: game.leader(i).x_set.clone(),
            })
            .filter(|b| b.set.num_rows() > 0)
            .collect();
        polyhedral.push(LinearBlock {
            vars: (0..nx).collect(),
            set: pp.piece.validity.clone(),
        });
        out.push(MpecInstance {
            kind: InstanceKind::ImpPiece(pp.alpha.clone()),
            names: xlay.names(),
            objective: pp.pi.clone(),
            fixed: vec![None; nx],
            polyhedral,
            lcps: Vec::new(),
        });
    }
    Ok(out)
}

/// Leader `i`'s problem with every other slot fixed at `rivals`. Under `ae`
/// the rivals' follower constraints bind the leader's own x.
pub fn build_best_response(game: &Game, leader: usize, rivals: &[f64]) -> Result<MpecInstance> {
    let lay = game.layout();
    if leader >= game.num_leaders() {
        return Err(Error::dim(game.num_leaders(), leader + 1, "leader index"));
    }
    if rivals.len() != lay.n() {
        return Err(Error::dim(lay.n(), rivals.len(), "rival point"));
    }
    let own: Vec<usize> = lay.x_range(leader).chain(lay.y_range(leader)).collect();
    let fixed: Vec<Option<f64>> = (0..lay.n())
        .map(|k| if own.contains(&k) { None } else { Some(rivals[k]) })
        .collect();
    let l = game.leader(leader);
    let mut polyhedral = vec![
        LinearBlock {
            vars: lay.x_range(leader).collect(),
            set: l.x_set.clone(),
        },
        LinearBlock {
            vars: lay.y_range(leader).collect(),
            set: l.y_set.clone(),
        },
    ];
    polyhedral.retain(|b| b.set.num_rows() > 0);
    // in leader order, so under ae constraint k belongs to leader k
    let ae = game.formulation() == Formulation::Ae;
    let lcps = (0..game.num_leaders())
        .filter(|&k| k == leader || ae)
        .map(|k| follower_constraint(game, lay, k))
        .collect();
    Ok(MpecInstance {
        kind: InstanceKind::BestResponse {
            leader,
            formulation: game.formulation(),
        },
        names: lay.names(),
        objective: l.objective.clone(),
        fixed,
        polyhedral,
        lcps,
    })
}

/// Expands a quasi-problem point `(x, w)` to `(x, y)` with `y_i = w`.
pub fn expand_quasi(game: &Game, z: &[f64]) -> Vec<f64> {
    let lay = game.layout();
    let q = VariableLayout::quasi(lay.m().to_vec(), lay.p());
    let mut out = vec![0.0; lay.n()];
    out[lay.x_all()].copy_from_slice(&z[q.x_all()]);
    for i in 0..game.num_leaders() {
        out[lay.y_range(i)].copy_from_slice(&z[q.y_range(0)]);
    }
    out
}

// ---- solvers ----------------------------------------------------------------

struct Candidate {
    patterns: Vec<Pattern>,
    point: Vec<f64>,
    value: f64,
    residual: f64,
}

fn better(c: &Candidate, best: &Candidate) -> bool {
    if c.value < best.value - TIE_TOL {
        return true;
    }
    if c.value > best.value + TIE_TOL {
        return false;
    }
    match c.patterns.cmp(&best.patterns) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => c
            .point
            .iter()
            .zip(&best.point)
            .find(|(a, b)| a != b)
            .map(|(a, b)| a < b)
            .unwrap_or(false),
    }
}

fn all_pattern_combinations(inst: &MpecInstance) -> Result<Vec<Vec<Pattern>>> {
    let mut total: usize = 1;
    for c in &inst.lcps {
        let p = c.lcp.p();
        if p > P_MAX {
            return Err(Error::Capability(format!(
                "complementarity block of size {p} exceeds {P_MAX} for pattern enumeration"
            )));
        }
        total = total.saturating_mul(1 << p);
    }
    if total > MAX_PIECES {
        return Err(Error::Capability(format!(
            "{total} complementarity pieces exceed the limit of {MAX_PIECES}"
        )));
    }
    let mut combos: Vec<Vec<Pattern>> = vec![Vec::new()];
    for c in &inst.lcps {
        let mut next = Vec::with_capacity(combos.len() << c.lcp.p());
        for prefix in &combos {
            for pat in Pattern::all(c.lcp.p()) {
                let mut v = prefix.clone();
                v.push(pat);
                next.push(v);
            }
        }
        combos = next;
    }
    Ok(combos)
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))
}

fn piece_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index as u64)
        .rotate_left(17)
}

/// Global minimum over all complementarity pieces.
pub fn solve_global(inst: &MpecInstance, opts: &SolveOptions) -> Result<SolveResult> {
    solve_global_many(std::slice::from_ref(inst), opts)
}

/// Global minimum over the union of several instances sharing one ambient
/// space (used for the piecewise implicit problem).
pub fn solve_global_many(insts: &[MpecInstance], opts: &SolveOptions) -> Result<SolveResult> {
    let mut jobs: Vec<(usize, Vec<Pattern>)> = Vec::new();
    for (k, inst) in insts.iter().enumerate() {
        for combo in all_pattern_combinations(inst)? {
            jobs.push((k, combo));
        }
    }
    let outcomes: Vec<(PieceLog, Option<Candidate>)> = pool(opts.threads)?.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(idx, (k, combo))| {
                let inst = &insts[*k];
                // imp pieces are reported under their own pattern
                let shown = match &inst.kind {
                    InstanceKind::ImpPiece(a) => vec![a.clone()],
                    _ => combo.clone(),
                };
                let out = piece::solve_combo(inst, combo, opts, piece_seed(opts.seed, idx));
                let cand = out.solution.map(|(point, residual)| Candidate {
                    value: inst.value(&point),
                    patterns: shown.clone(),
                    point,
                    residual,
                });
                (
                    PieceLog {
                        patterns: shown,
                        status: out.status,
                        value: cand.as_ref().map(|c| c.value),
                        method: out.method,
                        certified: out.certified,
                        starts: out.starts,
                    },
                    cand,
                )
            })
            .collect()
    });
    let mut best: Option<Candidate> = None;
    let mut log = Vec::with_capacity(outcomes.len());
    let mut unbounded = false;
    let mut incomplete = false;
    let mut any_nonempty = false;
    for (entry, cand) in outcomes {
        match entry.status {
            PieceStatus::Empty => {}
            PieceStatus::Unbounded => {
                unbounded = true;
                any_nonempty = true;
            }
            PieceStatus::Incomplete => {
                incomplete = true;
                any_nonempty = true;
            }
            PieceStatus::Optimal => any_nonempty = true,
        }
        if let Some(c) = cand {
            if best.as_ref().map_or(true, |b| better(&c, b)) {
                best = Some(c);
            }
        }
        log.push(entry);
    }
    let ambient = insts.first().map_or(0, |i| i.ambient_dim());
    let status = if unbounded {
        SolveStatus::Unbounded
    } else if !any_nonempty {
        SolveStatus::Infeasible
    } else if incomplete || best.is_none() {
        SolveStatus::Incomplete
    } else {
        SolveStatus::Optimal
    };
    Ok(match best {
        Some(b) => SolveResult {
            status,
            point: b.point,
            value: if status == SolveStatus::Unbounded { f64::NEG_INFINITY } else { b.value },
            patterns: b.patterns,
            stationarity_residual: b.residual,
            log,
        },
        None => SolveResult {
            status,
            point: vec![f64::NAN; ambient],
            value: match status {
                SolveStatus::Unbounded => f64::NEG_INFINITY,
                _ => f64::INFINITY,
            },
            patterns: Vec::new(),
            stationarity_residual: f64::INFINITY,
            log,
        },
    })
}

/// Descent on the piece containing `start` (the smallest pattern when
/// several contain it).
pub fn solve_local(inst: &MpecInstance, start: &[f64], opts: &SolveOptions) -> Result<SolveResult> {
    if start.len() != inst.ambient_dim() {
        return Err(Error::dim(inst.ambient_dim(), start.len(), "start point"));
    }
    let z = inst.with_fixed(start);
    let patterns = inst.pattern_at(&z);
    let out = piece::solve_local_on(inst, &patterns, &z, opts)?;
    let (point, residual) = out.solution.ok_or_else(|| {
        Error::Precondition("start point is not attributable to any complementarity piece".into())
    })?;
    let status = if residual <= opts.tol {
        SolveStatus::Optimal
    } else {
        SolveStatus::Incomplete
    };
    Ok(SolveResult {
        status,
        value: inst.value(&point),
        point,
        patterns: patterns.clone(),
        stationarity_residual: residual,
        log: vec![PieceLog {
            patterns,
            status: out.status,
            value: None,
            method: out.method,
            certified: out.certified,
            starts: 1,
        }],
    })
}
