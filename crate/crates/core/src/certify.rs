//! Certificates for computed points: global and local equilibrium by
//! best-response solves, B-stationarity by branch LPs, strong stationarity
//! by multiplier LPs, second-order conditions on the critical cone, and the
//! relation between the potential problem's multipliers and the leaders'.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_normal::standard_normal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Lu};
use crate::lp::{Cmp, LinearProgram, LpOutcome};
use crate::model::{Formulation, Game, TAU_FEAS};
use crate::mpec::{build_best_response, solve_global, MpecInstance, SolveOptions, SolveStatus, TAU_STAT};
use crate::qp;

/// Largest biactive count whose branches are enumerated.
pub const MAX_BIACTIVE: usize = 20;
/// Default best-response gap tolerance.
pub const DEFAULT_EPS: f64 = 1e-6;
/// Residual bound for multiplier systems.
pub const MULTIPLIER_TOL: f64 = 1e-8;
/// Cone dimension up to which extreme rays are enumerated.
pub const MAX_EXACT_CONE_DIM: usize = 8;
pub const CONE_SAMPLES: usize = 10_000;
const MAX_RAYS: usize = 16;
const RAY_SUBSETS_LIMIT: usize = 50_000;
/// Multipliers at or below this are treated as zero in the critical cone.
const POSITIVE_MULTIPLIER: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Claim {
    GlobalEq,
    NotGlobalEq,
    LocalEq,
    NotLocalEq,
    BStationary,
    NashBStationary,
    NotBStationary,
    StrongStationary,
    NotStrongStationary,
    SecondOrderSs,
    NotSecondOrderSs,
    MultiplierTransfer,
    /// Cross multipliers vanish: consistent with an equilibrium of the
    /// original game.
    SharedMultiplierForm,
    /// Some leader needs a nonzero cross multiplier.
    ModifiedGameOnly,
    Inconclusive,
}

impl Claim {
    pub fn as_str(&self) -> &'static str {
        match self {
            Claim::GlobalEq => "global_eq",
            Claim::NotGlobalEq => "not_global_eq",
            Claim::LocalEq => "local_eq",
            Claim::NotLocalEq => "not_local_eq",
            Claim::BStationary => "b_stationary",
            Claim::NashBStationary => "nash_b_stationary",
            Claim::NotBStationary => "not_b_stationary",
            Claim::StrongStationary => "strong_stationary",
            Claim::NotStrongStationary => "not_strong_stationary",
            Claim::SecondOrderSs => "second_order_ss",
            Claim::NotSecondOrderSs => "not_second_order_ss",
            Claim::MultiplierTransfer => "multiplier_transfer",
            Claim::SharedMultiplierForm => "shared_multiplier_form",
            Claim::ModifiedGameOnly => "modified_game_only",
            Claim::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Claim {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Claim {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        use Claim::*;
        [
            GlobalEq, NotGlobalEq, LocalEq, NotLocalEq, BStationary, NashBStationary,
            NotBStationary, StrongStationary, NotStrongStationary, SecondOrderSs,
            NotSecondOrderSs, MultiplierTransfer, SharedMultiplierForm, ModifiedGameOnly,
            Inconclusive,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
        .ok_or_else(|| Error::Semantic(format!("unknown claim '{s}'")))
    }
}

/// Branch assignment at a point, per complementarity constraint: `i1` holds
/// indices whose `y_j ≥ 0` is kept as an inequality, `i2` those whose row
/// `G_j ≥ 0` is; biactive indices appear in both.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActivePattern {
    pub i1: Vec<Vec<usize>>,
    pub i2: Vec<Vec<usize>>,
    /// Active rows per linear block.
    pub active_rows: Vec<Vec<usize>>,
}

/// Multipliers of a stationarity system, laid out like the instance:
/// `eta[b]` for the rows of linear block `b` (leader X and Y sets),
/// `lambda[c]` for the bounds `y ≥ 0` of complementarity constraint `c` and
/// `beta[c]` for its rows `G ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Multipliers {
    pub eta: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl Multipliers {
    /// Multiplier of the equality `y_α = ŷ_α(x)` obtained by solving the
    /// active rows for `y`: `−M_ααᵀ β_α`, zero off `α`.
    pub fn equality_form(&self, inst: &MpecInstance, point: &[f64]) -> Vec<Vec<f64>> {
        inst.lcps
            .iter()
            .zip(&self.beta)
            .map(|(con, beta)| {
                let p = con.lcp.p();
                let alpha: Vec<usize> = (0..p).filter(|&j| point[con.y_vars[j]] > TAU_FEAS).collect();
                (0..p)
                    .map(|j| {
                        if !alpha.contains(&j) {
                            return 0.0;
                        }
                        -alpha.iter().map(|&k| con.lcp.m()[(k, j)] * beta[k]).sum::<f64>()
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Deviation {
    pub leader: usize,
    /// Full point with the leader's block replaced by its best response.
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub claim: Claim,
    pub gaps: Vec<f64>,
    pub deviations: Vec<Deviation>,
    pub multipliers: Option<Multipliers>,
    /// Per-leader multipliers; `beta[k]` belongs to leader `k`'s follower block.
    pub leader_multipliers: Vec<Multipliers>,
    pub pattern: Option<ActivePattern>,
    pub branches_checked: usize,
    pub tolerance: f64,
    pub residual: Option<f64>,
    /// Descent direction or cone witness, in ambient coordinates.
    pub direction: Option<Vec<f64>>,
    pub flags: Vec<String>,
    pub detail: String,
}

impl Certificate {
    fn new(claim: Claim, tolerance: f64) -> Self {
        Certificate {
            claim,
            gaps: Vec::new(),
            deviations: Vec::new(),
            multipliers: None,
            leader_multipliers: Vec::new(),
            pattern: None,
            branches_checked: 0,
            tolerance,
            residual: None,
            direction: None,
            flags: Vec::new(),
            detail: String::new(),
        }
    }
}

fn require_membership(game: &Game, point: &[f64]) -> Result<()> {
    if let Some(v) = game.membership_violation(point)? {
        return Err(Error::Precondition(format!(
            "point is not jointly feasible under formulation={}: {v}",
            game.formulation()
        )));
    }
    Ok(())
}

fn require_feasible(inst: &MpecInstance, point: &[f64]) -> Result<()> {
    if point.len() != inst.ambient_dim() {
        return Err(Error::dim(inst.ambient_dim(), point.len(), "point"));
    }
    if let Some(v) = inst.violation(point, TAU_FEAS) {
        return Err(Error::Precondition(format!("point violates {v}")));
    }
    Ok(())
}

// ---- equilibrium ------------------------------------------------------------

fn best_response_gaps(
    game: &Game,
    point: &[f64],
    eps: f64,
    radius: Option<f64>,
    opts: &SolveOptions,
) -> Result<Certificate> {
    require_membership(game, point)?;
    let mut cert = Certificate::new(Claim::GlobalEq, eps);
    let mut inconclusive = Vec::new();
    for i in 0..game.num_leaders() {
        let mut inst = build_best_response(game, i, point)?;
        if let Some(r) = radius {
            inst = inst.restrict_box(point, r);
        }
        let current = inst.value(point);
        let res = solve_global(&inst, opts)?;
        cert.branches_checked += res.log.len();
        match res.status {
            SolveStatus::Optimal => {
                let gap = (current - res.value).max(0.0);
                cert.gaps.push(gap);
                if gap > eps {
                    cert.deviations.push(Deviation { leader: i, point: res.point, value: res.value });
                }
            }
            SolveStatus::Unbounded => {
                cert.gaps.push(f64::INFINITY);
                cert.deviations.push(Deviation { leader: i, point: res.point, value: f64::NEG_INFINITY });
            }
            SolveStatus::Incomplete => {
                let gap = if res.value.is_finite() { (current - res.value).max(0.0) } else { f64::NAN };
                cert.gaps.push(gap);
                if gap > eps {
                    // a better point found by an uncertified search still disproves
                    cert.deviations.push(Deviation { leader: i, point: res.point, value: res.value });
                } else {
                    inconclusive.push(i);
                }
            }
            SolveStatus::Infeasible => {
                return Err(Error::Internal(format!(
                    "best response of leader {} is infeasible at a feasible point",
                    i + 1
                )));
            }
        }
    }
    if !cert.deviations.is_empty() {
        cert.claim = Claim::NotGlobalEq;
        let d = &cert.deviations[0];
        cert.detail = format!("leader {} improves to {}", d.leader + 1, d.value);
    } else if !inconclusive.is_empty() {
        cert.claim = Claim::Inconclusive;
        cert.flags.push("incomplete_best_response".into());
        cert.detail = format!(
            "best response of leader(s) {:?} not certified",
            inconclusive.iter().map(|i| i + 1).collect::<Vec<_>>()
        );
    }
    Ok(cert)
}

/// Global equilibrium test: every leader's global best response gains at
/// most `eps`.
pub fn verify_global(game: &Game, point: &[f64], eps: f64, opts: &SolveOptions) -> Result<Certificate> {
    best_response_gaps(game, point, eps, None, opts)
}

/// Local equilibrium test on the box of half-width `radius` around each
/// leader's block.
pub fn verify_local(game: &Game, point: &[f64], radius: f64, opts: &SolveOptions) -> Result<Certificate> {
    if !(radius > 0.0) {
        return Err(Error::Precondition("radius must be positive".into()));
    }
    let mut cert = best_response_gaps(game, point, TAU_STAT, Some(radius), opts)?;
    cert.claim = match cert.claim {
        Claim::GlobalEq => Claim::LocalEq,
        Claim::NotGlobalEq => Claim::NotLocalEq,
        c => c,
    };
    cert.flags.push(format!("radius={radius}"));
    Ok(cert)
}

// ---- point classification ---------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pair {
    /// `y_j > 0`, `G_j = 0`.
    Positive,
    /// `y_j = 0`, `G_j > 0`.
    Inactive,
    Biactive,
}

struct Classified {
    pairs: Vec<Vec<Pair>>,
    active_rows: Vec<Vec<usize>>,
    decision: Vec<usize>,
    column: Vec<Option<usize>>,
}

fn classify(inst: &MpecInstance, point: &[f64]) -> Classified {
    let pairs = inst
        .lcps
        .iter()
        .map(|con| {
            let g = con.g_at(point);
            con.y_vars
                .iter()
                .zip(&g)
                .map(|(&v, &gj)| match (point[v] > TAU_FEAS, gj > TAU_FEAS) {
                    (true, _) => Pair::Positive,
                    (false, true) => Pair::Inactive,
                    (false, false) => Pair::Biactive,
                })
                .collect()
        })
        .collect();
    let active_rows = inst
        .polyhedral
        .iter()
        .map(|b| {
            let sub: Vec<f64> = b.vars.iter().map(|&v| point[v]).collect();
            b.set.slacks(&sub).iter().enumerate().filter(|(_, &s)| s <= TAU_FEAS).map(|(r, _)| r).collect()
        })
        .collect();
    let decision = inst.decision_vars();
    let mut column = vec![None; inst.ambient_dim()];
    for (c, &v) in decision.iter().enumerate() {
        column[v] = Some(c);
    }
    Classified { pairs, active_rows, decision, column }
}

impl Classified {
    fn biactive(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (c, ps) in self.pairs.iter().enumerate() {
            for (j, &p) in ps.iter().enumerate() {
                if p == Pair::Biactive {
                    out.push((c, j));
                }
            }
        }
        out
    }

    fn pattern(&self) -> ActivePattern {
        let pick = |want: &[Pair]| -> Vec<Vec<usize>> {
            self.pairs
                .iter()
                .map(|ps| (0..ps.len()).filter(|&j| want.contains(&ps[j])).collect())
                .collect()
        };
        ActivePattern {
            i1: pick(&[Pair::Positive, Pair::Biactive]),
            i2: pick(&[Pair::Inactive, Pair::Biactive]),
            active_rows: self.active_rows.clone(),
        }
    }

    /// Row over decision columns; `None` if it touches no decision variable.
    fn dense(&self, coeffs: &[(usize, f64)]) -> Option<Vec<f64>> {
        let mut row = vec![0.0; self.decision.len()];
        let mut any = false;
        for &(v, a) in coeffs {
            if let Some(c) = self.column[v] {
                row[c] += a;
                any = any || a != 0.0;
            }
        }
        any.then_some(row)
    }
}

fn objective_gradient(inst: &MpecInstance, cl: &Classified, point: &[f64]) -> Vec<f64> {
    inst.objective.grad_at(&cl.decision, point)
}

fn ambient_direction(inst: &MpecInstance, cl: &Classified, d: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; inst.ambient_dim()];
    for (c, &v) in cl.decision.iter().enumerate() {
        out[v] = d[c];
    }
    out
}

// ---- B-stationarity -----------------------------------------------------------

/// Branch LPs `min ∇f·d` over the tangent cone pieces at `point`, each
/// intersected with the unit box.
pub fn check_b_stationary(inst: &MpecInstance, point: &[f64]) -> Result<Certificate> {
    require_feasible(inst, point)?;
    let cl = classify(inst, point);
    let bi = cl.biactive();
    if bi.len() > MAX_BIACTIVE {
        return Err(Error::Capability(format!(
            "{} biactive indices exceed the branch limit of {MAX_BIACTIVE}",
            bi.len()
        )));
    }
    let grad = objective_gradient(inst, &cl, point);
    let k = cl.decision.len();
    let mut cert = Certificate::new(Claim::BStationary, TAU_STAT);
    cert.pattern = Some(cl.pattern());
    let mut worst: Option<(f64, Vec<f64>)> = None;
    for mask in 0u64..(1u64 << bi.len()) {
        let mut lp = LinearProgram::minimize(grad.clone());
        for j in 0..k {
            lp.set_bounds(j, -1.0, 1.0);
        }
        for (b, block) in inst.polyhedral.iter().enumerate() {
            for &r in &cl.active_rows[b] {
                let coeffs: Vec<(usize, f64)> = block.vars.iter().cloned().zip(block.set.rows().nth(r).unwrap().0.iter().cloned()).collect();
                if let Some(row) = cl.dense(&coeffs) {
                    lp.add_row(row, Cmp::Ge, 0.0);
                }
            }
        }
        for (c, con) in inst.lcps.iter().enumerate() {
            for (j, &pair) in cl.pairs[c].iter().enumerate() {
                let y = cl.dense(&[(con.y_vars[j], 1.0)]);
                let g = cl.dense(&con.row(j).0);
                let branch = bi.iter().position(|&t| t == (c, j)).map(|q| mask >> q & 1 == 1);
                // (y stays 0, G may grow) or (G stays 0, y may grow)
                let (eq, ge) = match (pair, branch) {
                    (Pair::Positive, _) => (g, None),
                    (Pair::Inactive, _) => (y, None),
                    (Pair::Biactive, Some(false)) => (y, g),
                    (Pair::Biactive, _) => (g, y),
                };
                if let Some(row) = eq {
                    lp.add_row(row, Cmp::Eq, 0.0);
                }
                if let Some(row) = ge {
                    lp.add_row(row, Cmp::Ge, 0.0);
                }
            }
        }
        cert.branches_checked += 1;
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                if worst.as_ref().map_or(true, |w| value < w.0) {
                    worst = Some((value, x));
                }
            }
            // the origin is always feasible and the box bounds the LP
            LpOutcome::Infeasible | LpOutcome::Unbounded => {}
        }
    }
    if let Some((value, d)) = worst {
        cert.residual = Some(value);
        if value < -TAU_STAT {
            cert.claim = Claim::NotBStationary;
            cert.direction = Some(ambient_direction(inst, &cl, &d));
            cert.detail = format!("descent direction with slope {value:.6e}");
        }
    }
    Ok(cert)
}

/// Per-leader B-stationarity over each leader's own feasible set.
pub fn check_nash_b_stationary(game: &Game, point: &[f64]) -> Result<Certificate> {
    require_membership(game, point)?;
    let mut cert = Certificate::new(Claim::NashBStationary, TAU_STAT);
    let mut worst = 0.0f64;
    for i in 0..game.num_leaders() {
        let inst = build_best_response(game, i, point)?;
        let c = check_b_stationary(&inst, point)?;
        cert.branches_checked += c.branches_checked;
        let v = c.residual.unwrap_or(0.0);
        cert.gaps.push(v);
        worst = worst.min(v);
        if c.claim == Claim::NotBStationary && cert.claim != Claim::NotBStationary {
            cert.claim = Claim::NotBStationary;
            cert.direction = c.direction;
            cert.detail = format!("leader {} has a descent direction with slope {v:.6e}", i + 1);
        }
    }
    cert.residual = Some(worst);
    Ok(cert)
}

// ---- multiplier systems -------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Sign {
    Zero,
    Free,
    NonNeg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Eta(usize, usize),
    Lambda(usize, usize),
    Beta(usize, usize),
}

struct MultVar {
    slot: Slot,
    sign: Sign,
    /// Stationarity coefficients over decision columns.
    coeffs: Vec<f64>,
}

/// The strong-stationarity system at the point-induced pattern:
/// `∇f = Σ η a + Σ λ e_y + Σ β ∇G` over decision columns.
struct System {
    grad: Vec<f64>,
    vars: Vec<MultVar>,
    shape: Multipliers,
}

fn system(inst: &MpecInstance, point: &[f64], cl: &Classified) -> System {
    let grad = objective_gradient(inst, cl, point);
    let k = cl.decision.len();
    let mut vars = Vec::new();
    let mut shape = Multipliers { eta: Vec::new(), lambda: Vec::new(), beta: Vec::new() };
    for (b, block) in inst.polyhedral.iter().enumerate() {
        shape.eta.push(vec![0.0; block.set.num_rows()]);
        for (r, (row, _)) in block.set.rows().enumerate() {
            let active = cl.active_rows[b].contains(&r);
            let coeffs: Vec<(usize, f64)> = block.vars.iter().cloned().zip(row.iter().cloned()).collect();
            vars.push(MultVar {
                slot: Slot::Eta(b, r),
                sign: if active { Sign::NonNeg } else { Sign::Zero },
                coeffs: cl.dense(&coeffs).unwrap_or_else(|| vec![0.0; k]),
            });
        }
    }
    for (c, con) in inst.lcps.iter().enumerate() {
        let p = con.lcp.p();
        shape.lambda.push(vec![0.0; p]);
        shape.beta.push(vec![0.0; p]);
        for j in 0..p {
            let (ls, bs) = match cl.pairs[c][j] {
                Pair::Positive => (Sign::Zero, Sign::Free),
                Pair::Inactive => (Sign::Free, Sign::Zero),
                Pair::Biactive => (Sign::NonNeg, Sign::NonNeg),
            };
            let y = cl.dense(&[(con.y_vars[j], 1.0)]);
            // a fixed y carries no stationarity row, so its bound multiplier is moot
            vars.push(MultVar {
                slot: Slot::Lambda(c, j),
                sign: if y.is_some() { ls } else { Sign::Zero },
                coeffs: y.unwrap_or_else(|| vec![0.0; k]),
            });
            vars.push(MultVar {
                slot: Slot::Beta(c, j),
                sign: bs,
                coeffs: cl.dense(&con.row(j).0).unwrap_or_else(|| vec![0.0; k]),
            });
        }
    }
    System { grad, vars, shape }
}

impl System {
    fn get(m: &Multipliers, slot: Slot) -> f64 {
        match slot {
            Slot::Eta(b, r) => m.eta[b][r],
            Slot::Lambda(c, j) => m.lambda[c][j],
            Slot::Beta(c, j) => m.beta[c][j],
        }
    }

    fn set(m: &mut Multipliers, slot: Slot, v: f64) {
        match slot {
            Slot::Eta(b, r) => m.eta[b][r] = v,
            Slot::Lambda(c, j) => m.lambda[c][j] = v,
            Slot::Beta(c, j) => m.beta[c][j] = v,
        }
    }

    /// Stationarity error plus sign and complementarity violations.
    fn residual(&self, m: &Multipliers) -> f64 {
        let mut r = self.grad.clone();
        let mut worst = 0.0f64;
        for var in &self.vars {
            let v = Self::get(m, var.slot);
            for (ri, ci) in r.iter_mut().zip(&var.coeffs) {
                *ri -= v * ci;
            }
            worst = worst.max(match var.sign {
                Sign::Zero => v.abs(),
                Sign::NonNeg => (-v).max(0.0),
                Sign::Free => 0.0,
            });
        }
        r.iter().fold(worst, |a, b| a.max(b.abs()))
    }

    /// Minimum-L1 multipliers, optionally also minimising the largest
    /// magnitude among `penalised` slots; `None` when infeasible.
    fn solve(&self, penalised: &dyn Fn(Slot) -> bool) -> Option<(Multipliers, f64)> {
        let k = self.grad.len();
        // columns: (+, −) per free var, one per nonneg var, then t
        let mut cols: Vec<(usize, f64)> = Vec::new();
        for (i, v) in self.vars.iter().enumerate() {
            match v.sign {
                Sign::Zero => {}
                Sign::NonNeg => cols.push((i, 1.0)),
                Sign::Free => {
                    cols.push((i, 1.0));
                    cols.push((i, -1.0));
                }
            }
        }
        let any_pen = self.vars.iter().any(|v| v.sign != Sign::Zero && penalised(v.slot));
        let nt = cols.len();
        let mut obj = vec![if any_pen { 1e-6 } else { 1.0 }; nt];
        if any_pen {
            obj.push(1.0);
        }
        let mut lp = LinearProgram::minimize(obj);
        for c in 0..lp.num_vars() {
            lp.set_bounds(c, 0.0, f64::INFINITY);
        }
        for row in 0..k {
            let coeffs: Vec<f64> = cols
                .iter()
                .map(|&(i, s)| s * self.vars[i].coeffs[row])
                .chain(any_pen.then_some(0.0))
                .collect();
            lp.add_row(coeffs, Cmp::Eq, self.grad[row]);
        }
        if any_pen {
            for (ci, &(i, s)) in cols.iter().enumerate() {
                if penalised(self.vars[i].slot) && s > 0.0 {
                    // t ≥ |v| with v = v⁺ − v⁻ (or v ≥ 0)
                    for sign in [1.0, -1.0] {
                        let mut row = vec![0.0; nt + 1];
                        row[ci] = sign;
                        if self.vars[i].sign == Sign::Free {
                            row[ci + 1] = -sign;
                        }
                        row[nt] = 1.0;
                        lp.add_row(row, Cmp::Ge, 0.0);
                    }
                }
            }
        }
        let (x, _) = match lp.solve() {
            LpOutcome::Optimal { x, value } => (x, value),
            _ => return None,
        };
        let mut m = self.shape.clone();
        for (ci, &(i, s)) in cols.iter().enumerate() {
            let cur = Self::get(&m, self.vars[i].slot);
            Self::set(&mut m, self.vars[i].slot, cur + s * x[ci]);
        }
        let t = if any_pen { x[nt] } else { 0.0 };
        Some((m, t))
    }
}

/// Solves the strong-stationarity system at the point-induced pattern.
pub fn check_strong_stationary(inst: &MpecInstance, point: &[f64]) -> Result<Certificate> {
    require_feasible(inst, point)?;
    let cl = classify(inst, point);
    let sys = system(inst, point, &cl);
    let mut cert = Certificate::new(Claim::StrongStationary, MULTIPLIER_TOL);
    cert.pattern = Some(cl.pattern());
    cert.branches_checked = 1;
    match sys.solve(&|_| false) {
        Some((m, _)) => {
            let res = sys.residual(&m);
            cert.residual = Some(res);
            if res > MULTIPLIER_TOL {
                cert.claim = Claim::NotStrongStationary;
                cert.detail = format!("multiplier residual {res:.3e} exceeds {MULTIPLIER_TOL:e}");
            }
            cert.multipliers = Some(m);
        }
        None => {
            cert.claim = Claim::NotStrongStationary;
            cert.detail = "multiplier system infeasible at the point-induced pattern".into();
        }
    }
    Ok(cert)
}

/// Residual of a given multiplier set in the instance's system at `point`.
pub fn multiplier_residual(inst: &MpecInstance, point: &[f64], m: &Multipliers) -> Result<f64> {
    require_feasible(inst, point)?;
    let cl = classify(inst, point);
    let sys = system(inst, point, &cl);
    let shape_ok = m.eta.len() == sys.shape.eta.len()
        && m.lambda.len() == sys.shape.lambda.len()
        && m.beta.len() == sys.shape.beta.len()
        && m.eta.iter().zip(&sys.shape.eta).all(|(a, b)| a.len() == b.len())
        && m.beta.iter().zip(&sys.shape.beta).all(|(a, b)| a.len() == b.len())
        && m.lambda.iter().zip(&sys.shape.lambda).all(|(a, b)| a.len() == b.len());
    if !shape_ok {
        return Err(Error::Contract("multipliers do not match the instance layout".into()));
    }
    Ok(sys.residual(m))
}

/// Leader multipliers from those of the potential problem: each leader
/// keeps its own X, Y and bound multipliers and takes `β_k` for every
/// follower block `k`. Re-verified against each leader's system.
pub fn transfer_multipliers(
    game: &Game,
    ae_instance: &MpecInstance,
    point: &[f64],
    cert: &Certificate,
) -> Result<Certificate> {
    let m = match (&cert.claim, &cert.multipliers) {
        (Claim::StrongStationary, Some(m)) => m,
        _ => {
            return Err(Error::Precondition(
                "transfer needs a strong-stationarity certificate with multipliers".into(),
            ))
        }
    };
    let game = game.with_formulation(Formulation::Ae)?;
    let mut out = Certificate::new(Claim::MultiplierTransfer, MULTIPLIER_TOL);
    let mut worst = 0.0f64;
    for i in 0..game.num_leaders() {
        let br = build_best_response(&game, i, point)?;
        let mut lm = Multipliers { eta: Vec::new(), lambda: Vec::new(), beta: Vec::new() };
        for block in &br.polyhedral {
            let src = ae_instance
                .polyhedral
                .iter()
                .position(|b| b.vars == block.vars && b.set == block.set)
                .ok_or_else(|| Error::Contract("leader block missing from the potential problem".into()))?;
            lm.eta.push(m.eta[src].clone());
        }
        for con in &br.lcps {
            let src = ae_instance
                .lcps
                .iter()
                .position(|c| c.y_vars == con.y_vars)
                .ok_or_else(|| Error::Contract("follower block missing from the potential problem".into()))?;
            lm.beta.push(m.beta[src].clone());
            // rival bounds carry no multiplier in a leader's own problem
            let own = con.y_vars.iter().all(|&v| br.fixed[v].is_none());
            lm.lambda.push(if own { m.lambda[src].clone() } else { vec![0.0; con.lcp.p()] });
        }
        let r = multiplier_residual(&br, point, &lm)?;
        worst = worst.max(r);
        out.leader_multipliers.push(lm);
    }
    out.residual = Some(worst);
    out.multipliers = Some(m.clone());
    if worst > MULTIPLIER_TOL {
        return Err(Error::Internal(format!(
            "transferred multipliers leave residual {worst:.3e}"
        )));
    }
    Ok(out)
}

/// Smallest achievable `max_{k≠i} |β̄_i^k|` over every leader's system at
/// the point; zero means the point's multipliers have the form required
/// for an equilibrium of the game without shared constraints.
pub fn check_shared_multiplier_form(game: &Game, point: &[f64]) -> Result<Certificate> {
    let game = game.with_formulation(Formulation::Ae)?;
    require_membership(&game, point)?;
    let mut cert = Certificate::new(Claim::SharedMultiplierForm, MULTIPLIER_TOL);
    for i in 0..game.num_leaders() {
        let br = build_best_response(&game, i, point)?;
        if !convex_on_piece(&br, point) {
            cert.claim = Claim::Inconclusive;
            cert.detail = format!("leader {} objective is not convex on its piece", i + 1);
            return Ok(cert);
        }
    }
    let mut worst = 0.0f64;
    for i in 0..game.num_leaders() {
        let br = build_best_response(&game, i, point)?;
        let cl = classify(&br, point);
        let sys = system(&br, point, &cl);
        // constraint k of the leader's problem belongs to leader k
        let cross = |s: Slot| matches!(s, Slot::Beta(c, _) if c != i);
        match sys.solve(&cross) {
            Some((m, t)) => {
                let res = sys.residual(&m);
                if res > MULTIPLIER_TOL {
                    cert.claim = Claim::Inconclusive;
                    cert.detail = format!("leader {} multiplier residual {res:.3e}", i + 1);
                    return Ok(cert);
                }
                let t = m
                    .beta
                    .iter()
                    .enumerate()
                    .filter(|&(c, _)| c != i)
                    .flat_map(|(_, b)| b.iter().map(|v| v.abs()))
                    .fold(0.0f64, f64::max)
                    .max(t.min(0.0));
                cert.gaps.push(t);
                worst = worst.max(t);
                cert.leader_multipliers.push(m);
            }
            None => {
                cert.claim = Claim::Inconclusive;
                cert.detail = format!(
                    "leader {} has no strong-stationarity multipliers at the point-induced pattern",
                    i + 1
                );
                return Ok(cert);
            }
        }
    }
    cert.residual = Some(worst);
    if worst > MULTIPLIER_TOL {
        cert.claim = Claim::ModifiedGameOnly;
        cert.detail = format!("cross multipliers need magnitude {worst:.6e}");
    }
    Ok(cert)
}

/// Hessian PSD on the affine hull of the pieces through the point; biactive
/// pairs and active inequality rows are left free, so every adjacent piece
/// is covered.
fn convex_on_piece(inst: &MpecInstance, point: &[f64]) -> bool {
    let cl = classify(inst, point);
    let sys = system(inst, point, &cl);
    let k = cl.decision.len();
    let rows: Vec<&Vec<f64>> = sys.vars.iter().filter(|v| v.sign == Sign::Free).map(|v| &v.coeffs).collect();
    let e = DMatrix::from_fn(rows.len(), k, |r, c| rows[r][c]);
    let z = linalg::null_space(&e);
    if z.ncols() == 0 {
        return true;
    }
    let hp = inst.objective.hessian(&cl.decision);
    let h = DMatrix::from_fn(k, k, |r, c| hp[r][c].eval_unchecked(point));
    linalg::is_psd(&(z.transpose() * h * &z))
}

// ---- second order -------------------------------------------------------------

/// `sᵀ H s > 0` on the critical cone at a strongly stationary point, with
/// `H` the Hessian of the objective (constraints are affine).
pub fn check_second_order_ss(
    inst: &MpecInstance,
    point: &[f64],
    mult: &Multipliers,
    seed: u64,
) -> Result<Certificate> {
    let res = multiplier_residual(inst, point, mult)?;
    if res > MULTIPLIER_TOL {
        return Err(Error::Precondition(format!(
            "multipliers do not certify strong stationarity (residual {res:.3e})"
        )));
    }
    let cl = classify(inst, point);
    let sys = system(inst, point, &cl);
    let k = cl.decision.len();
    let hp = inst.objective.hessian(&cl.decision);
    let h = DMatrix::from_fn(k, k, |r, c| hp[r][c].eval_unchecked(point));
    let mut eq: Vec<Vec<f64>> = vec![sys.grad.clone()];
    let mut ge: Vec<Vec<f64>> = Vec::new();
    for var in &sys.vars {
        if var.coeffs.iter().all(|&c| c == 0.0) {
            continue;
        }
        let v = System::get(mult, var.slot);
        let binding = match (var.slot, var.sign) {
            (_, Sign::Zero) => continue,
            // equality of the relaxed program
            (_, Sign::Free) => true,
            (_, Sign::NonNeg) => v > POSITIVE_MULTIPLIER,
        };
        if binding {
            eq.push(var.coeffs.clone());
        } else {
            ge.push(var.coeffs.clone());
        }
    }
    let e = DMatrix::from_fn(eq.len(), k, |r, c| eq[r][c]);
    let a = DMatrix::from_fn(ge.len(), k, |r, c| ge[r][c]);
    let mut cert = Certificate::new(Claim::SecondOrderSs, 0.0);
    cert.multipliers = Some(mult.clone());
    cert.pattern = Some(cl.pattern());
    match cone_positivity(&h, &e, &a, seed) {
        ConeResult::Positive { sampled, rays } => {
            cert.branches_checked = rays;
            if sampled {
                cert.flags.push("sampled".into());
            }
        }
        ConeResult::Witness { s, value, sampled } => {
            cert.claim = Claim::NotSecondOrderSs;
            cert.direction = Some(ambient_direction(inst, &cl, s.as_slice()));
            cert.residual = Some(value);
            cert.detail = format!("critical direction with curvature {value:.6e}");
            if sampled {
                cert.flags.push("sampled".into());
            }
        }
    }
    Ok(cert)
}

enum ConeResult {
    Positive { sampled: bool, rays: usize },
    Witness { s: DVector<f64>, value: f64, sampled: bool },
}

fn curvature_tol(h: &DMatrix<f64>) -> f64 {
    1e-10 * h.amax().max(1.0)
}

/// Strict positivity of `sᵀHs` on `{s ≠ 0 : E s = 0, A s ≥ 0}`.
fn cone_positivity(h: &DMatrix<f64>, e: &DMatrix<f64>, a: &DMatrix<f64>, seed: u64) -> ConeResult {
    let z = linalg::null_space(e);
    let k = z.ncols();
    if k == 0 {
        return ConeResult::Positive { sampled: false, rays: 0 };
    }
    let hr = z.transpose() * h * &z;
    let ar = a * &z;
    let tol = curvature_tol(h);
    // lineality space and its orthogonal complement
    let l = linalg::null_space(&ar);
    let hl = l.transpose() * &hr * &l;
    if l.ncols() > 0 {
        let eig = nalgebra::SymmetricEigen::new(0.5 * (&hl + hl.transpose()));
        let (idx, &min) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.total_cmp(y.1))
            .expect("nonempty");
        if min <= tol {
            let s = &z * &l * eig.eigenvectors.column(idx);
            return ConeResult::Witness { s, value: min, sampled: false };
        }
    }
    let p = if l.ncols() == 0 {
        DMatrix::identity(k, k)
    } else {
        linalg::null_space(&l.transpose())
    };
    let q = p.ncols();
    if q == 0 {
        return ConeResult::Positive { sampled: false, rays: 0 };
    }
    let b = &ar * &p;
    let rays = if q <= MAX_EXACT_CONE_DIM { extreme_rays(&b) } else { None };
    let Some(rays) = rays.filter(|r| r.len() <= MAX_RAYS) else {
        return sampled_check(&hr, &ar, &z, tol, seed);
    };
    if rays.is_empty() {
        return ConeResult::Positive { sampled: false, rays: 0 };
    }
    // minimise over the lineality part: Schur complement of LᵀHL
    let hp = p.transpose() * &hr * &p;
    let schur = if l.ncols() == 0 {
        hp
    } else {
        let cross = p.transpose() * &hr * &l;
        let inv = Lu::new(&hl).expect("positive definite").solve_matrix(&cross.transpose());
        hp - &cross * inv
    };
    let r = DMatrix::from_columns(&rays);
    let qm = r.transpose() * &schur * &r;
    match simplex_minimum(&qm) {
        Some((mu, value)) if value <= tol => {
            let u = &r * &mu;
            let mut s = &z * &p * &u;
            if l.ncols() > 0 {
                let cross = l.transpose() * &hr * &p * &u;
                let w = -Lu::new(&hl).expect("positive definite").solve(&cross);
                s += &z * &l * w;
            }
            let nrm = s.norm().max(f64::MIN_POSITIVE);
            ConeResult::Witness { value: (s.transpose() * h * &s)[(0, 0)] / (nrm * nrm), s: s / nrm, sampled: false }
        }
        _ => ConeResult::Positive { sampled: false, rays: rays.len() },
    }
}

/// Extreme rays of the pointed cone `{u : B u ≥ 0}`, unit length;
/// `None` when the enumeration would be too large.
fn extreme_rays(b: &DMatrix<f64>) -> Option<Vec<DVector<f64>>> {
    let q = b.ncols();
    let m = b.nrows();
    let rows: Vec<usize> = (0..m).filter(|&r| b.row(r).norm() > 1e-12).collect();
    let need = q - 1;
    let mut count = 1usize;
    for s in 0..need {
        count = count.checked_mul(rows.len().saturating_sub(s))? / (s + 1);
        if count > RAY_SUBSETS_LIMIT {
            return None;
        }
    }
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut subset = Vec::with_capacity(need);
    fn rec(
        b: &DMatrix<f64>,
        rows: &[usize],
        need: usize,
        from: usize,
        subset: &mut Vec<usize>,
        out: &mut Vec<DVector<f64>>,
    ) {
        if subset.len() == need {
            let sub = DMatrix::from_fn(need, b.ncols(), |r, c| b[(subset[r], c)]);
            let ns = linalg::null_space(&sub);
            if ns.ncols() != 1 {
                return;
            }
            let u = ns.column(0).into_owned();
            for cand in [u.clone(), -u] {
                let slack = b * &cand;
                if slack.iter().all(|&v| v >= -1e-10) && !out.iter().any(|r| (r - &cand).amax() < 1e-8) {
                    out.push(cand);
                }
            }
            return;
        }
        for i in from..rows.len() {
            subset.push(rows[i]);
            rec(b, rows, need, i + 1, subset, out);
            subset.pop();
        }
    }
    rec(b, &rows, need, 0, &mut subset, &mut out);
    Some(out)
}

/// `min μᵀQμ` over the unit simplex, by the stationary points of every
/// face; the minimiser is stationary on the face it lies in, and a
/// singular face passes its value down to a smaller face.
fn simplex_minimum(q: &DMatrix<f64>) -> Option<(DVector<f64>, f64)> {
    let r = q.nrows();
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 1u32..(1u32 << r) {
        let idx: Vec<usize> = (0..r).filter(|&j| mask >> j & 1 == 1).collect();
        let n = idx.len();
        let mut kkt = DMatrix::zeros(n + 1, n + 1);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                kkt[(a, b)] = q[(i, j)];
            }
            kkt[(a, n)] = -1.0;
            kkt[(n, a)] = 1.0;
        }
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        let Some(lu) = Lu::new(&kkt) else { continue };
        let sol = lu.solve(&rhs);
        if (0..n).any(|a| sol[a] < -1e-12) {
            continue;
        }
        let mut mu = DVector::zeros(r);
        for (a, &i) in idx.iter().enumerate() {
            mu[i] = sol[a].max(0.0);
        }
        let value = (mu.transpose() * q * &mu)[(0, 0)];
        if best.as_ref().map_or(true, |b| value < b.1) {
            best = Some((mu, value));
        }
    }
    best
}

fn sampled_check(hr: &DMatrix<f64>, ar: &DMatrix<f64>, z: &DMatrix<f64>, tol: f64, seed: u64) -> ConeResult {
    let k = hr.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = DVector::zeros(k);
    let b = DVector::zeros(ar.nrows());
    for _ in 0..CONE_SAMPLES {
        let g = DVector::from_fn(k, |_, _| standard_normal(&mut rng));
        let t = qp::project(ar, &b, &g, &zero);
        let n = t.norm();
        if n < 1e-9 {
            continue;
        }
        let t = t / n;
        let v = (t.transpose() * hr * &t)[(0, 0)];
        if v <= tol {
            return ConeResult::Witness { s: z * t, value: v, sampled: true };
        }
    }
    ConeResult::Positive { sampled: true, rays: 0 }
}

mod rand_distr_normal {
    use rand::Rng;

    /// Box–Muller.
    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}
