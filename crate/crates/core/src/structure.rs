//! Potential, quasi-potential and implicit-potential structure.

use std::collections::VecDeque;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lcp::{enumerate_pieces, is_single_valued, Pattern, Piece};
use crate::lp::{Cmp, LinearProgram};
use crate::model::{Game, Polyhedron, VariableLayout};
use crate::poly::Polynomial;

/// Coefficient tolerance of the symbolic identity tests.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance on piecewise potential differences at sampled boundary points.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    Potential,
    QuasiPotential,
    ImplicitPotential,
    None,
}

/// Where an identity test failed. Leaders are 0-based; `vars` are ambient
/// slots of the polynomial space the test ran in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub leaders: (usize, usize),
    pub vars: (usize, usize),
    pub monomial: Vec<u32>,
    pub difference: f64,
    pub detail: String,
}

/// Potential of one solution-map piece, already shifted by its offset.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecePotential {
    pub alpha: Pattern,
    pub pi: Polynomial,
    pub piece: Piece,
}

#[derive(Clone, Debug)]
pub struct StructureReport {
    pub kind: StructureKind,
    /// In the game layout (potential), the quasi layout (quasi-potential) or
    /// x only (implicit potential, see `pieces`).
    pub pi: Option<Polynomial>,
    pub h: Option<Polynomial>,
    pub witness: Option<Witness>,
    pub reason: Option<String>,
    pub pieces: Vec<PiecePotential>,
    /// The boundary check of the implicit case is sampled rather than proved.
    pub sampled: bool,
}

impl StructureReport {
    fn none(reason: impl Into<String>, witness: Option<Witness>) -> Self {
        StructureReport {
            kind: StructureKind::None,
            pi: None,
            h: None,
            witness,
            reason: Some(reason.into()),
            pieces: Vec::new(),
            sampled: false,
        }
    }
}

/// Checks `∂F_a/∂z_b ≡ ∂F_b/∂z_a` over `vars`; `owner` maps a slot to its leader.
fn symmetry_witness(
    field: &[(usize, Polynomial)],
    owner: impl Fn(usize) -> usize,
) -> Option<Witness> {
    for (ia, (a, fa)) in field.iter().enumerate() {
        for (b, fb) in field.iter().skip(ia + 1) {
            let dab = fa.partial(*b);
            let dba = fb.partial(*a);
            if let Some((mono, diff)) = dab.first_difference(&dba, SYMMETRY_TOL) {
                return Some(Witness {
                    leaders: (owner(*a), owner(*b)),
                    vars: (*a, *b),
                    monomial: mono,
                    difference: diff,
                    detail: format!(
                        "dF_{a}/dz_{b} differs from dF_{b}/dz_{a}",
                        a = a + 1,
                        b = b + 1
                    ),
                });
            }
        }
    }
    None
}

/// The field `F` over the listed `(slot, objective)` pairs: `F_a = ∂φ/∂z_a`.
fn field_of(slots: &[(usize, &Polynomial)]) -> Vec<(usize, Polynomial)> {
    slots.iter().map(|&(a, phi)| (a, phi.partial(a))).collect()
}

/// Exact line integral `∫₀¹ F(tz)·z dt` of a symmetric field. Slots missing
/// from `field` are treated as `F_a = 0`.
pub fn construct_potential(field: &[(usize, Polynomial)], arity: usize) -> Result<Polynomial> {
    if let Some(w) = symmetry_witness(field, |_| 0) {
        return Err(Error::Contract(format!(
            "potential construction needs a symmetric Jacobian; {}",
            w.detail
        )));
    }
    let mut pi = Polynomial::zero(arity);
    for (a, fa) in field {
        if fa.arity() != arity {
            return Err(Error::dim(arity, fa.arity(), "field component"));
        }
        for (exps, c) in fa.terms() {
            let d: u32 = exps.iter().sum();
            let mut e = exps.to_vec();
            e[*a] += 1;
            pi = &pi + &Polynomial::monomial(arity, e, c / (d as f64 + 1.0))?;
        }
    }
    Ok(pi)
}

/// Field over every leader-owned slot of the game layout.
fn game_field(game: &Game) -> Vec<(usize, Polynomial)> {
    let lay = game.layout();
    let mut slots = Vec::new();
    for i in 0..game.num_leaders() {
        let phi = &game.leader(i).objective;
        for a in lay.x_range(i).chain(lay.y_range(i)) {
            slots.push((a, phi));
        }
    }
    slots.sort_by_key(|s| s.0);
    field_of(&slots)
}

pub fn detect_potential(game: &Game) -> StructureReport {
    let lay = game.layout();
    let field = game_field(game);
    let owner = |k: usize| lay.owner(k).map(|o| o.0).unwrap_or(0);
    if let Some(w) = symmetry_witness(&field, owner) {
        let names = lay.names();
        let reason = format!(
            "Jacobian of the leader gradient field is not symmetric in ({}, {})",
            names[w.vars.0], names[w.vars.1]
        );
        return StructureReport::none(reason, Some(w));
    }
    let pi = construct_potential(&field, lay.n()).expect("symmetry checked");
    StructureReport {
        kind: StructureKind::Potential,
        pi: Some(pi),
        h: None,
        witness: None,
        reason: None,
        pieces: Vec::new(),
        sampled: false,
    }
}

pub fn detect_quasi_potential(game: &Game) -> StructureReport {
    let lay = game.layout();
    let nl = game.num_leaders();
    let quasi = VariableLayout::quasi(lay.m().to_vec(), lay.p());
    let nq = quasi.n();
    for i in 1..nl {
        if game.leader(i).y_set != game.leader(0).y_set {
            return StructureReport::none(
                format!("Y_{} differs from Y_1; the follower sets must coincide", i + 1),
                None,
            );
        }
    }
    // map game slots to quasi slots: x stays, every y_i block lands on w
    let mut xs = Vec::with_capacity(nl);
    let mut hs = Vec::with_capacity(nl);
    for i in 0..nl {
        let phi = &game.leader(i).objective;
        let yi: Vec<usize> = lay.y_range(i).collect();
        let (touching, rest) = phi.split_by_vars(&yi);
        let mut map: Vec<Option<usize>> = vec![None; lay.n()];
        for k in lay.x_all() {
            map[k] = Some(k);
        }
        for (off, k) in lay.y_range(i).enumerate() {
            map[k] = Some(quasi.y_range(0).start + off);
        }
        let h = touching.reindex(&map, nq).expect("objective only uses own y block");
        let x = rest.reindex(&map, nq).expect("objective only uses own y block");
        xs.push(x);
        hs.push(h);
    }
    for i in 1..nl {
        if let Some((mono, diff)) = hs[i].first_difference(&hs[0], SYMMETRY_TOL) {
            let names = quasi.names();
            let shown = Polynomial::monomial(nq, mono.clone(), 1.0).expect("valid monomial");
            return StructureReport::none(
                format!(
                    "the y-dependent parts of leaders 1 and {} differ after renaming y to w (h_1 = {}, h_{} = {}; coefficient of {} differs)",
                    i + 1,
                    hs[0].display_with(&names),
                    i + 1,
                    hs[i].display_with(&names),
                    shown.display_with(&names),
                ),
                Some(Witness {
                    leaders: (0, i),
                    vars: (quasi.y_range(0).start, quasi.y_range(0).start),
                    monomial: mono,
                    difference: diff,
                    detail: "h mismatch".into(),
                }),
            );
        }
    }
    let slots: Vec<(usize, &Polynomial)> = (0..nl)
        .flat_map(|i| lay.x_range(i).map(move |a| (a, i)))
        .map(|(a, i)| (a, &xs[i]))
        .collect();
    let field = field_of(&slots);
    let owner = |k: usize| quasi.owner(k).map(|o| o.0).unwrap_or(0);
    if let Some(w) = symmetry_witness(&field, owner) {
        let names = quasi.names();
        let reason = format!(
            "x-parts are not a potential family: Jacobian asymmetric in ({}, {})",
            names[w.vars.0], names[w.vars.1]
        );
        return StructureReport::none(reason, Some(w));
    }
    let pi = construct_potential(&field, nq).expect("symmetry checked");
    StructureReport {
        kind: StructureKind::QuasiPotential,
        pi: Some(pi),
        h: Some(hs.swap_remove(0)),
        witness: None,
        reason: None,
        pieces: Vec::new(),
        sampled: false,
    }
}

/// Objectives of the implicit game on one piece: every `y_i` replaced by the
/// piece's affine map, giving polynomials in x.
pub fn substitute_piece(game: &Game, piece: &Piece) -> Vec<Polynomial> {
    let lay = game.layout();
    let nx = lay.x_dim();
    let n = lay.n();
    let mut images: Vec<Polynomial> = (0..nx).map(|k| Polynomial::var(nx, k)).collect();
    images.resize(n, Polynomial::zero(nx));
    for i in 0..game.num_leaders() {
        for (off, k) in lay.y_range(i).enumerate() {
            let coeffs: Vec<f64> = piece.coef_x.row(off).iter().cloned().collect();
            images[k] = Polynomial::linear(&coeffs, piece.offset[off]);
        }
    }
    game.leaders()
        .iter()
        .map(|l| compose(&l.objective, &images, nx))
        .collect()
}

fn compose(p: &Polynomial, images: &[Polynomial], arity: usize) -> Polynomial {
    let mut out = Polynomial::zero(arity);
    for (exps, c) in p.terms() {
        let mut term = Polynomial::constant(arity, c);
        for (k, &e) in exps.iter().enumerate() {
            if e > 0 {
                term = &term * &images[k].pow(e);
            }
        }
        out = &out + &term;
    }
    out
}

pub fn detect_implicit_potential(game: &Game) -> Result<StructureReport> {
    let lay = game.layout();
    let nx = lay.x_dim();
    let (single, why) = is_single_valued(game.follower(), &Polyhedron::whole_space(nx));
    if !single {
        return Err(Error::Capability(format!(
            "implicit potential needs a single-valued follower map: {why}"
        )));
    }
    let pieces: Vec<Piece> = enumerate_pieces(game.follower())?
        .into_iter()
        .filter(|p| p.full_dimensional)
        .collect();
    let xlay = VariableLayout::new(lay.m().to_vec(), 0);
    let owner = |k: usize| xlay.owner(k).map(|o| o.0).unwrap_or(0);
    let mut raw = Vec::new();
    for piece in &pieces {
        let objs = substitute_piece(game, piece);
        let slots: Vec<(usize, &Polynomial)> = (0..game.num_leaders())
            .flat_map(|i| lay.x_range(i).map(move |a| (a, i)))
            .map(|(a, i)| (a, &objs[i]))
            .collect();
        let field = field_of(&slots);
        if let Some(w) = symmetry_witness(&field, owner) {
            return Ok(StructureReport::none(
                format!(
                    "substituted objectives on piece {} have an asymmetric Jacobian",
                    piece.alpha
                ),
                Some(w),
            ));
        }
        raw.push(construct_potential(&field, nx)?);
    }
    // constant offsets between adjacent pieces, fixed by BFS from the first
    let k = pieces.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut diffs: Vec<Vec<Option<f64>>> = vec![vec![None; k]; k];
    for a in 0..k {
        for b in (a + 1)..k {
            let shared = pieces[a].validity.intersect(&pieces[b].validity);
            let samples = sample_polyhedron(&shared, 8, &mut rng);
            if samples.is_empty() {
                continue;
            }
            let d: Vec<f64> = samples
                .iter()
                .map(|x| raw[b].eval_unchecked(x) - raw[a].eval_unchecked(x))
                .collect();
            let spread = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - d.iter().cloned().fold(f64::INFINITY, f64::min);
            if spread > BOUNDARY_TOL {
                return Ok(StructureReport::none(
                    format!(
                        "piece potentials on {} and {} do not differ by a constant on their shared boundary (spread {spread:.3e})",
                        pieces[a].alpha, pieces[b].alpha
                    ),
                    None,
                ));
            }
            diffs[a][b] = Some(d[0]);
            diffs[b][a] = Some(-d[0]);
        }
    }
    let mut offset: Vec<Option<f64>> = vec![None; k];
    for start in 0..k {
        if offset[start].is_some() {
            continue;
        }
        offset[start] = Some(0.0);
        let mut queue = VecDeque::from([start]);
        while let Some(a) = queue.pop_front() {
            for b in 0..k {
                let Some(d) = diffs[a][b] else { continue };
                // shifted π_b = raw_b - d + offset_a agrees with π_a on the boundary
                let want = offset[a].unwrap() - d;
                match offset[b] {
                    None => {
                        offset[b] = Some(want);
                        queue.push_back(b);
                    }
                    Some(o) if (o - want).abs() > BOUNDARY_TOL => {
                        return Ok(StructureReport::none(
                            format!(
                                "piece offsets around {} are inconsistent",
                                pieces[b].alpha
                            ),
                            None,
                        ));
                    }
                    Some(_) => {}
                }
            }
        }
    }
    let out: Vec<PiecePotential> = pieces
        .into_iter()
        .zip(raw)
        .zip(offset)
        .map(|((piece, pi), off)| PiecePotential {
            alpha: piece.alpha.clone(),
            pi: &pi + &Polynomial::constant(nx, off.unwrap()),
            piece,
        })
        .collect();
    Ok(StructureReport {
        kind: StructureKind::ImplicitPotential,
        pi: None,
        h: None,
        witness: None,
        reason: None,
        pieces: out,
        sampled: true,
    })
}

/// Up to `count` points of `poly` (clipped to a box of half-width 10 around
/// the origin): LP vertices for random objectives plus their midpoints.
fn sample_polyhedron(poly: &Polyhedron, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let dim = poly.dim();
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    for _ in 0..count {
        let obj: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut lp = LinearProgram::minimize(obj);
        for k in 0..dim {
            lp.set_bounds(k, -10.0, 10.0);
        }
        for (row, b) in poly.rows() {
            lp.add_row(row.to_vec(), Cmp::Ge, b);
        }
        match lp.solve().optimal() {
            Some((x, _)) => vertices.push(x.to_vec()),
            None => return Vec::new(),
        }
    }
    let mut out = vertices.clone();
    for w in vertices.windows(2) {
        out.push(w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect());
    }
    out
}

/// Value of the implicit potential at `x` (first piece containing it).
pub fn implicit_value(report: &StructureReport, x: &[f64]) -> Option<f64> {
    let xv = DVector::from_column_slice(x);
    report
        .pieces
        .iter()
        .find(|p| p.piece.contains(&xv, 1e-12))
        .map(|p| p.pi.eval_unchecked(x))
}
