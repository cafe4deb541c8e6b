//! Leader problems, the game container and the game-file format.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcp::{lcp_solve, ParametricLcp};
use crate::poly::Polynomial;

/// Absolute feasibility tolerance for membership tests.
pub const TAU_FEAS: f64 = 1e-8;

/// `{ z : A z ≥ b }`. No rows means the whole space.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron {
    dim: usize,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Polyhedron {
    pub fn whole_space(dim: usize) -> Self {
        Polyhedron {
            dim,
            a: Vec::new(),
            b: Vec::new(),
        }
    }

    pub fn from_rows(dim: usize, a: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::dim(a.len(), b.len(), "polyhedron right-hand side"));
        }
        for row in &a {
            if row.len() != dim {
                return Err(Error::dim(dim, row.len(), "polyhedron row"));
            }
        }
        if a.iter().flatten().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::Semantic("polyhedron has non-finite entries".into()));
        }
        Ok(Polyhedron { dim, a, b })
    }

    /// `lo ≤ z ≤ hi` componentwise; infinite bounds are omitted.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        let dim = lo.len();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            if lo[k].is_finite() {
                e[k] = 1.0;
                a.push(e.clone());
                b.push(lo[k]);
            }
            if hi[k].is_finite() {
                e[k] = -1.0;
                a.push(e);
                b.push(-hi[k]);
            }
        }
        Polyhedron { dim, a, b }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.a.len()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.a.iter().map(|r| r.as_slice()).zip(self.b.iter().cloned())
    }

    pub fn matrix(&self) -> (DMatrix<f64>, DVector<f64>) {
        let a = DMatrix::from_fn(self.a.len(), self.dim, |r, c| self.a[r][c]);
        (a, DVector::from_column_slice(&self.b))
    }

    /// Slack `a_r·z - b_r` of every row.
    pub fn slacks(&self, z: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|(row, b)| row.iter().zip(z).map(|(a, v)| a * v).sum::<f64>() - b)
            .collect()
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dim && self.slacks(z).iter().all(|&s| s >= -tol)
    }

    pub fn intersect(&self, other: &Polyhedron) -> Polyhedron {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        out.a.extend(other.a.iter().cloned());
        out.b.extend(other.b.iter().cloned());
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formulation {
    Original,
    Ae,
    Bl,
    Ind,
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Formulation::Original => "original",
            Formulation::Ae => "ae",
            Formulation::Bl => "bl",
            Formulation::Ind => "ind",
        })
    }
}

impl FromStr for Formulation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Formulation::Original),
            "ae" => Ok(Formulation::Ae),
            "bl" => Ok(Formulation::Bl),
            "ind" => Ok(Formulation::Ind),
            other => Err(Error::Semantic(format!(
                "unknown formulation `{other}` (expected original, ae, bl or ind)"
            ))),
        }
    }
}

/// Canonical variable order: `x₁, …, x_N` followed by `y₁, …, y_N`, or by a
/// single shared block `w` in the quasi form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VariableLayout {
    m: Vec<usize>,
    p: usize,
    shared_w: bool,
}

impl VariableLayout {
    pub fn new(m: Vec<usize>, p: usize) -> Self {
        VariableLayout {
            m,
            p,
            shared_w: false,
        }
    }

    /// The `(x, w)` layout of the quasi-potential problem.
    pub fn quasi(m: Vec<usize>, p: usize) -> Self {
        VariableLayout {
            m,
            p,
            shared_w: true,
        }
    }

    pub fn num_leaders(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_shared(&self) -> bool {
        self.shared_w
    }

    pub fn x_dim(&self) -> usize {
        self.m.iter().sum()
    }

    pub fn x_range(&self, i: usize) -> Range<usize> {
        let start: usize = self.m[..i].iter().sum();
        start..start + self.m[i]
    }

    pub fn x_all(&self) -> Range<usize> {
        0..self.x_dim()
    }

    pub fn y_range(&self, i: usize) -> Range<usize> {
        let start = if self.shared_w {
            self.x_dim()
        } else {
            self.x_dim() + i * self.p
        };
        start..start + self.p
    }

    pub fn n(&self) -> usize {
        if self.shared_w {
            self.x_dim() + self.p
        } else {
            self.x_dim() + self.num_leaders() * self.p
        }
    }

    /// Leader owning ambient slot `k` and whether it is an x slot.
    pub fn owner(&self, k: usize) -> Option<(usize, bool)> {
        (0..self.num_leaders()).find_map(|i| {
            if self.x_range(i).contains(&k) {
                Some((i, true))
            } else if !self.shared_w && self.y_range(i).contains(&k) {
                Some((i, false))
            } else {
                None
            }
        })
    }

    pub fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.n());
        for (i, &mi) in self.m.iter().enumerate() {
            for k in 0..mi {
                out.push(if mi == 1 {
                    format!("x{}", i + 1)
                } else {
                    format!("x{}_{}", i + 1, k + 1)
                });
            }
        }
        if self.shared_w {
            for k in 0..self.p {
                out.push(if self.p == 1 {
                    "w".to_string()
                } else {
                    format!("w{}", k + 1)
                });
            }
        } else {
            for i in 0..self.num_leaders() {
                for k in 0..self.p {
                    out.push(if self.p == 1 {
                        format!("y{}", i + 1)
                    } else {
                        format!("y{}_{}", i + 1, k + 1)
                    });
                }
            }
        }
        out
    }

    pub fn x_of(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(&z[self.x_all()])
    }

    pub fn y_of(&self, z: &[f64], i: usize) -> DVector<f64> {
        DVector::from_column_slice(&z[self.y_range(i)])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeaderProblem {
    pub objective: Polynomial,
    pub x_set: Polyhedron,
    pub y_set: Polyhedron,
}

/// A point `(x, y)` split per leader.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Point {
    pub fn to_flat(&self, layout: &VariableLayout) -> Result<Vec<f64>> {
        let nl = layout.num_leaders();
        if self.x.len() != nl {
            return Err(Error::dim(nl, self.x.len(), "point x blocks"));
        }
        if self.y.len() != nl {
            return Err(Error::dim(nl, self.y.len(), "point y blocks"));
        }
        let mut z = vec![0.0; layout.n()];
        for i in 0..nl {
            let xr = layout.x_range(i);
            if self.x[i].len() != xr.len() {
                return Err(Error::dim(xr.len(), self.x[i].len(), format!("x block of leader {}", i + 1)));
            }
            z[xr].copy_from_slice(&self.x[i]);
            let yr = layout.y_range(i);
            if self.y[i].len() != yr.len() {
                return Err(Error::dim(yr.len(), self.y[i].len(), format!("y block of leader {}", i + 1)));
            }
            z[yr].copy_from_slice(&self.y[i]);
        }
        Ok(z)
    }

    pub fn from_flat(layout: &VariableLayout, z: &[f64]) -> Point {
        let nl = layout.num_leaders();
        Point {
            x: (0..nl).map(|i| z[layout.x_range(i)].to_vec()).collect(),
            y: (0..nl).map(|i| z[layout.y_range(i)].to_vec()).collect(),
        }
    }
}

pub fn parse_point(text: &str) -> Result<Point> {
    serde_json::from_str(text).map_err(json_error)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    leaders: Vec<LeaderProblem>,
    follower: ParametricLcp,
    formulation: Formulation,
    layout: VariableLayout,
}

impl Game {
    pub fn new(
        leaders: Vec<LeaderProblem>,
        follower: ParametricLcp,
        formulation: Formulation,
        layout: VariableLayout,
    ) -> Result<Self> {
        let game = Game {
            leaders,
            follower,
            formulation,
            layout,
        };
        game.validate()?;
        Ok(game)
    }

    pub fn leaders(&self) -> &[LeaderProblem] {
        &self.leaders
    }

    pub fn leader(&self, i: usize) -> &LeaderProblem {
        &self.leaders[i]
    }

    pub fn num_leaders(&self) -> usize {
        self.leaders.len()
    }

    pub fn follower(&self) -> &ParametricLcp {
        &self.follower
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn layout(&self) -> &VariableLayout {
        &self.layout
    }

    pub fn with_formulation(&self, formulation: Formulation) -> Result<Game> {
        Game::new(
            self.leaders.clone(),
            self.follower.clone(),
            formulation,
            self.layout.clone(),
        )
    }

    fn validate(&self) -> Result<()> {
        let nl = self.leaders.len();
        let lay = &self.layout;
        if nl == 0 {
            return Err(Error::Semantic("game has no leaders".into()));
        }
        if lay.shared_w {
            return Err(Error::Semantic("a game layout cannot use a shared w block".into()));
        }
        if lay.num_leaders() != nl {
            return Err(Error::Semantic(format!(
                "layout lists {} leader blocks but the game has {nl} leaders",
                lay.num_leaders()
            )));
        }
        if let Some(i) = lay.m.iter().position(|&m| m == 0) {
            return Err(Error::Semantic(format!("leader {} has an empty x block", i + 1)));
        }
        let p = self.follower.p();
        if lay.p != p {
            return Err(Error::Semantic(format!(
                "layout p = {} differs from follower LCP dimension {p}",
                lay.p
            )));
        }
        if self.follower.x_dim() != lay.x_dim() {
            return Err(Error::dim(lay.x_dim(), self.follower.x_dim(), "columns of follower matrix N"));
        }
        let n = lay.n();
        for (i, l) in self.leaders.iter().enumerate() {
            if l.objective.arity() != n {
                return Err(Error::dim(n, l.objective.arity(), format!("objective of leader {}", i + 1)));
            }
            if l.x_set.dim() != lay.m[i] {
                return Err(Error::dim(lay.m[i], l.x_set.dim(), format!("X set of leader {}", i + 1)));
            }
            if l.y_set.dim() != p {
                return Err(Error::dim(p, l.y_set.dim(), format!("Y set of leader {}", i + 1)));
            }
            if l.objective.terms().any(|(_, c)| !c.is_finite()) {
                return Err(Error::Semantic(format!(
                    "objective of leader {} has non-finite coefficients",
                    i + 1
                )));
            }
            for j in 0..nl {
                if j != i && lay.y_range(j).any(|k| l.objective.uses_var(k)) {
                    return Err(Error::Semantic(format!(
                        "leader {} objective references y-block of leader {} under formulation={}",
                        i + 1,
                        j + 1,
                        self.formulation
                    )));
                }
            }
            if self.formulation == Formulation::Ind && lay.y_range(i).any(|k| l.objective.uses_var(k)) {
                return Err(Error::Semantic(format!(
                    "leader {} objective references its y-block under formulation=ind",
                    i + 1
                )));
            }
        }
        if self.formulation == Formulation::Bl {
            self.validate_bl()?;
        }
        Ok(())
    }

    /// Bilevel form: the follower LCP splits into one independent group of
    /// `p / N` rows per leader, driven only by that leader's x.
    fn validate_bl(&self) -> Result<()> {
        let nl = self.leaders.len();
        let p = self.follower.p();
        if p % nl != 0 {
            return Err(Error::Semantic(format!(
                "formulation=bl needs p divisible by the number of leaders (p = {p}, N = {nl})"
            )));
        }
        let g = p / nl;
        let group = |r: usize| r / g;
        let m = self.follower.m();
        for r in 0..p {
            for c in 0..p {
                if group(r) != group(c) && m[(r, c)] != 0.0 {
                    return Err(Error::Semantic(format!(
                        "formulation=bl needs M block diagonal; entry ({}, {}) couples follower groups",
                        r + 1,
                        c + 1
                    )));
                }
            }
            for k in 0..nl {
                if k != group(r)
                    && self.layout.x_range(k).any(|c| self.follower.n()[(r, c)] != 0.0)
                {
                    return Err(Error::Semantic(format!(
                        "formulation=bl needs N to couple y_i only to x_i; row {} depends on x{}",
                        r + 1,
                        k + 1
                    )));
                }
            }
        }
        for (i, l) in self.leaders.iter().enumerate() {
            let yr = self.layout.y_range(i);
            for (off, k) in yr.enumerate() {
                if group(off) != i && l.objective.uses_var(k) {
                    return Err(Error::Semantic(format!(
                        "formulation=bl: leader {} objective uses follower component {} of another group",
                        i + 1,
                        off + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Digest line used in reports.
    pub fn digest(&self) -> String {
        format!(
            "N={} m={:?} p={} formulation={}",
            self.num_leaders(),
            self.layout.m,
            self.layout.p,
            self.formulation
        )
    }

    /// First violated constraint of `Ω_i`, if any. Under `ae` every leader
    /// carries all follower equilibrium constraints.
    pub fn omega_violation(&self, i: usize, z: &[f64]) -> Result<Option<String>> {
        if z.len() != self.layout.n() {
            return Err(Error::dim(self.layout.n(), z.len(), "point"));
        }
        let lay = &self.layout;
        let l = &self.leaders[i];
        if let Some(r) = first_violated(&l.x_set, &z[lay.x_range(i)]) {
            return Ok(Some(format!("row {} of X_{}", r + 1, i + 1)));
        }
        if let Some(r) = first_violated(&l.y_set, &z[lay.y_range(i)]) {
            return Ok(Some(format!("row {} of Y_{}", r + 1, i + 1)));
        }
        let blocks: Vec<usize> = match self.formulation {
            Formulation::Ae => (0..self.num_leaders()).collect(),
            _ => vec![i],
        };
        let x = lay.x_of(z);
        for j in blocks {
            let y = lay.y_of(z, j);
            if !self.follower.is_solution(&y, &x, TAU_FEAS) {
                return Ok(Some(format!("y{} is not in S(x)", j + 1)));
            }
        }
        Ok(None)
    }

    /// First violated constraint of F, if any.
    pub fn membership_violation(&self, z: &[f64]) -> Result<Option<String>> {
        for i in 0..self.num_leaders() {
            if let Some(v) = self.omega_violation(i, z)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    /// Whether `z` lies in the set of jointly feasible tuples of the game.
    pub fn membership_f(&self, z: &[f64]) -> bool {
        matches!(self.membership_violation(z), Ok(None))
    }

    /// The follower solutions at `x` (exhaustive; small p only).
    pub fn follower_solutions(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        Ok(lcp_solve(&self.follower, x)?.points)
    }
}

fn first_violated(set: &Polyhedron, z: &[f64]) -> Option<usize> {
    set.slacks(z).iter().position(|&s| s < -TAU_FEAS)
}

// ---- game file -------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameFile {
    layout: LayoutFile,
    formulation: String,
    follower: FollowerFile,
    leaders: Vec<LeaderFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    m: Vec<usize>,
    p: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FollowerFile {
    #[serde(rename = "M")]
    m: Vec<Vec<f64>>,
    #[serde(rename = "N")]
    n: Vec<Vec<f64>>,
    q: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LeaderFile {
    objective: Vec<TermFile>,
    #[serde(rename = "X")]
    x: SetFile,
    #[serde(rename = "Y")]
    y: SetFile,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermFile {
    coeff: f64,
    exps: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => Error::Semantic(format!(
            "{e}"
        )),
        _ => Error::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        },
    }
}

fn matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    for r in rows {
        if r.len() != ncols {
            return Err(Error::dim(ncols, r.len(), format!("row of {what}")));
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub fn parse_game(text: &str) -> Result<Game> {
    let file: GameFile = serde_json::from_str(text).map_err(json_error)?;
    let formulation: Formulation = file.formulation.parse()?;
    let layout = VariableLayout::new(file.layout.m.clone(), file.layout.p);
    let p = file.layout.p;
    if file.leaders.is_empty() {
        return Err(Error::Semantic("game has no leaders".into()));
    }
    if file.follower.q.len() != p {
        return Err(Error::dim(p, file.follower.q.len(), "follower q"));
    }
    if file.follower.m.len() != p {
        return Err(Error::dim(p, file.follower.m.len(), "rows of follower M"));
    }
    if file.follower.n.len() != p {
        return Err(Error::dim(p, file.follower.n.len(), "rows of follower N"));
    }
    let follower = ParametricLcp::new(
        matrix(&file.follower.m, p, "follower M")?,
        matrix(&file.follower.n, layout.x_dim(), "follower N")?,
        DVector::from_column_slice(&file.follower.q),
    )?;
    if file.leaders.len() != layout.num_leaders() {
        return Err(Error::Semantic(format!(
            "layout lists {} leader blocks but {} leaders are given",
            layout.num_leaders(),
            file.leaders.len()
        )));
    }
    let n = layout.n();
    let mut leaders = Vec::new();
    for (i, lf) in file.leaders.into_iter().enumerate() {
        let mut terms = Vec::new();
        for t in lf.objective {
            if t.exps.len() != n {
                return Err(Error::dim(n, t.exps.len(), format!("exponent vector in leader {} objective", i + 1)));
            }
            terms.push((t.exps, t.coeff));
        }
        let objective = Polynomial::from_terms(n, terms)?;
        let x_set = Polyhedron::from_rows(layout.m()[i], lf.x.a, lf.x.b)?;
        let y_set = Polyhedron::from_rows(p, lf.y.a, lf.y.b)?;
        leaders.push(LeaderProblem {
            objective,
            x_set,
            y_set,
        });
    }
    Game::new(leaders, follower, formulation, layout)
}

pub fn serialize_game(game: &Game) -> String {
    let f = game.follower();
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows()).map(|r| m.row(r).iter().cloned().collect()).collect()
    };
    let set = |s: &Polyhedron| SetFile {
        a: s.a.clone(),
        b: s.b.clone(),
    };
    let file = GameFile {
        layout: LayoutFile {
            m: game.layout.m.clone(),
            p: game.layout.p,
        },
        formulation: game.formulation.to_string(),
        follower: FollowerFile {
            m: rows(f.m()),
            n: rows(f.n()),
            q: f.q().iter().cloned().collect(),
        },
        leaders: game
            .leaders
            .iter()
            .map(|l| LeaderFile {
                objective: l
                    .objective
                    .terms()
                    .map(|(e, c)| TermFile {
                        coeff: c,
                        exps: e.to_vec(),
                    })
                    .collect(),
                x: set(&l.x_set),
                y: set(&l.y_set),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("game file serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const PF: &str = r#"{
      "layout": {"m": [1, 1], "p": 1},
      "formulation": "original",
      "follower": {"M": [[1]], "N": [[1, 1]], "q": [-1]},
      "leaders": [
        {"objective": [{"coeff": 0.5, "exps": [1,0,0,0]}, {"coeff": 1, "exps": [0,0,1,0]}],
         "X": {"A": [[1], [-1]], "b": [0, -1]}, "Y": {"A": [], "b": []}},
        {"objective": [{"coeff": -0.5, "exps": [0,1,0,0]}, {"coeff": -1, "exps": [0,0,0,1]}],
         "X": {"A": [[1], [-1]], "b": [0, -1]}, "Y": {"A": [], "b": []}}
      ]
    }"#;

    #[test]
    fn parses_pf_game() {
        let g = parse_game(PF).unwrap();
        assert_eq!(g.num_leaders(), 2);
        assert_eq!(g.layout().m(), &[1, 1]);
        assert_eq!(g.follower().p(), 1);
        assert_eq!(g.follower().m()[(0, 0)], 1.0);
        assert_eq!(g.follower().n().row(0).iter().cloned().collect::<Vec<_>>(), vec![1.0, 1.0]);
        assert_eq!(g.follower().q()[0], -1.0);
        assert_eq!(parse_game(&serialize_game(&g)).unwrap(), g);
    }

    #[test]
    fn rejects_empty_leaders_and_bad_syntax() {
        let text = r#"{"layout": {"m": [], "p": 1}, "formulation": "original",
            "follower": {"M": [[1]], "N": [[]], "q": [0]}, "leaders": []}"#;
        assert!(matches!(parse_game(text), Err(Error::Semantic(_))));
        match parse_game("{\n  \"layout\": ,\n}") {
            Err(Error::Syntax { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_rival_follower_dependence() {
        let text = PF.replace("[0,0,0,1]}]", "[0,0,1,0]}]");
        match parse_game(&text) {
            Err(Error::Semantic(msg)) => assert_eq!(
                msg,
                "leader 2 objective references y-block of leader 1 under formulation=original"
            ),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn membership() {
        let g = parse_game(PF).unwrap();
        assert!(g.membership_f(&[0.0, 1.0, 0.0, 0.0]));
        assert!(!g.membership_f(&[0.0, 0.0, 0.0, 0.0]));
        assert!(!g.membership_f(&[-0.5, 1.0, 0.0, 0.0]));
        let ae = g.with_formulation(Formulation::Ae).unwrap();
        assert!(ae.membership_f(&[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(
            g.membership_violation(&[0.0, 0.0, 0.0, 0.0]).unwrap().as_deref(),
            Some("y1 is not in S(x)")
        );
    }

    #[test]
    fn layout_names() {
        let lay = VariableLayout::new(vec![1, 2], 1);
        assert_eq!(lay.names(), vec!["x1", "x2_1", "x2_2", "y1", "y2"]);
        let q = VariableLayout::quasi(vec![1, 1], 1);
        assert_eq!(q.names(), vec!["x1", "x2", "w"]);
        assert_eq!(q.y_range(1), 2..3);
    }
}
