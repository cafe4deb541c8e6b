//! Generators for the reference games shipped with the tool.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lcp::ParametricLcp;
use crate::model::{Formulation, Game, LeaderProblem, Polyhedron, VariableLayout};
use crate::poly::Polynomial;

/// The two-leader, one-follower game with `S(x) = max{0, 1 − x₁ − x₂}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PfVariant {
    /// `φ₁ = ½x₁ + y₁`, `φ₂ = −½x₂ − y₂`.
    Original,
    /// `φ₂ = −½x₂ + y₂`; both leaders carry `+w`.
    QuasiPlus,
    /// `φ₁ = ½x₁ − y₁`; both leaders carry `−w`.
    QuasiMinus,
    /// The original objectives under the all-equilibrium formulation.
    Shared,
}

impl PfVariant {
    pub const ALL: [PfVariant; 4] = [
        PfVariant::Original,
        PfVariant::QuasiPlus,
        PfVariant::QuasiMinus,
        PfVariant::Shared,
    ];
}

impl fmt::Display for PfVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PfVariant::Original => "original",
            PfVariant::QuasiPlus => "quasi-plus",
            PfVariant::QuasiMinus => "quasi-minus",
            PfVariant::Shared => "shared",
        })
    }
}

impl FromStr for PfVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PfVariant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| Error::Semantic(format!("unknown variant '{s}'")))
    }
}

fn linear(n: usize, terms: &[(usize, f64)]) -> Polynomial {
    let mut c = vec![0.0; n];
    for &(k, v) in terms {
        c[k] = v;
    }
    Polynomial::linear(&c, 0.0)
}

pub fn pang_fukushima(variant: PfVariant) -> Game {
    let (s1, s2) = match variant {
        PfVariant::Original | PfVariant::Shared => (1.0, -1.0),
        PfVariant::QuasiPlus => (1.0, 1.0),
        PfVariant::QuasiMinus => (-1.0, -1.0),
    };
    let unit = Polyhedron::boxed(&[0.0], &[1.0]);
    let leaders = vec![
        LeaderProblem {
            objective: linear(4, &[(0, 0.5), (2, s1)]),
            x_set: unit.clone(),
            y_set: Polyhedron::whole_space(1),
        },
        LeaderProblem {
            objective: linear(4, &[(1, -0.5), (3, s2)]),
            x_set: unit,
            y_set: Polyhedron::whole_space(1),
        },
    ];
    let follower = ParametricLcp::new(
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        DVector::from_element(1, -1.0),
    )
    .expect("fixed dimensions");
    let formulation = if variant == PfVariant::Shared {
        Formulation::Ae
    } else {
        Formulation::Original
    };
    Game::new(leaders, follower, formulation, VariableLayout::new(vec![1, 1], 1))
        .expect("well-formed by construction")
}

/// Hierarchical Cournot market with identical leaders and followers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CournotParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub leaders: usize,
    pub followers: usize,
}

impl CournotParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Precondition(format!("{name} must be positive, got {v}")));
            }
        }
        if self.leaders == 0 || self.followers == 0 {
            return Err(Error::Precondition(
                "leader and follower counts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Leader `i` minimises `½c x_i² − x_i (a − b(Σx + Σ_f y_i^f))` over
/// `x_i ≥ 0`. In the reduced form each leader conjectures one common
/// follower output `ŷ_i`, which enters the price `n` times; with
/// `full_followers` every follower is modelled by its own LCP row.
/// Emitted under the all-equilibrium formulation.
pub fn cournot(params: &CournotParams, full_followers: bool) -> Result<Game> {
    params.validate()?;
    let CournotParams { a, b, c, leaders: nl, followers: nf } = *params;
    let p = if full_followers { nf } else { 1 };
    let lay = VariableLayout::new(vec![1; nl], p);
    let n = lay.n();
    let (m, weight) = if full_followers {
        let m = DMatrix::from_fn(nf, nf, |r, k| b + if r == k { b + c } else { 0.0 });
        (m, 1.0)
    } else {
        (DMatrix::from_element(1, 1, c + b * (nf as f64 + 1.0)), nf as f64)
    };
    let follower = ParametricLcp::new(m, DMatrix::from_element(p, nl, b), DVector::from_element(p, -a))?;
    let mut out = Vec::with_capacity(nl);
    for i in 0..nl {
        let xi = lay.x_range(i).start;
        let mut obj = Polynomial::monomial(n, unit_exps(n, &[(xi, 2)]), 0.5 * c + b)?;
        obj = &obj + &Polynomial::monomial(n, unit_exps(n, &[(xi, 1)]), -a)?;
        for j in (0..nl).filter(|&j| j != i) {
            let xj = lay.x_range(j).start;
            obj = &obj + &Polynomial::monomial(n, unit_exps(n, &[(xi, 1), (xj, 1)]), b)?;
        }
        for yv in lay.y_range(i) {
            obj = &obj + &Polynomial::monomial(n, unit_exps(n, &[(xi, 1), (yv, 1)]), b * weight)?;
        }
        out.push(LeaderProblem {
            objective: obj,
            x_set: Polyhedron::from_rows(1, vec![vec![1.0]], vec![0.0])?,
            y_set: Polyhedron::whole_space(p),
        });
    }
    Game::new(out, follower, Formulation::Ae, lay)
}

fn unit_exps(n: usize, powers: &[(usize, u32)]) -> Vec<u32> {
    let mut e = vec![0; n];
    for &(k, d) in powers {
        e[k] += d;
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pf_variants_round_trip() {
        for v in PfVariant::ALL {
            assert_eq!(v.to_string().parse::<PfVariant>().unwrap(), v);
            let g = pang_fukushima(v);
            assert_eq!(crate::parse_game(&crate::serialize_game(&g)).unwrap(), g);
        }
        assert_eq!(pang_fukushima(PfVariant::Shared).formulation(), Formulation::Ae);
    }

    #[test]
    fn cournot_objective_at_a_point() {
        let pr = CournotParams { a: 10.0, b: 1.0, c: 1.0, leaders: 2, followers: 3 };
        let g = cournot(&pr, false).unwrap();
        // x = (1, 2), ŷ = (0.5, 0.25): ½·1 − 1·(10 − (3 + 3·0.5))
        let z = [1.0, 2.0, 0.5, 0.25];
        assert!((g.leader(0).objective.eval(&z).unwrap() - (0.5 - 5.5)).abs() < 1e-12);
        let full = cournot(&pr, true).unwrap();
        assert_eq!(full.follower().p(), 3);
        assert_eq!(full.follower().m()[(0, 0)], 3.0);
        assert_eq!(full.follower().m()[(0, 1)], 1.0);
        assert!(cournot(&CournotParams { a: -1.0, ..pr }, false).is_err());
    }
}
