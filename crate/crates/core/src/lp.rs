//! Thin dense front end over `minilp`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Ge,
    Le,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, *value)),
            _ => None,
        }
    }
}

impl LinearProgram {
    /// Minimisation of `objective · x` over free variables.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_bounds(&mut self, var: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[var] = (lo, hi);
        self
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "LP row length");
        self.rows.push((coeffs, cmp, rhs));
        self
    }

    pub fn solve(&self) -> LpOutcome {
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = self
            .objective
            .iter()
            .zip(&self.bounds)
            .map(|(&c, &b)| problem.add_var(c, b))
            .collect();
        for (coeffs, cmp, rhs) in &self.rows {
            let terms: Vec<(minilp::Variable, f64)> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(k, &c)| (vars[k], c))
                .collect();
            if terms.is_empty() {
                let ok = match cmp {
                    Cmp::Ge => 0.0 >= *rhs - 1e-12,
                    Cmp::Le => 0.0 <= *rhs + 1e-12,
                    Cmp::Eq => rhs.abs() <= 1e-12,
                };
                if !ok {
                    return LpOutcome::Infeasible;
                }
                continue;
            }
            let op = match cmp {
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Le => ComparisonOp::Le,
                Cmp::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(terms.as_slice(), op, *rhs);
        }
        match problem.solve() {
            Ok(sol) => {
                let x: Vec<f64> = vars.iter().map(|v| sol[*v]).collect();
                let value: f64 = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                // minilp can report an unbounded ray as an infinite "optimum"
                if !value.is_finite() || x.iter().any(|v| !v.is_finite()) {
                    return LpOutcome::Unbounded;
                }
                LpOutcome::Optimal { x, value }
            }
            Err(minilp::Error::Infeasible) => LpOutcome::Infeasible,
            Err(minilp::Error::Unbounded) => LpOutcome::Unbounded,
        }
    }
}
