//! Sparse multivariate polynomials over a fixed set of ambient variables.
//!
//! Every leader objective, potential function and Lagrangian in the crate is a
//! [`Polynomial`]. Terms are stored in a `BTreeMap` keyed by exponent vectors, so
//! iteration order is canonical and two polynomials with the same terms compare
//! equal regardless of how they were built.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients at or below this magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    arity: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(arity: usize) -> Self {
        Polynomial {
            arity,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(arity: usize, value: f64) -> Self {
        let mut p = Self::zero(arity);
        p.add_term(vec![0; arity], value);
        p
    }

    /// The coordinate polynomial `z_index`.
    pub fn var(arity: usize, index: usize) -> Self {
        assert!(index < arity, "variable {index} out of range for arity {arity}");
        let mut exps = vec![0; arity];
        exps[index] = 1;
        let mut p = Self::zero(arity);
        p.add_term(exps, 1.0);
        p
    }

    pub fn monomial(arity: usize, exps: Vec<u32>, coeff: f64) -> Result<Self> {
        let mut p = Self::zero(arity);
        p.try_add_term(exps, coeff)?;
        Ok(p)
    }

    /// Builds `Σ coeffs[k] z_k + constant`.
    pub fn linear(coeffs: &[f64], constant: f64) -> Self {
        let arity = coeffs.len();
        let mut p = Self::constant(arity, constant);
        for (k, &c) in coeffs.iter().enumerate() {
            let mut exps = vec![0; arity];
            exps[k] = 1;
            p.add_term(exps, c);
        }
        p
    }

    pub fn from_terms<I>(arity: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut p = Self::zero(arity);
        for (exps, coeff) in terms {
            p.try_add_term(exps, coeff)?;
        }
        Ok(p)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn uses_var(&self, index: usize) -> bool {
        self.terms.keys().any(|e| e[index] > 0)
    }

    /// Indices of variables that appear with a positive exponent.
    pub fn support(&self) -> Vec<usize> {
        (0..self.arity).filter(|&k| self.uses_var(k)).collect()
    }

    fn try_add_term(&mut self, exps: Vec<u32>, coeff: f64) -> Result<()> {
        if exps.len() != self.arity {
            return Err(Error::dim(self.arity, exps.len(), "exponent vector"));
        }
        if !coeff.is_finite() {
            return Err(Error::Semantic(format!("non-finite coefficient {coeff}")));
        }
        self.add_term(exps, coeff);
        Ok(())
    }

    pub(crate) fn add_term(&mut self, exps: Vec<u32>, coeff: f64) {
        debug_assert_eq!(exps.len(), self.arity);
        match self.terms.entry(exps) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().abs() <= PRUNE_TOL {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if coeff.abs() > PRUNE_TOL {
                    v.insert(coeff);
                }
            }
        }
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.arity {
            return Err(Error::dim(self.arity, point.len(), "polynomial evaluation point"));
        }
        Ok(self.eval_unchecked(point))
    }

    pub(crate) fn eval_unchecked(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(exps, &c)| {
                exps.iter()
                    .zip(point)
                    .filter(|(&e, _)| e > 0)
                    .fold(c, |acc, (&e, &v)| acc * v.powi(e as i32))
            })
            .sum()
    }

    pub fn partial(&self, index: usize) -> Polynomial {
        assert!(index < self.arity);
        let mut out = Self::zero(self.arity);
        for (exps, &c) in &self.terms {
            let e = exps[index];
            if e == 0 {
                continue;
            }
            let mut d = exps.clone();
            d[index] = e - 1;
            out.add_term(d, c * e as f64);
        }
        out
    }

    /// Partial derivatives with respect to each variable in `block`.
    pub fn grad(&self, block: std::ops::Range<usize>) -> Result<Vec<Polynomial>> {
        if block.end > self.arity || block.start > block.end {
            return Err(Error::dim(self.arity, block.end, "gradient block"));
        }
        Ok(block.map(|k| self.partial(k)).collect())
    }

    pub fn grad_at(&self, vars: &[usize], point: &[f64]) -> Vec<f64> {
        vars.iter()
            .map(|&k| {
                self.terms
                    .iter()
                    .filter(|(exps, _)| exps[k] > 0)
                    .map(|(exps, &c)| {
                        let mut v = c * exps[k] as f64;
                        for (j, (&e, &x)) in exps.iter().zip(point).enumerate() {
                            let e = if j == k { e - 1 } else { e };
                            if e > 0 {
                                v *= x.powi(e as i32);
                            }
                        }
                        v
                    })
                    .sum()
            })
            .collect()
    }

    pub fn scale(&self, factor: f64) -> Polynomial {
        let mut out = Self::zero(self.arity);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * factor);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Self::constant(self.arity, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Coefficient-wise comparison with an absolute tolerance.
    pub fn approx_eq(&self, other: &Polynomial, tol: f64) -> bool {
        self.arity == other.arity && (self - other).terms.values().all(|c| c.abs() <= tol)
    }

    /// The term of largest magnitude in `self - other`, if any exceeds `tol`.
    pub fn first_difference(&self, other: &Polynomial, tol: f64) -> Option<(Vec<u32>, f64)> {
        (self - other)
            .terms
            .into_iter()
            .filter(|(_, c)| c.abs() > tol)
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
    }

    /// Moves every variable `k` to slot `map[k]` of a polynomial with `new_arity`
    /// variables. Variables mapped to `None` must not appear.
    pub fn reindex(&self, map: &[Option<usize>], new_arity: usize) -> Result<Polynomial> {
        if map.len() != self.arity {
            return Err(Error::dim(self.arity, map.len(), "reindex map"));
        }
        let mut out = Self::zero(new_arity);
        for (exps, &c) in &self.terms {
            let mut ne = vec![0u32; new_arity];
            for (k, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                match map[k] {
                    Some(t) if t < new_arity => ne[t] += e,
                    _ => {
                        return Err(Error::Contract(format!(
                            "variable {k} is used but has no target slot"
                        )))
                    }
                }
            }
            out.add_term(ne, c);
        }
        Ok(out)
    }

    /// Replaces variable `index` with the polynomial `value` (same arity).
    pub fn substitute(&self, index: usize, value: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, value.arity);
        let mut powers: Vec<Polynomial> = vec![Self::constant(self.arity, 1.0)];
        let mut out = Self::zero(self.arity);
        for (exps, &c) in &self.terms {
            let e = exps[index] as usize;
            while powers.len() <= e {
                let next = powers.last().unwrap() * value;
                powers.push(next);
            }
            let mut rest = exps.clone();
            rest[index] = 0;
            let mono = Polynomial {
                arity: self.arity,
                terms: BTreeMap::from([(rest, c)]),
            };
            out = &out + &(&mono * &powers[e]);
        }
        out
    }

    /// Fixes the listed variables to numeric values.
    pub fn fix(&self, values: &[(usize, f64)]) -> Polynomial {
        let mut out = Self::zero(self.arity);
        for (exps, &c) in &self.terms {
            let mut e = exps.clone();
            let mut coeff = c;
            for &(k, v) in values {
                if e[k] > 0 {
                    coeff *= v.powi(e[k] as i32);
                    e[k] = 0;
                }
            }
            out.add_term(e, coeff);
        }
        out
    }

    /// Composition with the affine map `z = offset + lin · v`, giving a
    /// polynomial in `v` (arity `lin.ncols()`).
    pub fn compose_affine(&self, offset: &DVector<f64>, lin: &DMatrix<f64>) -> Polynomial {
        assert_eq!(offset.len(), self.arity);
        assert_eq!(lin.nrows(), self.arity);
        let k = lin.ncols();
        let images: Vec<Polynomial> = (0..self.arity)
            .map(|r| {
                let coeffs: Vec<f64> = (0..k).map(|c| lin[(r, c)]).collect();
                Polynomial::linear(&coeffs, offset[r])
            })
            .collect();
        let mut powers: Vec<Vec<Polynomial>> = images
            .iter()
            .map(|_| vec![Polynomial::constant(k, 1.0)])
            .collect();
        let mut out = Polynomial::zero(k);
        for (exps, &c) in &self.terms {
            let mut term = Polynomial::constant(k, c);
            for (var, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[var].len() <= e as usize {
                    let next = powers[var].last().unwrap() * &images[var];
                    powers[var].push(next);
                }
                term = &term * &powers[var][e as usize];
            }
            out = &out + &term;
        }
        out
    }

    /// Splits into the terms that touch any of `vars` and the rest.
    pub fn split_by_vars(&self, vars: &[usize]) -> (Polynomial, Polynomial) {
        let mut touching = Self::zero(self.arity);
        let mut rest = Self::zero(self.arity);
        for (exps, &c) in &self.terms {
            if vars.iter().any(|&k| exps[k] > 0) {
                touching.add_term(exps.clone(), c);
            } else {
                rest.add_term(exps.clone(), c);
            }
        }
        (touching, rest)
    }

    /// For degree ≤ 2: `(H, g, c)` with `p(z) = ½ zᵀHz + gᵀz + c`.
    pub fn quadratic_form(&self) -> Option<(DMatrix<f64>, DVector<f64>, f64)> {
        if self.degree() > 2 {
            return None;
        }
        let n = self.arity;
        let mut h = DMatrix::zeros(n, n);
        let mut g = DVector::zeros(n);
        let mut c = 0.0;
        for (exps, &coeff) in &self.terms {
            let nz: Vec<usize> = (0..n).filter(|&k| exps[k] > 0).collect();
            match (nz.len(), nz.first().map(|&k| exps[k])) {
                (0, _) => c += coeff,
                (1, Some(1)) => g[nz[0]] += coeff,
                (1, Some(2)) => h[(nz[0], nz[0])] += 2.0 * coeff,
                (2, _) => {
                    h[(nz[0], nz[1])] += coeff;
                    h[(nz[1], nz[0])] += coeff;
                }
                _ => unreachable!("degree checked above"),
            }
        }
        Some((h, g, c))
    }

    /// Hessian as a matrix of polynomials restricted to `vars`.
    pub fn hessian(&self, vars: &[usize]) -> Vec<Vec<Polynomial>> {
        vars.iter()
            .map(|&a| {
                let da = self.partial(a);
                vars.iter().map(|&b| da.partial(b)).collect()
            })
            .collect()
    }

    /// Renders the polynomial with the given variable names, e.g. `0.5*x1 + y1^2`.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> PolyDisplay<'a> {
        PolyDisplay { poly: self, names }
    }
}

pub struct PolyDisplay<'a> {
    poly: &'a Polynomial,
    names: &'a [String],
}

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.poly.is_zero() {
            return write!(f, "0");
        }
        for (idx, (exps, c)) in self.poly.terms().enumerate() {
            let sign = if c < 0.0 { "-" } else { "+" };
            if idx == 0 {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            let mag = c.abs();
            let factors: Vec<String> = exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(k, &e)| {
                    let name = self
                        .names
                        .get(k)
                        .cloned()
                        .unwrap_or_else(|| format!("z{}", k + 1));
                    if e == 1 {
                        name
                    } else {
                        format!("{name}^{e}")
                    }
                })
                .collect();
            if factors.is_empty() {
                write!(f, "{mag}")?;
            } else if (mag - 1.0).abs() <= PRUNE_TOL {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{mag}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, rhs.arity, "arity mismatch in addition");
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.add_term(e.clone(), c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, rhs.arity, "arity mismatch in subtraction");
        let mut out = self.clone();
        for (e, &c) in &rhs.terms {
            out.add_term(e.clone(), -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.arity, rhs.arity, "arity mismatch in multiplication");
        let mut out = Polynomial::zero(self.arity);
        for (ea, &ca) in &self.terms {
            for (eb, &cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
