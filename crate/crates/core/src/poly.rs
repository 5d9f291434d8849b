//! Multivariate polynomials in the population distribution.
//!
//! A [`PolynomialField`] is a finite sum `Σ c_k · Π_i m_i^{e_ki}` kept in a
//! canonical form: terms sorted by exponent vector, duplicates merged, zero
//! coefficients dropped. Two fields are equal iff their canonical term lists
//! are equal, which makes serialization round trips exact.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// One monomial `coef · Π_i m_i^{exp_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exp: Vec<u32>,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolynomialField {
    vars: usize,
    terms: Vec<Term>,
}

impl PolynomialField {
    /// The zero polynomial in `vars` variables.
    pub fn zero(vars: usize) -> Self {
        Self {
            vars,
            terms: Vec::new(),
        }
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        Self::from_terms(vars, vec![Term { exp: vec![0; vars], coef: c }])
            .expect("constant term has the right arity")
    }

    /// `c · m_k` (0-based `k`).
    pub fn linear(vars: usize, k: usize, c: f64) -> Self {
        let mut exp = vec![0; vars];
        exp[k] = 1;
        Self::from_terms(vars, vec![Term { exp, coef: c }]).expect("valid arity")
    }

    /// `c0 + Σ_k coefs[k] · m_k`.
    pub fn affine(c0: f64, coefs: &[f64]) -> Self {
        let vars = coefs.len();
        let mut terms = vec![Term { exp: vec![0; vars], coef: c0 }];
        for (k, &c) in coefs.iter().enumerate() {
            let mut exp = vec![0; vars];
            exp[k] = 1;
            terms.push(Term { exp, coef: c });
        }
        Self::from_terms(vars, terms).expect("valid arity")
    }

    /// Builds a canonical field. Fails on arity mismatch or non-finite
    /// coefficients.
    pub fn from_terms(vars: usize, mut terms: Vec<Term>) -> Result<Self> {
        for t in &terms {
            if t.exp.len() != vars {
                return Err(MfgError::DimensionMismatch(format!(
                    "exponent vector of length {} in a field over {} states",
                    t.exp.len(),
                    vars
                )));
            }
            if !t.coef.is_finite() {
                return Err(MfgError::InvalidArgument(format!(
                    "non-finite coefficient {}",
                    t.coef
                )));
            }
        }
        terms.sort_by(|a, b| a.exp.cmp(&b.exp));
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.exp == t.exp => last.coef += t.coef,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coef != 0.0);
        Ok(Self {
            vars,
            terms: merged,
        })
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.exp.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    /// Coefficient of the constant monomial.
    pub fn constant_coef(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.exp.iter().all(|&e| e == 0))
            .map_or(0.0, |t| t.coef)
    }

    /// Returns a copy with `c` added to the constant coefficient.
    pub fn shifted(&self, c: f64) -> Self {
        if c == 0.0 {
            return self.clone();
        }
        let mut terms = self.terms.clone();
        terms.push(Term {
            exp: vec![0; self.vars],
            coef: c,
        });
        Self::from_terms(self.vars, terms).expect("same arity")
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| Term {
                exp: t.exp.clone(),
                coef: t.coef * lambda,
            })
            .collect();
        Self::from_terms(self.vars, terms).expect("same arity")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.vars != other.vars {
            return Err(MfgError::DimensionMismatch(format!(
                "adding fields over {} and {} states",
                self.vars, other.vars
            )));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.vars, terms)
    }

    pub fn neg(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Renames variables: variable `i` becomes variable `perm[i]`.
    pub fn permute_vars(&self, perm: &[usize]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut exp = vec![0; self.vars];
                for (i, &e) in t.exp.iter().enumerate() {
                    exp[perm[i]] = e;
                }
                Term { exp, coef: t.coef }
            })
            .collect();
        Self::from_terms(self.vars, terms).expect("same arity")
    }

    /// Evaluates the field at `m`. `m` must have length `vars`.
    pub fn eval(&self, m: &[f64]) -> f64 {
        debug_assert_eq!(m.len(), self.vars);
        self.terms
            .iter()
            .map(|t| {
                t.exp
                    .iter()
                    .zip(m)
                    .fold(t.coef, |acc, (&e, &x)| if e == 0 { acc } else { acc * x.powi(e as i32) })
            })
            .sum()
    }

    /// Partial derivative with respect to `m_k`, evaluated at `m`.
    pub fn partial(&self, k: usize, m: &[f64]) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.exp[k] > 0)
            .map(|t| {
                let mut acc = t.coef * f64::from(t.exp[k]);
                for (i, (&e, &x)) in t.exp.iter().zip(m).enumerate() {
                    let e = if i == k { e - 1 } else { e };
                    if e > 0 {
                        acc *= x.powi(e as i32);
                    }
                }
                acc
            })
            .sum()
    }

    /// Gradient `(∂/∂m_k)_k` at `m`.
    pub fn gradient(&self, m: &[f64]) -> Vec<f64> {
        (0..self.vars).map(|k| self.partial(k, m)).collect()
    }
}
