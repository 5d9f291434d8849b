//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{MfgError, Result};

/// Induced ∞-norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn vec_inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Solves `a x = b` by partial-pivot LU; fails on an exactly singular or
/// non-finite solve.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<DVector<f64>> {
    let x = a
        .clone()
        .lu()
        .solve(b)
        .ok_or_else(|| MfgError::Singular(context.to_string()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MfgError::Singular(context.to_string()));
    }
    Ok(x)
}

pub fn inverse(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let inv = a
        .clone()
        .try_inverse()
        .ok_or_else(|| MfgError::Singular(context.to_string()))?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(MfgError::Singular(context.to_string()));
    }
    Ok(inv)
}

/// Least-squares / minimum-norm step via SVD, used when a Newton Jacobian is
/// rank deficient.
pub fn pseudo_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let eps = (smax * 1e-12).max(1e-300);
    svd.solve(b, eps).ok()
}

pub fn smallest_singular_value(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return f64::INFINITY;
    }
    a.clone()
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |m, &s| m.min(s))
}

/// Orthonormal basis of `{v : Σ v_i = 0}` in `R^n` (Helmert contrasts), as
/// the columns of an `n × (n - 1)` matrix.
pub fn tangent_basis(n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            u[(i, k - 1)] = 1.0 / norm;
        }
        u[(k, k - 1)] = -(k as f64) / norm;
    }
    u
}
