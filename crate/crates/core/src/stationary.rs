//! Population-side stationarity: solutions of `0 = mᵀ Q^π(m)` on the simplex.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::linalg::{pseudo_solve, smallest_singular_value, solve, tangent_basis};
use crate::model::{GameModel, StationaryStrategy};
use crate::simplex::{default_seed_resolution, simplex_grid, Distribution};

/// Off-diagonal rates above this count as edges of the transition graph.
pub const EDGE_TOL: f64 = 1e-12;
/// Finite-difference step for fixed-point Jacobians.
pub const FD_STEP: f64 = 1e-6;
/// Smallest singular value above which a fixed point counts as nondegenerate.
pub const NONDEGENERATE_SV: f64 = 1e-6;

/// `(Σ_i m_i Q^π_ij(m))_j`.
pub fn stationary_residual(model: &GameModel, pi: &StationaryStrategy, m: &Distribution) -> Result<Vec<f64>> {
    let q = model.effective_generator(pi, m)?;
    Ok(left_product(m.as_slice(), &q))
}

fn left_product(m: &[f64], q: &DMatrix<f64>) -> Vec<f64> {
    (0..q.ncols())
        .map(|j| m.iter().enumerate().map(|(i, &mi)| mi * q[(i, j)]).sum())
        .collect()
}

fn inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Transitive closure of the edge relation `Q_ij > EDGE_TOL`, `i ≠ j`
/// (reflexive).
fn reachability(q: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let n = q.nrows();
    let mut reach: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| i == j || q[(i, j)] > EDGE_TOL).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    reach
}

/// Communicating classes (0-based), ordered by their smallest member.
pub fn communicating_classes(q: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let reach = reachability(q);
    let n = q.nrows();
    let mut assigned = vec![false; n];
    let mut classes = Vec::new();
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            assigned[j] = true;
        }
        classes.push(class);
    }
    classes
}

/// True iff the transition graph of the generator is strongly connected.
pub fn is_irreducible(q: &DMatrix<f64>) -> bool {
    reachability(q).iter().all(|row| row.iter().all(|&r| r))
}

fn require_irreducible(q: &DMatrix<f64>) -> Result<()> {
    if is_irreducible(q) {
        return Ok(());
    }
    let class = communicating_classes(q)
        .into_iter()
        .next()
        .expect("at least one class");
    Err(MfgError::Reducible {
        class: class.into_iter().map(|i| i + 1).collect(),
    })
}

/// Solves `Q̃ x = (0, …, 0, 1)` where `Q̃` is `Qᵀ` with its last row replaced
/// by ones.
fn invariant_distribution(q: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = q.nrows();
    let mut qt = q.transpose();
    for j in 0..n {
        qt[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    solve(&qt, &rhs, "invariant-distribution system Q̃ x = e_S")
}

/// The matrix `Q̃(m)` itself, for perturbation bounds.
pub(crate) fn augmented_transpose(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let mut qt = q.transpose();
    for j in 0..n {
        qt[(n - 1, j)] = 1.0;
    }
    qt
}

/// The unique invariant distribution of the irreducible generator `Q^π(m)`.
pub fn x_map(model: &GameModel, pi: &StationaryStrategy, m: &Distribution) -> Result<Distribution> {
    let q = model.effective_generator(pi, m)?;
    require_irreducible(&q)?;
    let x = invariant_distribution(&q)?;
    Ok(Distribution::project(x.as_slice()))
}

fn x_map_unchecked(model: &GameModel, pi: &StationaryStrategy, m: &[f64]) -> Result<(DVector<f64>, bool)> {
    let q = model.at(m).generator(pi);
    let irreducible = is_irreducible(&q);
    Ok((invariant_distribution(&q)?, irreducible))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointJacobian {
    /// Jacobian of `g(m) = m - x(m)` in an orthonormal basis of the tangent
    /// space `{v : Σ v = 0}`, `(S-1) × (S-1)` row-major.
    pub matrix: Vec<Vec<f64>>,
    pub smallest_singular_value: f64,
}

impl FixedPointJacobian {
    pub fn is_nondegenerate(&self) -> bool {
        self.smallest_singular_value > NONDEGENERATE_SV
    }
}

/// Central-difference Jacobian of `m - x(m)` restricted to the simplex
/// tangent space.
pub fn fixed_point_jacobian(
    model: &GameModel,
    pi: &StationaryStrategy,
    m: &Distribution,
) -> Result<FixedPointJacobian> {
    let s = model.states();
    x_map(model, pi, m)?;
    let u = tangent_basis(s);
    let mut dx = DMatrix::zeros(s, s - 1);
    for k in 0..s - 1 {
        let dir = u.column(k);
        let up: Vec<f64> = (0..s).map(|i| m[i] + FD_STEP * dir[i]).collect();
        let dn: Vec<f64> = (0..s).map(|i| m[i] - FD_STEP * dir[i]).collect();
        let (xu, irr_u) = x_map_unchecked(model, pi, &up)?;
        let (xd, irr_d) = x_map_unchecked(model, pi, &dn)?;
        if !(irr_u && irr_d) {
            let point = if irr_u { dn } else { up };
            let q = model.at(&point).generator(pi);
            require_irreducible(&q)?;
        }
        dx.set_column(k, &((xu - xd) / (2.0 * FD_STEP)));
    }
    let j = DMatrix::identity(s - 1, s - 1) - u.transpose() * dx;
    let sv = smallest_singular_value(&j);
    Ok(FixedPointJacobian {
        matrix: j.row_iter().map(|r| r.iter().copied().collect()).collect(),
        smallest_singular_value: sv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryOptions {
    /// Seeding grid resolution; `None` picks the per-size default.
    pub grid: Option<usize>,
    pub tol: f64,
    pub dedup_radius: f64,
    pub max_iter: usize,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            grid: None,
            tol: 1e-10,
            dedup_radius: 1e-6,
            max_iter: 80,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StationaryWarning {
    /// Too many seeds converged to distinct points: the stationary set looks
    /// like a continuum and the point list is only a sample of it.
    Continuum { distinct: usize, seeds: usize },
    /// No seed converged, although generators always have stationary points.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryPointSet {
    pub points: Vec<Distribution>,
    /// `‖mᵀ Q^π(m)‖_∞` per point, recomputed after the solve.
    pub residuals: Vec<f64>,
    pub seeds_used: usize,
    pub grid_resolution: usize,
    pub dedup_radius: f64,
    pub warnings: Vec<StationaryWarning>,
}

impl StationaryPointSet {
    pub fn is_continuum(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, StationaryWarning::Continuum { .. }))
    }
}

/// Stationarity residual and its Jacobian for the square system
/// `[(mᵀQ(m))_{1..S-1}; Σ m - 1]`.
struct StationarySystem<'a> {
    model: &'a GameModel,
    pi: &'a StationaryStrategy,
}

impl StationarySystem<'_> {
    fn residual(&self, m: &[f64]) -> Vec<f64> {
        left_product(m, &self.model.at(m).generator(self.pi))
    }

    /// `∂(mᵀQ(m))_j / ∂m_k = Q_kj(m) + Σ_i m_i ∂Q_ij/∂m_k`.
    fn jacobian(&self, m: &[f64]) -> DMatrix<f64> {
        let model = self.model;
        let s = model.states();
        let q = model.at(m).generator(self.pi);
        let mut jac = DMatrix::zeros(s, s);
        for i in 0..s {
            for a in 0..model.actions() {
                let w = self.pi.weight(i, a);
                if w == 0.0 {
                    continue;
                }
                for j in (0..s).filter(|&j| j != i) {
                    let p = model.rate_field(i, j, a);
                    if p.is_zero() {
                        continue;
                    }
                    for k in 0..s {
                        let d = w * m[i] * p.partial(k, m);
                        jac[(j, k)] += d;
                        jac[(i, k)] -= d;
                    }
                }
            }
        }
        for j in 0..s {
            for k in 0..s {
                jac[(j, k)] += q[(k, j)];
            }
        }
        for k in 0..s {
            jac[(s - 1, k)] = 1.0;
        }
        jac
    }

    fn newton(&self, seed: &Distribution, opts: &StationaryOptions) -> Option<(Distribution, f64)> {
        let s = self.model.states();
        let mut m = seed.as_slice().to_vec();
        let mut res = inf(&self.residual(&m));
        let mut iter = 0;
        let mut polish = 2;
        while iter < opts.max_iter {
            iter += 1;
            if res <= opts.tol {
                if polish == 0 {
                    break;
                }
                polish -= 1;
            }
            let mut f = DVector::from_vec(self.residual(&m));
            f[s - 1] = m.iter().sum::<f64>() - 1.0;
            let jac = self.jacobian(&m);
            let step = match jac.clone().lu().solve(&(-&f)) {
                Some(x) if x.iter().all(|v| v.is_finite()) => x,
                _ => pseudo_solve(&jac, &(-&f))?,
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda >= 1.0 / 1024.0 {
                let trial: Vec<f64> = m.iter().zip(step.iter()).map(|(x, d)| x + lambda * d).collect();
                let trial = Distribution::project(&trial).into_vec();
                let r = inf(&self.residual(&trial));
                if r < res * (1.0 - 1e-4 * lambda) || (res <= opts.tol && r <= res) {
                    m = trial;
                    res = r;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (res <= opts.tol).then(|| (Distribution::project(&m), res))
    }
}

/// Multi-start Newton search for stationary points of `Q^π(·)`, seeded from
/// every point of a uniform simplex grid.
pub fn stationary_points(
    model: &GameModel,
    pi: &StationaryStrategy,
    grid_resolution: usize,
    tol: f64,
) -> Result<StationaryPointSet> {
    stationary_points_with(
        model,
        pi,
        &StationaryOptions {
            grid: Some(grid_resolution),
            tol,
            ..Default::default()
        },
    )
}

pub fn stationary_points_with(
    model: &GameModel,
    pi: &StationaryStrategy,
    opts: &StationaryOptions,
) -> Result<StationaryPointSet> {
    model.check_strategy(pi)?;
    let resolution = opts.grid.unwrap_or_else(|| default_seed_resolution(model.states()));
    if resolution < 2 {
        return Err(MfgError::InvalidArgument(format!(
            "seeding grid resolution must be at least 2, got {resolution}"
        )));
    }
    let seeds = simplex_grid(model.states(), resolution);
    let system = StationarySystem { model, pi };
    let solved: Vec<Option<(Distribution, f64)>> =
        seeds.par_iter().map(|seed| system.newton(seed, opts)).collect();

    let mut points: Vec<Distribution> = Vec::new();
    for (p, _) in solved.into_iter().flatten() {
        if points.iter().all(|q| q.max_dist(&p) >= opts.dedup_radius) {
            points.push(p);
        }
    }
    let residuals = points
        .iter()
        .map(|p| inf(&system.residual(p.as_slice())))
        .collect();
    let mut warnings = Vec::new();
    if points.is_empty() {
        warnings.push(StationaryWarning::Empty);
    } else if is_continuum_count(points.len(), seeds.len()) {
        warnings.push(StationaryWarning::Continuum {
            distinct: points.len(),
            seeds: seeds.len(),
        });
    }
    Ok(StationaryPointSet {
        points,
        residuals,
        seeds_used: seeds.len(),
        grid_resolution: resolution,
        dedup_radius: opts.dedup_radius,
        warnings,
    })
}

/// More than a quarter of the seeds landed on mutually distinct points (and
/// at least three of them).
pub(crate) fn is_continuum_count(distinct: usize, seeds: usize) -> bool {
    distinct >= 3 && distinct as f64 > 0.25 * seeds as f64
}
