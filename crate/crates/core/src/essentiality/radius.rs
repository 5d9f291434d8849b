//! Perturbation constants, certified radii and the stationary-point
//! certificate.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EssentialityOptions, Verdict};
use crate::error::{MfgError, Result};
use crate::linalg::{inf_norm, inverse, vec_inf_norm};
use crate::mdp::{gap_at, optimal_deterministic_set};
use crate::model::{DeterministicStrategy, GameModel};
use crate::simplex::{ball_lattice, default_ball_steps, default_metric_resolution, simplex_grid, Distribution};
use crate::stationary::{
    augmented_transpose, fixed_point_jacobian, is_irreducible, stationary_points_with, stationary_residual,
    StationaryOptions,
};

const INF_MARGIN: f64 = 0.99;
const SUP_MARGIN: f64 = 1.01;
/// Maximum number of times a ball radius is halved.
pub const MAX_SHRINKS: usize = 5;

/// Grid extrema behind the certified radius, with margins applied:
/// `L1 = 0.99 inf ‖βI - Q^d‖`, `L2 = (1.01 sup ‖βI - Q^d‖)(1.01 sup ‖(βI - Q^d)^{-1}‖)`,
/// `L3 = 0.99 inf ‖r^d‖`, `L4 = 1.01 sup ‖V^d‖`, all in the max-row-sum norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConstants {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    /// `1.01 sup ‖(βI - Q^d)^{-1}‖`.
    pub sup_inverse_norm: f64,
    pub raw: RawExtrema,
    /// Constant added to every reward to make them positive (0 if none).
    pub reward_shift: f64,
    pub states: usize,
    pub grid_resolution: usize,
}

/// Unmargined grid extrema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawExtrema {
    pub inf_matrix_norm: f64,
    pub sup_matrix_norm: f64,
    pub sup_inverse_norm: f64,
    pub inf_reward_norm: f64,
    pub sup_value_norm: f64,
}

#[derive(Clone, Copy)]
struct Extrema {
    inf_m: f64,
    sup_m: f64,
    sup_inv: f64,
    inf_r: f64,
    sup_v: f64,
}

impl Extrema {
    const EMPTY: Self = Self {
        inf_m: f64::INFINITY,
        sup_m: 0.0,
        sup_inv: 0.0,
        inf_r: f64::INFINITY,
        sup_v: 0.0,
    };

    fn merge(self, o: Self) -> Self {
        Self {
            inf_m: self.inf_m.min(o.inf_m),
            sup_m: self.sup_m.max(o.sup_m),
            sup_inv: self.sup_inv.max(o.sup_inv),
            inf_r: self.inf_r.min(o.inf_r),
            sup_v: self.sup_v.max(o.sup_v),
        }
    }
}

/// Grid extrema over all deterministic strategies of the four quantities in
/// the value-perturbation bound. Rewards that are not strictly positive on
/// the grid are first shifted by `1 - inf r`.
pub fn perturbation_constants(model: &GameModel, grid_resolution: usize, cap: usize) -> Result<PerturbationConstants> {
    let s = model.states();
    let grid = simplex_grid(s, grid_resolution);
    let strategies = model.deterministic_strategies(cap)?;
    let r_min = model.reward_grid_min(&grid);
    let reward_shift = if r_min > 0.0 { 0.0 } else { 1.0 - r_min };
    let shifted = model.with_reward_shift(reward_shift);
    let beta = model.beta();
    let per_point: Vec<Result<Extrema>> = grid
        .par_iter()
        .map(|m| {
            let g = shifted.at(m.as_slice());
            let mut e = Extrema::EMPTY;
            for d in &strategies {
                let mat = DMatrix::identity(s, s) * beta - g.deterministic_generator(d);
                let inv = inverse(&mat, "βI - Q^d(m)")?;
                let r = g.deterministic_rewards(d);
                let v = &inv * &r;
                e = e.merge(Extrema {
                    inf_m: inf_norm(&mat),
                    sup_m: inf_norm(&mat),
                    sup_inv: inf_norm(&inv),
                    inf_r: vec_inf_norm(&r),
                    sup_v: vec_inf_norm(&v),
                });
            }
            Ok(e)
        })
        .collect();
    let mut e = Extrema::EMPTY;
    for p in per_point {
        e = e.merge(p?);
    }
    let values = [e.inf_m, e.sup_m, e.sup_inv, e.inf_r, e.sup_v];
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MfgError::Singular("non-finite perturbation constant".into()));
    }
    Ok(PerturbationConstants {
        l1: INF_MARGIN * e.inf_m,
        l2: SUP_MARGIN * e.sup_m * SUP_MARGIN * e.sup_inv,
        l3: INF_MARGIN * e.inf_r,
        l4: SUP_MARGIN * e.sup_v,
        sup_inverse_norm: SUP_MARGIN * e.sup_inv,
        raw: RawExtrema {
            inf_matrix_norm: e.inf_m,
            sup_matrix_norm: e.sup_m,
            sup_inverse_norm: e.sup_inv,
            inf_reward_norm: e.inf_r,
            sup_value_norm: e.sup_v,
        },
        reward_shift,
        states: s,
        grid_resolution,
    })
}

/// Radius of the game ball within which every `V^d(m)` moves by at most
/// `gamma`:
/// `0.99 min(1 / (2S sup‖(βI - Q^d)^{-1}‖), γ L1 L3 / (2 L2 L4 (S L3 + L1)))`.
pub fn certified_delta(model: &GameModel, gamma: f64, c: &PerturbationConstants) -> Result<f64> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(MfgError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if c.states != model.states() {
        return Err(MfgError::DimensionMismatch(format!(
            "constants computed for {} states, model has {}",
            c.states,
            model.states()
        )));
    }
    let s = model.states() as f64;
    let first = 1.0 / (2.0 * s * c.sup_inverse_norm);
    let second = if gamma.is_infinite() {
        f64::INFINITY
    } else {
        gamma * c.l1 * c.l3 / (2.0 * c.l2 * c.l4 * (s * c.l3 + c.l1))
    };
    Ok(0.99 * first.min(second))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyPersistence {
    /// Ball radius on which `D(m') = {d}` was verified.
    pub epsilon: f64,
    /// Smallest signed value gap of `d` over the ball lattice.
    pub gamma: f64,
    /// `certified_delta(γ / 3)`.
    pub delta: f64,
    pub shrinks: usize,
    pub ball_points: usize,
}

/// Ball around `m` on which `d` stays the unique optimal strategy, and the
/// game radius that preserves this.
pub fn strategy_persistence_radius(
    model: &GameModel,
    m: &Distribution,
    d: &DeterministicStrategy,
    epsilon: f64,
) -> Result<StrategyPersistence> {
    let opts = EssentialityOptions::default();
    let grid = opts.grid.unwrap_or_else(|| default_metric_resolution(model.states()));
    let constants = perturbation_constants(model, grid, opts.cap)?;
    persistence_with(model, m, d, epsilon, &constants, &opts)
}

pub(crate) fn persistence_with(
    model: &GameModel,
    m: &Distribution,
    d: &DeterministicStrategy,
    epsilon: f64,
    constants: &PerturbationConstants,
    opts: &EssentialityOptions,
) -> Result<StrategyPersistence> {
    if !(epsilon > 0.0) {
        return Err(MfgError::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
    }
    model.check_deterministic(d)?;
    let here = optimal_deterministic_set(model, m, opts.opt_tol, opts.cap)?;
    if here.len() != 1 || here[0] != *d {
        return Err(MfgError::NotUniqueOptimal(format!(
            "D(m) has {} members at this point, {d} is not its only element",
            here.len()
        )));
    }
    let strategies = model.deterministic_strategies(opts.cap)?;
    let steps = opts.ball_steps.unwrap_or_else(|| default_ball_steps(model.states()));
    let mut eps = epsilon;
    for shrinks in 0..=MAX_SHRINKS {
        let ball = ball_lattice(m, eps, steps);
        let gaps: Vec<Result<f64>> = ball
            .par_iter()
            .map(|p| gap_at(&model.at(p.as_slice()), d, &strategies))
            .collect();
        let mut gamma = f64::INFINITY;
        for g in gaps {
            gamma = gamma.min(g?);
        }
        if gamma > 0.0 {
            return Ok(StrategyPersistence {
                epsilon: eps,
                gamma,
                delta: certified_delta(model, gamma / 3.0, constants)?,
                shrinks,
                ball_points: ball.len(),
            });
        }
        eps *= 0.5;
    }
    Err(MfgError::NotUniqueOptimal(format!(
        "{d} loses strict optimality on every ball down to radius {}",
        eps * 2.0
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryCertificate {
    pub verdict: Verdict,
    /// Irreducible on the whole grid and a single stationary point.
    pub criterion_a: bool,
    /// Nondegenerate fixed point of `x(·)` with local irreducibility.
    pub criterion_b: bool,
    pub stationary_points: usize,
    pub continuum: bool,
    pub irreducible_on_grid: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub smallest_singular_value: Option<f64>,
    pub reason: String,
}

/// Sufficient conditions for `m` to be an essential stationary point of
/// `Q^d(·)`.
pub fn essential_stationary_check(
    model: &GameModel,
    d: &DeterministicStrategy,
    m: &Distribution,
    opts: &EssentialityOptions,
) -> Result<StationaryCertificate> {
    model.check_deterministic(d)?;
    let pi = d.to_stationary(model.actions());
    let residual = stationary_residual(model, &pi, m)?
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if residual > opts.eq.verify_tol {
        return Err(MfgError::NotStationary { residual });
    }
    let grid = simplex_grid(model.states(), opts.grid.unwrap_or_else(|| default_metric_resolution(model.states())));
    let irreducible_on_grid = grid
        .par_iter()
        .all(|p| is_irreducible(&model.at(p.as_slice()).generator(&pi)));
    let set = stationary_points_with(
        model,
        &pi,
        &StationaryOptions {
            grid: opts.eq.stationary_grid,
            tol: opts.eq.tol,
            dedup_radius: opts.eq.dedup_radius,
            max_iter: opts.eq.max_iter,
        },
    )?;
    let continuum = set.is_continuum();
    let criterion_a = irreducible_on_grid && !continuum && set.points.len() == 1;
    let (criterion_b, sv, jac_note) = match fixed_point_jacobian(model, &pi, m) {
        Ok(j) => (j.is_nondegenerate(), Some(j.smallest_singular_value), None),
        Err(e) => (false, None, Some(e.to_string())),
    };
    let mut fired = Vec::new();
    if criterion_a {
        fired.push("A (irreducible on the grid, unique stationary point)");
    }
    if criterion_b {
        fired.push("B (nondegenerate fixed point of x)");
    }
    let reason = if fired.is_empty() {
        let mut why = Vec::new();
        if !irreducible_on_grid {
            why.push("generator reducible somewhere on the grid".to_string());
        }
        if continuum {
            why.push("stationary points form a continuum".to_string());
        } else if set.points.len() != 1 {
            why.push(format!("{} stationary points", set.points.len()));
        }
        match (jac_note, sv) {
            (Some(e), _) => why.push(format!("fixed-point Jacobian unavailable: {e}")),
            (None, Some(s)) => why.push(format!("smallest singular value {s:.3e} at or below 1e-6")),
            _ => {}
        }
        why.join("; ")
    } else {
        format!("criterion {}", fired.join(" and "))
    };
    Ok(StationaryCertificate {
        verdict: if fired.is_empty() { Verdict::NotCertified } else { Verdict::Certified },
        criterion_a,
        criterion_b,
        stationary_points: set.points.len(),
        continuum,
        irreducible_on_grid,
        smallest_singular_value: sv,
        reason,
    })
}

/// Radius of rate perturbations that keep a stationary point of `Q^d` in
/// the max-norm ball of radius `epsilon` around `m`.
///
/// With `g(m) = m - x(m)` and `x` the solution of `Q̃ x = e_S`, a rate
/// perturbation of entrywise size `δ` moves `x` by at most
/// `2 S δ sup_B ‖Q̃^{-1}‖` while `S δ ‖Q̃^{-1}‖ ≤ 1/2`. If that stays below
/// `min_{∂B} ‖g‖`, the perturbed `g` is homotopic to `g` without zeros on
/// `∂B` and keeps a zero inside.
pub(crate) fn stationary_radius(
    model: &GameModel,
    d: &DeterministicStrategy,
    m: &Distribution,
    epsilon: f64,
    steps: usize,
) -> Option<(f64, f64)> {
    let s = model.states();
    let pi = d.to_stationary(model.actions());
    let mut eps = epsilon;
    for _ in 0..=MAX_SHRINKS {
        let ball = ball_lattice(m, eps, steps);
        let mut sup_inv: f64 = 0.0;
        let mut min_g = f64::INFINITY;
        let mut ok = true;
        for p in &ball {
            let q = model.at(p.as_slice()).generator(&pi);
            if !is_irreducible(&q) {
                ok = false;
                break;
            }
            let Ok(inv) = inverse(&augmented_transpose(&q), "Q̃(m)") else {
                ok = false;
                break;
            };
            sup_inv = sup_inv.max(inf_norm(&inv));
            if p.max_dist(m) >= eps * (1.0 - 1e-9) {
                let e_s = nalgebra::DVector::from_fn(s, |i, _| if i + 1 == s { 1.0 } else { 0.0 });
                let x = &inv * e_s;
                let gap = (0..s).map(|i| (p[i] - x[i]).abs()).fold(0.0, f64::max);
                min_g = min_g.min(gap);
            }
        }
        if ok && min_g.is_finite() && min_g > 0.0 {
            let sup_inv = SUP_MARGIN * sup_inv;
            let by_boundary = min_g / (2.0 * s as f64 * sup_inv);
            let by_inverse = 0.5 / (s as f64 * sup_inv);
            return Some((0.99 * by_boundary.min(by_inverse), eps));
        }
        eps *= 0.5;
    }
    None
}
