//! Stationary mean field equilibria: verification, enumeration and set
//! distances.
//!
//! An equilibrium is a pair `(m, π)` with `m` stationary under `Q^π(m)` and
//! every action used by `π` a best response to the frozen population `m`.

mod mixed;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::mdp::{gap_at, is_optimal_selection, optimal_at, support_within, DEFAULT_OPT_TOL, DEFAULT_STRATEGY_CAP};
use crate::model::{DeterministicStrategy, GameModel, StationaryStrategy};
use crate::simplex::{max_norm_diff, Distribution};
use crate::stationary::{stationary_points_with, stationary_residual, StationaryOptions};

pub use mixed::{enumerate_supports, find_mixed_equilibria, MixedSearchReport, Support, SupportChoice, MIN_SUPPORT_WEIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumKind {
    Deterministic,
    Mixed,
}

/// Outcome of checking both equilibrium conditions at a candidate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖mᵀ Q^π(m)‖_∞`.
    pub stationarity_residual: f64,
    pub optimal: bool,
    /// Per state and action: `q_ia - βV*_i`, zero on argmax actions.
    pub margins: Vec<Vec<f64>>,
    /// Smallest relative margin over the actions `π` uses; `≥ -tol` when
    /// optimal.
    pub optimality_margin: f64,
    /// Signed value gap of the strategy (deterministic pairs only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value_gap: Option<f64>,
    /// Largest spread of Bellman values across a state's support (mixed
    /// pairs only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub indifference_residual: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub m: Distribution,
    pub pi: StationaryStrategy,
    pub kind: EquilibriumKind,
    /// 1-based action labels with positive weight, per state.
    pub support: Vec<Vec<usize>>,
    pub diagnostics: Diagnostics,
}

impl Equilibrium {
    pub fn strategy(&self) -> Option<DeterministicStrategy> {
        self.pi.as_deterministic()
    }

    /// Max-norm distance on the concatenated `(m, π)` vector.
    pub fn distance_to(&self, m: &Distribution, pi: &StationaryStrategy) -> f64 {
        pair_distance((&self.m, &self.pi), (m, pi))
    }
}

pub fn pair_distance(a: (&Distribution, &StationaryStrategy), b: (&Distribution, &StationaryStrategy)) -> f64 {
    a.0.max_dist(b.0).max(max_norm_diff(&a.1.flat(), &b.1.flat()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EquilibriumWarning {
    /// No equilibrium found, although one always exists: the search grids are
    /// too coarse.
    Empty,
    /// The equilibria near `source` are not isolated; the list only samples
    /// them.
    Continuum { source: String, reason: String },
    /// A support whose equations cannot be square after degeneracy checks.
    IllPosedSupport { support: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchMetadata {
    pub stationary_grid: usize,
    pub mixed_grid: usize,
    pub strategy_cap: usize,
    pub support_cap: usize,
    pub strategies_examined: usize,
    pub supports_examined: usize,
    pub newton_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSet {
    pub items: Vec<Equilibrium>,
    pub dedup_radius: f64,
    pub metadata: SearchMetadata,
    pub warnings: Vec<EquilibriumWarning>,
}

impl EquilibriumSet {
    /// Wraps an arbitrary list, removing near-duplicates.
    pub fn from_items(items: Vec<Equilibrium>, dedup_radius: f64) -> Self {
        Self {
            items: dedup(items, dedup_radius),
            dedup_radius,
            metadata: SearchMetadata {
                stationary_grid: 0,
                mixed_grid: 0,
                strategy_cap: 0,
                support_cap: 0,
                strategies_examined: 0,
                supports_examined: 0,
                newton_starts: 0,
            },
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn is_continuum(&self) -> bool {
        self.warnings
            .iter()
            .any(|w| matches!(w, EquilibriumWarning::Continuum { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    /// Seeding grid for stationary points of each `Q^d`; `None` = default.
    pub stationary_grid: Option<usize>,
    /// `m`-grid for mixed-support Newton starts; `None` = default.
    pub mixed_grid: Option<usize>,
    /// Newton convergence tolerance.
    pub tol: f64,
    /// Residual tolerance for accepting a pair.
    pub verify_tol: f64,
    /// Relative band for argmax membership.
    pub opt_tol: f64,
    pub strategy_cap: usize,
    /// Largest `Σ_i (|A_i| - 1)` over enumerated supports.
    pub support_cap: usize,
    pub dedup_radius: f64,
    /// Weight seeds per `m` seed (the first is uniform).
    pub weight_seeds: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self {
            stationary_grid: None,
            mixed_grid: None,
            tol: 1e-10,
            verify_tol: 1e-8,
            opt_tol: DEFAULT_OPT_TOL,
            strategy_cap: DEFAULT_STRATEGY_CAP,
            support_cap: 4,
            dedup_radius: 1e-6,
            weight_seeds: 3,
            seed: 0,
            max_iter: 80,
        }
    }
}

/// Default `m`-grid resolution for mixed-support starts.
pub fn default_mixed_grid(states: usize) -> usize {
    match states {
        0..=2 => 20,
        3 => 8,
        4..=5 => 4,
        _ => 2,
    }
}

/// Checks stationarity and best response for `(m, π)`.
pub fn verify_equilibrium(
    model: &GameModel,
    m: &Distribution,
    pi: &StationaryStrategy,
    tol: f64,
) -> Result<Diagnostics> {
    verify_with(model, m, pi, tol, tol)
}

fn verify_with(
    model: &GameModel,
    m: &Distribution,
    pi: &StationaryStrategy,
    residual_tol: f64,
    opt_tol: f64,
) -> Result<Diagnostics> {
    let residual = stationary_residual(model, pi, m)?
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let g = model.at(m.as_slice());
    let opt = optimal_at(&g, opt_tol)?;
    let beta = model.beta();
    let v = opt.value.values();
    let margins: Vec<Vec<f64>> = (0..model.states())
        .map(|i| {
            (0..model.actions())
                .map(|a| opt.action_values[i][a] - beta * v[i])
                .collect()
        })
        .collect();
    let mut optimality_margin = f64::INFINITY;
    let mut spread: f64 = 0.0;
    for (i, row) in margins.iter().enumerate() {
        let scale = 1.0 + (beta * v[i]).abs();
        let used = pi.support(i);
        for &a in &used {
            optimality_margin = optimality_margin.min(row[a] / scale);
        }
        let (lo, hi) = used.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &a| {
            (lo.min(row[a]), hi.max(row[a]))
        });
        spread = spread.max(hi - lo);
    }
    let optimal = support_within(pi, &opt);
    let (value_gap, indifference_residual) = match pi.as_deterministic() {
        Some(d) if model.strategy_count() <= DEFAULT_STRATEGY_CAP as u128 => {
            let all = model.deterministic_strategies(DEFAULT_STRATEGY_CAP)?;
            (Some(gap_at(&g, &d, &all)?), None)
        }
        Some(_) => (None, None),
        None => (None, Some(spread)),
    };
    Ok(Diagnostics {
        stationarity_residual: residual,
        optimal,
        margins,
        optimality_margin,
        value_gap,
        indifference_residual,
        passed: residual <= residual_tol && optimal,
    })
}

pub(crate) fn one_based_support(pi: &StationaryStrategy) -> Vec<Vec<usize>> {
    (0..pi.states())
        .map(|i| pi.support(i).into_iter().map(|a| a + 1).collect())
        .collect()
}

pub(crate) fn make_equilibrium(
    model: &GameModel,
    m: Distribution,
    pi: StationaryStrategy,
    opts: &EquilibriumOptions,
) -> Result<Equilibrium> {
    let diagnostics = verify_with(model, &m, &pi, opts.verify_tol, opts.opt_tol)?;
    let kind = if pi.as_deterministic().is_some() {
        EquilibriumKind::Deterministic
    } else {
        EquilibriumKind::Mixed
    };
    Ok(Equilibrium {
        support: one_based_support(&pi),
        m,
        pi,
        kind,
        diagnostics,
    })
}

struct DeterministicSearch {
    items: Vec<Equilibrium>,
    warnings: Vec<EquilibriumWarning>,
    strategies: usize,
    grid: usize,
    starts: usize,
}

fn deterministic_search(model: &GameModel, opts: &EquilibriumOptions) -> Result<DeterministicSearch> {
    let strategies = model.deterministic_strategies(opts.strategy_cap)?;
    let sopts = StationaryOptions {
        grid: opts.stationary_grid,
        tol: opts.tol,
        dedup_radius: opts.dedup_radius,
        max_iter: opts.max_iter,
    };
    let per_strategy: Vec<Result<(Vec<Equilibrium>, Option<EquilibriumWarning>, usize, usize)>> = strategies
        .par_iter()
        .map(|d| {
            let pi = d.to_stationary(model.actions());
            let set = stationary_points_with(model, &pi, &sopts)?;
            let warning = set.is_continuum().then(|| EquilibriumWarning::Continuum {
                source: format!("stationary points of d = {d}"),
                reason: "distinct_starts".into(),
            });
            let mut kept = Vec::new();
            for m in set.points {
                let g = model.at(m.as_slice());
                let opt = optimal_at(&g, opts.opt_tol)?;
                if is_optimal_selection(&g, d, &opt, opts.opt_tol)? {
                    kept.push(make_equilibrium(model, m, pi.clone(), opts)?);
                }
            }
            Ok((kept, warning, set.seeds_used, set.grid_resolution))
        })
        .collect();
    let mut out = DeterministicSearch {
        items: Vec::new(),
        warnings: Vec::new(),
        strategies: strategies.len(),
        grid: 0,
        starts: 0,
    };
    for r in per_strategy {
        let (kept, warning, seeds, grid) = r?;
        // a continuum of stationary points only matters if some are equilibria
        if !kept.is_empty() {
            out.warnings.extend(warning);
        }
        out.items.extend(kept);
        out.starts += seeds;
        out.grid = grid;
    }
    Ok(out)
}

/// For each deterministic `d`, the stationary points of `Q^d` at which `d`
/// is optimal.
pub fn find_deterministic_equilibria(model: &GameModel, opts: &EquilibriumOptions) -> Result<Vec<Equilibrium>> {
    Ok(deterministic_search(model, opts)?.items)
}

/// Union of the deterministic and mixed searches, deduplicated in
/// canonical order (strategy index, then support, then seed).
pub fn find_all_equilibria(model: &GameModel, opts: &EquilibriumOptions) -> Result<EquilibriumSet> {
    let det = deterministic_search(model, opts)?;
    let mut items = det.items;
    let mut warnings = det.warnings;
    let mut supports_examined = 0;
    let mut newton_starts = det.starts;
    let mixed_grid = opts.mixed_grid.unwrap_or_else(|| default_mixed_grid(model.states()));
    if model.actions() >= 2 {
        let mixed = mixed::search(model, &SupportChoice::All, opts)?;
        supports_examined = mixed.supports_examined;
        newton_starts += mixed.starts;
        items.extend(mixed.items);
        warnings.extend(mixed.warnings);
    }
    let items = dedup(items, opts.dedup_radius);
    if items.is_empty() {
        warnings.push(EquilibriumWarning::Empty);
    }
    Ok(EquilibriumSet {
        items,
        dedup_radius: opts.dedup_radius,
        metadata: SearchMetadata {
            stationary_grid: det.grid,
            mixed_grid,
            strategy_cap: opts.strategy_cap,
            support_cap: opts.support_cap,
            strategies_examined: det.strategies,
            supports_examined,
            newton_starts,
        },
        warnings,
    })
}

/// Keeps the first of every group of pairs closer than `radius`.
pub fn dedup(items: Vec<Equilibrium>, radius: f64) -> Vec<Equilibrium> {
    let mut out: Vec<Equilibrium> = Vec::with_capacity(items.len());
    for e in items {
        if out.iter().all(|k| k.distance_to(&e.m, &e.pi) >= radius) {
            out.push(e);
        }
    }
    out
}

/// `min_{e ∈ set} ‖(m, π) - e‖_∞`.
pub fn set_distance(m: &Distribution, pi: &StationaryStrategy, set: &EquilibriumSet) -> Result<f64> {
    if set.is_empty() {
        return Err(MfgError::EmptySet);
    }
    Ok(set
        .items
        .iter()
        .map(|e| e.distance_to(m, pi))
        .fold(f64::INFINITY, f64::min))
}

/// Hausdorff distance between two finite equilibrium sets.
pub fn hausdorff(a: &EquilibriumSet, b: &EquilibriumSet) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(MfgError::EmptySet);
    }
    let directed = |x: &EquilibriumSet, y: &EquilibriumSet| {
        x.items
            .iter()
            .map(|e| set_distance(&e.m, &e.pi, y).expect("nonempty"))
            .fold(0.0, f64::max)
    };
    Ok(directed(a, b).max(directed(b, a)))
}
