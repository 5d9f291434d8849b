//! The individual agent's discounted control problem at a frozen population
//! distribution.
//!
//! For a deterministic stationary strategy `d` the value is the unique
//! solution of `(βI - Q^d(m)) V = r^d(m)`. Optimal strategies are exactly the
//! mixtures of optimal deterministic ones, and the optimal deterministic set
//! is a product of per-state argmax sets of the Bellman action values
//! `r_{ia}(m) + Σ_j Q_{ija}(m) V*_j`.

mod montecarlo;

pub use montecarlo::{default_horizon, monte_carlo_value, McEstimate, McOptions};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::linalg::{solve, vec_inf_norm};
use crate::model::{DeterministicStrategy, GameAt, GameModel, StationaryStrategy};
use crate::simplex::Distribution;

/// Default relative tolerance for membership in the per-state argmax sets.
pub const DEFAULT_OPT_TOL: f64 = 1e-7;
/// Default cap on enumerated deterministic strategies.
pub const DEFAULT_STRATEGY_CAP: usize = 4096;

/// Discounted value per starting state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueVector(DVector<f64>);

impl ValueVector {
    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn max_abs(&self) -> f64 {
        vec_inf_norm(&self.0)
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        vec_inf_norm(&(&self.0 - &other.0))
    }
}

impl Serialize for ValueVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ValueVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Self(DVector::from_vec(Vec::<f64>::deserialize(d)?)))
    }
}

fn discounted_system(g: &GameAt, q: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::identity(g.states(), g.states()) * g.beta() - q
}

pub(crate) fn solve_deterministic(g: &GameAt, d: &DeterministicStrategy) -> Result<DVector<f64>> {
    let a = discounted_system(g, &g.deterministic_generator(d));
    let r = g.deterministic_rewards(d);
    let v = solve(&a, &r, "discounted value system (βI - Q^d) V = r^d")?;
    let residual = vec_inf_norm(&(&a * &v - &r));
    if residual > 1e-10 * (1.0 + vec_inf_norm(&r)) {
        return Err(MfgError::Singular(format!(
            "value solve residual {residual:e} exceeds tolerance"
        )));
    }
    Ok(v)
}

/// `V^d(m)` by a direct linear solve.
pub fn value_of_deterministic(
    model: &GameModel,
    d: &DeterministicStrategy,
    m: &Distribution,
) -> Result<ValueVector> {
    model.check_deterministic(d)?;
    check_point(model, m)?;
    solve_deterministic(&model.at(m.as_slice()), d).map(ValueVector)
}

/// `V^π(m)` for a stationary (possibly mixed) strategy.
pub fn value_of_stationary(
    model: &GameModel,
    pi: &StationaryStrategy,
    m: &Distribution,
) -> Result<ValueVector> {
    model.check_strategy(pi)?;
    check_point(model, m)?;
    let g = model.at(m.as_slice());
    let a = discounted_system(&g, &g.generator(pi));
    solve(&a, &g.rewards_under(pi), "discounted value system (βI - Q^π) V = r^π").map(ValueVector)
}

fn check_point(model: &GameModel, m: &Distribution) -> Result<()> {
    if m.len() != model.states() {
        return Err(MfgError::DimensionMismatch(format!(
            "distribution of length {} for a {}-state model",
            m.len(),
            model.states()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    PolicyIteration,
    /// Policy iteration did not settle within its round budget and the
    /// optimum was taken by exhaustive enumeration.
    EnumerationFallback,
    /// Neither converged nor enumerable; the last policy-iteration iterate.
    Unconverged,
}

/// `V*(m)` together with the per-state argmax sets `A_i*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalStrategySet {
    /// 0-based action indices, sorted.
    pub per_state_actions: Vec<Vec<usize>>,
    pub value: ValueVector,
    /// Bellman action values `q_{ia}` at `V*`.
    pub action_values: Vec<Vec<f64>>,
    pub method: SolveMethod,
    pub rounds: usize,
}

impl OptimalStrategySet {
    /// `|D(m)| = Π_i |A_i*|`.
    pub fn size(&self) -> u128 {
        self.per_state_actions
            .iter()
            .map(|s| s.len() as u128)
            .product()
    }

    pub fn contains(&self, d: &DeterministicStrategy) -> bool {
        d.actions()
            .iter()
            .zip(&self.per_state_actions)
            .all(|(a, set)| set.contains(a))
    }

    /// `q_{ia} - max_b q_{ib}` (nonpositive; zero for argmax actions).
    pub fn margin(&self, i: usize, a: usize) -> f64 {
        let best = self.action_values[i]
            .iter()
            .fold(f64::NEG_INFINITY, |m, &q| m.max(q));
        self.action_values[i][a] - best
    }

    /// The first (lexicographically smallest) optimal deterministic strategy.
    pub fn first(&self) -> DeterministicStrategy {
        DeterministicStrategy::new(self.per_state_actions.iter().map(|s| s[0]).collect())
    }
}

fn action_values(g: &GameAt, v: &DVector<f64>) -> Vec<Vec<f64>> {
    (0..g.states())
        .map(|i| (0..g.actions()).map(|a| g.action_value(i, a, v)).collect())
        .collect()
}

/// Largest `|βV_i - max_a q_ia|` for a candidate value vector.
pub fn bellman_residual(model: &GameModel, m: &Distribution, v: &ValueVector) -> f64 {
    let g = model.at(m.as_slice());
    action_values(&g, v.vector())
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let best = q.iter().fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            (g.beta() * v.values()[i] - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Index of the greatest entry, preferring `keep` when it is within
/// round-off of the maximum so that policy iteration cannot cycle on ties.
fn improved_action(q: &[f64], keep: usize) -> usize {
    let best = q.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let band = 1e-12 * (1.0 + best.abs());
    if q[keep] >= best - band {
        return keep;
    }
    q.iter().position(|&x| x >= best - band).expect("nonempty action set")
}

pub(crate) fn optimal_at(g: &GameAt, tol: f64) -> Result<OptimalStrategySet> {
    let (s, a_n) = (g.states(), g.actions());
    let greedy: Vec<usize> = (0..s)
        .map(|i| {
            let r: Vec<f64> = (0..a_n).map(|a| g.reward(i, a)).collect();
            improved_action(&r, 0)
        })
        .collect();
    let mut d = DeterministicStrategy::new(greedy);
    let max_rounds = s * a_n + 10;
    let mut v = solve_deterministic(g, &d)?;
    let mut method = SolveMethod::Unconverged;
    let mut rounds = 0;
    while rounds < max_rounds {
        rounds += 1;
        let q = action_values(g, &v);
        let next = DeterministicStrategy::new(
            (0..s).map(|i| improved_action(&q[i], d[i])).collect(),
        );
        if next == d {
            method = SolveMethod::PolicyIteration;
            break;
        }
        d = next;
        v = solve_deterministic(g, &d)?;
    }
    if method == SolveMethod::Unconverged {
        let count = (a_n as u128).saturating_pow(s as u32);
        if count <= DEFAULT_STRATEGY_CAP as u128 {
            let mut best: Option<DVector<f64>> = None;
            for k in 0..count as usize {
                let vd = solve_deterministic(g, &DeterministicStrategy::from_index(k, s, a_n))?;
                best = Some(match best {
                    None => vd,
                    Some(b) => b.zip_map(&vd, f64::max),
                });
            }
            v = best.expect("at least one strategy");
            method = SolveMethod::EnumerationFallback;
        }
    }
    let q = action_values(g, &v);
    let per_state_actions = (0..s)
        .map(|i| {
            let target = g.beta() * v[i];
            let band = tol * (1.0 + target.abs());
            let set: Vec<usize> = (0..a_n).filter(|&a| q[i][a] >= target - band).collect();
            if set.is_empty() {
                // only reachable for an unconverged iterate; keep the argmax
                vec![improved_action(&q[i], 0)]
            } else {
                set
            }
        })
        .collect();
    Ok(OptimalStrategySet {
        per_state_actions,
        value: ValueVector(v),
        action_values: q,
        method,
        rounds,
    })
}

/// `V*(m)` and the argmax sets, by Howard policy iteration with an
/// enumeration fallback.
pub fn optimal_value(model: &GameModel, m: &Distribution, tol: f64) -> Result<OptimalStrategySet> {
    if !(tol > 0.0) {
        return Err(MfgError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    check_point(model, m)?;
    optimal_at(&model.at(m.as_slice()), tol)
}

/// Materializes `D(m)` as a list, each member checked against `V*`.
pub fn optimal_deterministic_set(
    model: &GameModel,
    m: &Distribution,
    tol: f64,
    cap: usize,
) -> Result<Vec<DeterministicStrategy>> {
    let opt = optimal_value(model, m, tol)?;
    let count = opt.size();
    if count > cap as u128 {
        return Err(MfgError::CapExceeded { count, cap });
    }
    let g = model.at(m.as_slice());
    let mut out = Vec::with_capacity(count as usize);
    let sizes: Vec<usize> = opt.per_state_actions.iter().map(Vec::len).collect();
    let mut idx = vec![0usize; sizes.len()];
    loop {
        let d = DeterministicStrategy::new(
            idx.iter()
                .zip(&opt.per_state_actions)
                .map(|(&k, set)| set[k])
                .collect(),
        );
        if value_matches(&g, &d, &opt, tol)? {
            out.push(d);
        }
        // odometer over the product, last state fastest
        let mut pos = sizes.len();
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < sizes[pos] {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// `V^d` agrees with `V*` up to the error a near-tie selection can carry,
/// `tol (1 + β|V|) / β`, with a safety factor of 10.
fn value_matches(g: &GameAt, d: &DeterministicStrategy, opt: &OptimalStrategySet, tol: f64) -> Result<bool> {
    let check = 10.0 * tol * (1.0 + opt.value.max_abs()) / g.beta().min(1.0);
    let vd = solve_deterministic(g, d)?;
    Ok(vec_inf_norm(&(&vd - opt.value.vector())) <= check)
}

/// `d ∈ D(m)`: every action of `d` is in the argmax band and `V^d ≈ V*`.
pub(crate) fn is_optimal_selection(
    g: &GameAt,
    d: &DeterministicStrategy,
    opt: &OptimalStrategySet,
    tol: f64,
) -> Result<bool> {
    Ok(opt.contains(d) && value_matches(g, d, opt, tol)?)
}

/// True iff every action used by `pi` lies in the argmax set of its state.
pub fn is_strategy_optimal(
    model: &GameModel,
    pi: &StationaryStrategy,
    m: &Distribution,
    tol: f64,
) -> Result<bool> {
    model.check_strategy(pi)?;
    let opt = optimal_value(model, m, tol)?;
    Ok(support_within(pi, &opt))
}

pub(crate) fn support_within(pi: &StationaryStrategy, opt: &OptimalStrategySet) -> bool {
    (0..pi.states()).all(|i| {
        pi.support(i)
            .iter()
            .all(|a| opt.per_state_actions[i].contains(a))
    })
}

/// Signed strictness of `d` at `m`:
/// `γ(m) = min_{d̂ ≠ d} max_i (V^d_i(m) - V^{d̂}_i(m))`.
///
/// Positive iff `D(m) = {d}`; `+∞` when `d` is the only strategy.
pub fn value_gap(model: &GameModel, m: &Distribution, d: &DeterministicStrategy, cap: usize) -> Result<f64> {
    model.check_deterministic(d)?;
    check_point(model, m)?;
    let strategies = model.deterministic_strategies(cap)?;
    gap_at(&model.at(m.as_slice()), d, &strategies)
}

pub(crate) fn gap_at(
    g: &GameAt,
    d: &DeterministicStrategy,
    strategies: &[DeterministicStrategy],
) -> Result<f64> {
    let vd = solve_deterministic(g, d)?;
    let mut gamma = f64::INFINITY;
    for other in strategies.iter().filter(|o| *o != d) {
        let vo = solve_deterministic(g, other)?;
        let best_lead = (&vd - &vo).iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        gamma = gamma.min(best_lead);
    }
    Ok(gamma)
}
