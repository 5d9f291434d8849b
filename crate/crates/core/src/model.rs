//! Game instances: rate and reward families, strategies, validation and the
//! sup-norm game metric.
//!
//! Only off-diagonal rates are stored. The diagonal of every action's rate
//! matrix is the negated off-diagonal row sum, so each `Q_{··a}(m)` is
//! conservative by construction and validation reduces to checking
//! off-diagonal nonnegativity.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{MfgError, Result};
use crate::poly::PolynomialField;
use crate::simplex::{max_norm_diff, simplex_grid, Distribution, SIMPLEX_TOL};

/// Slack allowed on off-diagonal rate nonnegativity.
pub const GENERATOR_TOL: f64 = 1e-12;
/// Weights at or below this are treated as outside a strategy's support.
pub const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GameModel {
    states: usize,
    actions: usize,
    beta: f64,
    /// Indexed `(i * S + j) * A + a`; diagonal slots stay zero.
    rates: Vec<PolynomialField>,
    /// Indexed `i * A + a`.
    rewards: Vec<PolynomialField>,
}

impl GameModel {
    /// A model with all rates and rewards equal to zero.
    ///
    /// `beta` must be finite and positive; whether it lies in `(0, 1)` is a
    /// [`GameModel::validate`] concern.
    pub fn new(states: usize, actions: usize, beta: f64) -> Result<Self> {
        if states < 2 {
            return Err(MfgError::InvalidArgument(format!(
                "state count must exceed 1, got {states}"
            )));
        }
        if actions < 1 {
            return Err(MfgError::InvalidArgument("action count must be at least 1".into()));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(MfgError::InvalidArgument(format!(
                "discount factor must be positive, got {beta}"
            )));
        }
        Ok(Self {
            states,
            actions,
            beta,
            rates: vec![PolynomialField::zero(states); states * states * actions],
            rewards: vec![PolynomialField::zero(states); states * actions],
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn check_state(&self, i: usize) -> Result<()> {
        if i >= self.states {
            return Err(MfgError::IndexOutOfRange {
                what: "state",
                index: i,
                len: self.states,
            });
        }
        Ok(())
    }

    fn check_action(&self, a: usize) -> Result<()> {
        if a >= self.actions {
            return Err(MfgError::IndexOutOfRange {
                what: "action",
                index: a,
                len: self.actions,
            });
        }
        Ok(())
    }

    fn check_field(&self, p: &PolynomialField) -> Result<()> {
        if p.vars() != self.states {
            return Err(MfgError::DimensionMismatch(format!(
                "field over {} states in a {}-state model",
                p.vars(),
                self.states
            )));
        }
        Ok(())
    }

    /// Sets the off-diagonal rate field `Q_{ija}` (0-based indices).
    pub fn set_rate(&mut self, i: usize, j: usize, a: usize, p: PolynomialField) -> Result<()> {
        self.check_state(i)?;
        self.check_state(j)?;
        self.check_action(a)?;
        self.check_field(&p)?;
        if i == j {
            return Err(MfgError::InvalidArgument(
                "diagonal rates are implied by the row sums and cannot be set".into(),
            ));
        }
        let idx = self.rate_index(i, j, a);
        self.rates[idx] = p;
        Ok(())
    }

    pub fn set_reward(&mut self, i: usize, a: usize, p: PolynomialField) -> Result<()> {
        self.check_state(i)?;
        self.check_action(a)?;
        self.check_field(&p)?;
        self.rewards[i * self.actions + a] = p;
        Ok(())
    }

    pub fn with_rate(mut self, i: usize, j: usize, a: usize, p: PolynomialField) -> Result<Self> {
        self.set_rate(i, j, a, p)?;
        Ok(self)
    }

    pub fn with_reward(mut self, i: usize, a: usize, p: PolynomialField) -> Result<Self> {
        self.set_reward(i, a, p)?;
        Ok(self)
    }

    pub fn set_beta(&mut self, beta: f64) -> Result<()> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(MfgError::InvalidArgument(format!(
                "discount factor must be positive, got {beta}"
            )));
        }
        self.beta = beta;
        Ok(())
    }

    fn rate_index(&self, i: usize, j: usize, a: usize) -> usize {
        (i * self.states + j) * self.actions + a
    }

    /// Stored off-diagonal field; the zero field for `i == j`.
    pub fn rate_field(&self, i: usize, j: usize, a: usize) -> &PolynomialField {
        &self.rates[self.rate_index(i, j, a)]
    }

    pub fn reward_field(&self, i: usize, a: usize) -> &PolynomialField {
        &self.rewards[i * self.actions + a]
    }

    pub(crate) fn rate_field_mut(&mut self, i: usize, j: usize, a: usize) -> &mut PolynomialField {
        let idx = self.rate_index(i, j, a);
        &mut self.rates[idx]
    }

    pub(crate) fn reward_field_mut(&mut self, i: usize, a: usize) -> &mut PolynomialField {
        &mut self.rewards[i * self.actions + a]
    }

    fn check_point(&self, m: &Distribution) -> Result<()> {
        if m.len() != self.states {
            return Err(MfgError::DimensionMismatch(format!(
                "distribution of length {} for a {}-state model",
                m.len(),
                self.states
            )));
        }
        Ok(())
    }

    /// `Q_{ija}(m)`, including the implied diagonal.
    pub fn eval_rate(&self, i: usize, j: usize, a: usize, m: &Distribution) -> Result<f64> {
        self.check_state(i)?;
        self.check_state(j)?;
        self.check_action(a)?;
        self.check_point(m)?;
        let x = m.as_slice();
        if i == j {
            Ok(-(0..self.states)
                .filter(|&k| k != i)
                .map(|k| self.rate_field(i, k, a).eval(x))
                .sum::<f64>())
        } else {
            Ok(self.rate_field(i, j, a).eval(x))
        }
    }

    /// `r_{ia}(m)`.
    pub fn eval_reward(&self, i: usize, a: usize, m: &Distribution) -> Result<f64> {
        self.check_state(i)?;
        self.check_action(a)?;
        self.check_point(m)?;
        Ok(self.reward_field(i, a).eval(m.as_slice()))
    }

    /// Evaluates every rate and reward at `m`. The point need not lie on the
    /// simplex (finite-difference stencils step slightly outside it).
    pub fn at(&self, m: &[f64]) -> GameAt {
        debug_assert_eq!(m.len(), self.states);
        let (s, a_n) = (self.states, self.actions);
        let mut rates = vec![0.0; s * s * a_n];
        for i in 0..s {
            for a in 0..a_n {
                let mut row = 0.0;
                for j in (0..s).filter(|&j| j != i) {
                    let v = self.rate_field(i, j, a).eval(m);
                    rates[(i * s + j) * a_n + a] = v;
                    row += v;
                }
                rates[(i * s + i) * a_n + a] = -row;
            }
        }
        let rewards = self.rewards.iter().map(|p| p.eval(m)).collect();
        GameAt {
            states: s,
            actions: a_n,
            beta: self.beta,
            rates,
            rewards,
        }
    }

    /// `Q^π(m)` with `(Q^π)_{ij} = Σ_a Q_{ija}(m) π_{ia}`.
    pub fn effective_generator(&self, pi: &StationaryStrategy, m: &Distribution) -> Result<DMatrix<f64>> {
        self.check_point(m)?;
        self.check_strategy(pi)?;
        Ok(self.at(m.as_slice()).generator(pi))
    }

    pub fn check_strategy(&self, pi: &StationaryStrategy) -> Result<()> {
        if pi.states() != self.states || pi.actions() != self.actions {
            return Err(MfgError::DimensionMismatch(format!(
                "strategy is {}x{}, model is {}x{}",
                pi.states(),
                pi.actions(),
                self.states,
                self.actions
            )));
        }
        Ok(())
    }

    pub fn check_deterministic(&self, d: &DeterministicStrategy) -> Result<()> {
        if d.len() != self.states {
            return Err(MfgError::DimensionMismatch(format!(
                "deterministic strategy of length {} for {} states",
                d.len(),
                self.states
            )));
        }
        if let Some(&a) = d.actions().iter().find(|&&a| a >= self.actions) {
            return Err(MfgError::IndexOutOfRange {
                what: "action",
                index: a,
                len: self.actions,
            });
        }
        Ok(())
    }

    /// Checks the discount factor and off-diagonal nonnegativity of every
    /// action's rate matrix on the uniform simplex grid.
    pub fn validate(&self, grid_resolution: usize) -> ValidationReport {
        let resolution = grid_resolution.max(1);
        let mut failures = Vec::new();
        let beta_ok = self.beta > 0.0 && self.beta < 1.0;
        if !beta_ok {
            failures.push(format!("discount out of range: beta = {} not in (0, 1)", self.beta));
        }
        let grid = simplex_grid(self.states, resolution);
        let mut worst: Option<RateViolation> = None;
        let mut violations = 0usize;
        let mut non_finite = false;
        for m in &grid {
            let g = self.at(m.as_slice());
            for i in 0..self.states {
                for j in (0..self.states).filter(|&j| j != i) {
                    for a in 0..self.actions {
                        let v = g.rate(i, j, a);
                        if !v.is_finite() {
                            non_finite = true;
                        }
                        if v < -GENERATOR_TOL {
                            violations += 1;
                            if worst.as_ref().is_none_or(|w| v < w.value) {
                                worst = Some(RateViolation {
                                    from: i + 1,
                                    to: j + 1,
                                    action: a + 1,
                                    m: m.as_slice().to_vec(),
                                    value: v,
                                });
                            }
                        }
                    }
                }
            }
        }
        if non_finite {
            failures.push("non-finite rate values on the grid".into());
        }
        if let Some(w) = &worst {
            failures.push(format!(
                "negative off-diagonal rate: {violations} violation(s), worst Q[{},{},{}] = {} at m = {:?}",
                w.from, w.to, w.action, w.value, w.m
            ));
        }
        ValidationReport {
            passed: failures.is_empty(),
            beta_ok,
            grid_resolution: resolution,
            points_checked: grid.len(),
            failures,
            worst_violation: worst,
        }
    }

    /// Smallest value of `Q_{ija}` over the grid (used to bound downward
    /// perturbations of rate constants).
    pub(crate) fn rate_grid_min(&self, i: usize, j: usize, a: usize, grid: &[Distribution]) -> f64 {
        let p = self.rate_field(i, j, a);
        grid.iter()
            .map(|m| p.eval(m.as_slice()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest reward value over the grid.
    pub(crate) fn reward_grid_min(&self, grid: &[Distribution]) -> f64 {
        grid.iter()
            .flat_map(|m| self.rewards.iter().map(move |p| p.eval(m.as_slice())))
            .fold(f64::INFINITY, f64::min)
    }

    /// Adds `c` to every reward field.
    pub fn with_reward_shift(&self, c: f64) -> Self {
        let mut out = self.clone();
        for p in out.rewards.iter_mut() {
            *p = p.shifted(c);
        }
        out
    }

    /// Multiplies every reward field by `lambda`.
    pub fn with_reward_scale(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for p in out.rewards.iter_mut() {
            *p = p.scaled(lambda);
        }
        out
    }

    /// Relabels states: state `i` becomes state `perm[i]`.
    pub fn relabel_states(&self, perm: &[usize]) -> Result<Self> {
        let s = self.states;
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != (0..s).collect::<Vec<_>>() {
            return Err(MfgError::InvalidArgument("not a permutation of the states".into()));
        }
        let mut out = Self::new(s, self.actions, self.beta)?;
        for i in 0..s {
            for a in 0..self.actions {
                out.set_reward(perm[i], a, self.reward_field(i, a).permute_vars(perm))?;
                for j in (0..s).filter(|&j| j != i) {
                    out.set_rate(perm[i], perm[j], a, self.rate_field(i, j, a).permute_vars(perm))?;
                }
            }
        }
        Ok(out)
    }

    /// Number of deterministic stationary strategies, `A^S`.
    pub fn strategy_count(&self) -> u128 {
        (self.actions as u128).saturating_pow(self.states as u32)
    }

    /// All deterministic strategies in lexicographic order, provided there are
    /// at most `cap` of them.
    pub fn deterministic_strategies(&self, cap: usize) -> Result<Vec<DeterministicStrategy>> {
        let count = self.strategy_count();
        if count > cap as u128 {
            return Err(MfgError::CapExceeded { count, cap });
        }
        Ok((0..count as usize)
            .map(|k| DeterministicStrategy::from_index(k, self.states, self.actions))
            .collect())
    }
}

/// A game frozen at one population distribution.
#[derive(Debug, Clone)]
pub struct GameAt {
    states: usize,
    actions: usize,
    beta: f64,
    rates: Vec<f64>,
    rewards: Vec<f64>,
}

impl GameAt {
    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub fn rate(&self, i: usize, j: usize, a: usize) -> f64 {
        self.rates[(i * self.states + j) * self.actions + a]
    }

    #[inline]
    pub fn reward(&self, i: usize, a: usize) -> f64 {
        self.rewards[i * self.actions + a]
    }

    pub fn action_generator(&self, a: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.states, self.states, |i, j| self.rate(i, j, a))
    }

    /// `Q^d(m)`: row `i` taken from action `d_i`.
    pub fn deterministic_generator(&self, d: &DeterministicStrategy) -> DMatrix<f64> {
        DMatrix::from_fn(self.states, self.states, |i, j| self.rate(i, j, d[i]))
    }

    pub fn generator(&self, pi: &StationaryStrategy) -> DMatrix<f64> {
        DMatrix::from_fn(self.states, self.states, |i, j| {
            (0..self.actions).map(|a| self.rate(i, j, a) * pi.weight(i, a)).sum()
        })
    }

    pub fn deterministic_rewards(&self, d: &DeterministicStrategy) -> DVector<f64> {
        DVector::from_fn(self.states, |i, _| self.reward(i, d[i]))
    }

    pub fn rewards_under(&self, pi: &StationaryStrategy) -> DVector<f64> {
        DVector::from_fn(self.states, |i, _| {
            (0..self.actions).map(|a| self.reward(i, a) * pi.weight(i, a)).sum()
        })
    }

    /// Bellman action value `r_{ia} + Σ_j Q_{ija} V_j`.
    pub fn action_value(&self, i: usize, a: usize, v: &DVector<f64>) -> f64 {
        self.reward(i, a) + (0..self.states).map(|j| self.rate(i, j, a) * v[j]).sum::<f64>()
    }
}

/// One worst-case location of a negative off-diagonal rate (1-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateViolation {
    pub from: usize,
    pub to: usize,
    pub action: usize,
    pub m: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub beta_ok: bool,
    pub grid_resolution: usize,
    pub points_checked: usize,
    pub failures: Vec<String>,
    pub worst_violation: Option<RateViolation>,
}

/// Grid approximation of
/// `sup |Q - Q'| + sup |r - r'|` over all indices and grid points.
pub fn game_distance(a: &GameModel, b: &GameModel, grid_resolution: usize) -> Result<f64> {
    if a.states != b.states || a.actions != b.actions {
        return Err(MfgError::DimensionMismatch(format!(
            "models are {}x{} and {}x{}",
            a.states, a.actions, b.states, b.actions
        )));
    }
    let grid = simplex_grid(a.states, grid_resolution.max(1));
    let mut rate_sup: f64 = 0.0;
    let mut reward_sup: f64 = 0.0;
    for m in &grid {
        let ga = a.at(m.as_slice());
        let gb = b.at(m.as_slice());
        rate_sup = rate_sup.max(max_norm_diff(&ga.rates, &gb.rates));
        reward_sup = reward_sup.max(max_norm_diff(&ga.rewards, &gb.rewards));
    }
    Ok(rate_sup + reward_sup)
}

/// Action choice per state (0-based internally; serialized 1-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeterministicStrategy(Vec<usize>);

impl DeterministicStrategy {
    pub fn new(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    /// Parses 1-based action labels.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        labels
            .iter()
            .map(|&a| {
                a.checked_sub(1)
                    .ok_or_else(|| MfgError::InvalidStrategy("action labels are 1-based".into()))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    /// Strategy number `k` in lexicographic order (state 1 most significant).
    pub fn from_index(mut k: usize, states: usize, actions: usize) -> Self {
        let mut d = vec![0; states];
        for slot in d.iter_mut().rev() {
            *slot = k % actions;
            k /= actions;
        }
        Self(d)
    }

    pub fn uniform(states: usize, a: usize) -> Self {
        Self(vec![a; states])
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|a| a + 1).collect()
    }

    pub fn to_stationary(&self, actions: usize) -> StationaryStrategy {
        StationaryStrategy::from_deterministic(self, actions)
    }
}

impl std::ops::Index<usize> for DeterministicStrategy {
    type Output = usize;
    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

impl std::fmt::Display for DeterministicStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let labels: Vec<String> = self.0.iter().map(|a| (a + 1).to_string()).collect();
        write!(f, "({})", labels.join(","))
    }
}

impl Serialize for DeterministicStrategy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for DeterministicStrategy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(d)?;
        Self::from_one_based(&labels).map_err(serde::de::Error::custom)
    }
}

/// Row-stochastic `S × A` weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StationaryStrategy {
    weights: Vec<Vec<f64>>,
}

impl StationaryStrategy {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let a = weights.first().map_or(0, Vec::len);
        if weights.is_empty() || a == 0 {
            return Err(MfgError::InvalidStrategy("empty weight matrix".into()));
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != a {
                return Err(MfgError::InvalidStrategy(format!("row {} has wrong length", i + 1)));
            }
            if row.iter().any(|&w| !w.is_finite() || w < -SIMPLEX_TOL) {
                return Err(MfgError::InvalidStrategy(format!("row {} has a negative weight", i + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(MfgError::InvalidStrategy(format!("row {} sums to {sum}", i + 1)));
            }
        }
        Ok(Self { weights })
    }

    /// Raw rows, no validation; for finite differences that may leave the
    /// simplex.
    pub(crate) fn from_rows_unchecked(weights: Vec<Vec<f64>>) -> Self {
        Self { weights }
    }

    pub fn from_deterministic(d: &DeterministicStrategy, actions: usize) -> Self {
        let weights = d
            .actions()
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Self { weights }
    }

    pub fn uniform(states: usize, actions: usize) -> Self {
        Self {
            weights: vec![vec![1.0 / actions as f64; actions]; states],
        }
    }

    pub fn states(&self) -> usize {
        self.weights.len()
    }

    pub fn actions(&self) -> usize {
        self.weights[0].len()
    }

    #[inline]
    pub fn weight(&self, i: usize, a: usize) -> f64 {
        self.weights[i][a]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Actions with weight above [`SUPPORT_EPS`] in state `i`.
    pub fn support(&self, i: usize) -> Vec<usize> {
        self.weights[i]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > SUPPORT_EPS)
            .map(|(a, _)| a)
            .collect()
    }

    /// The deterministic strategy this one coincides with, if any.
    pub fn as_deterministic(&self) -> Option<DeterministicStrategy> {
        let mut d = Vec::with_capacity(self.weights.len());
        for i in 0..self.weights.len() {
            match self.support(i).as_slice() {
                [a] => d.push(*a),
                _ => return None,
            }
        }
        Some(DeterministicStrategy(d))
    }

    pub fn flat(&self) -> Vec<f64> {
        self.weights.iter().flatten().copied().collect()
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| max_norm_diff(a, b))
            .fold(0.0, f64::max)
    }

    pub fn permuted_states(&self, perm: &[usize]) -> Self {
        let mut weights = vec![Vec::new(); self.weights.len()];
        for (i, &p) in perm.iter().enumerate() {
            weights[p] = self.weights[i].clone();
        }
        Self { weights }
    }
}
