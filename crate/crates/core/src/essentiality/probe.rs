//! Random perturbations of a game and empirical displacement profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{find_all_equilibria, set_distance, Equilibrium, EquilibriumOptions};
use crate::error::{MfgError, Result};
use crate::model::GameModel;
use crate::poly::PolynomialField;
use crate::simplex::{default_metric_resolution, simplex_grid};

/// Shifts constant coefficients: each reward by `U(-δ/2, δ/2)` and each
/// off-diagonal rate by a random sign times `U(0, δ/(2(S-1)))`, with
/// downward rate shifts clipped at the rate's grid minimum. The diagonal then
/// moves by at most `δ/2`, so the game distance stays within `δ`.
pub fn sample_perturbed_game(model: &GameModel, delta: f64, seed: u64) -> Result<GameModel> {
    if delta.is_nan() || delta < 0.0 {
        return Err(MfgError::InvalidArgument(format!("delta must be nonnegative, got {delta}")));
    }
    if delta == 0.0 {
        return Ok(model.clone());
    }
    let (s, a_n) = (model.states(), model.actions());
    let grid = simplex_grid(s, default_metric_resolution(s));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = model.clone();
    let half = delta / 2.0;
    for i in 0..s {
        for a in 0..a_n {
            let shift = rng.random_range(-half..half);
            let p = out.reward_field_mut(i, a);
            *p = p.shifted(shift);
        }
    }
    let rate_half = half / (s - 1) as f64;
    for i in 0..s {
        for j in (0..s).filter(|&j| j != i) {
            for a in 0..a_n {
                let magnitude = rng.random_range(0.0..rate_half);
                let up = rng.random::<bool>();
                let shift = if up {
                    magnitude
                } else {
                    -magnitude.min(model.rate_grid_min(i, j, a, &grid).max(0.0))
                };
                if shift != 0.0 {
                    let p = out.rate_field_mut(i, j, a);
                    *p = p.shifted(shift);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub delta: f64,
    pub samples: usize,
    /// Largest `(m, π)` distance to the perturbed equilibrium set.
    pub max_displacement: f64,
    pub mean_displacement: f64,
    /// Samples whose perturbed game yielded no equilibrium.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeProfile {
    pub deltas: Vec<f64>,
    pub levels: Vec<ProbeLevel>,
    pub seed: u64,
    /// Reminder that displacement profiles are evidence, not proof.
    pub note: String,
}

const PROBE_NOTE: &str = "sampled evidence only: displacements tending to 0 corroborate essentiality, \
displacements bounded away from 0 as delta shrinks count against it";

impl ProbeProfile {
    /// Displacement at the smallest probed radius.
    pub fn final_max(&self) -> Option<f64> {
        self.levels.last().map(|l| l.max_displacement)
    }
}

/// For each `delta` and sample, perturbs the game, recomputes all
/// equilibria and records the distance from `eq` to the perturbed set.
///
/// Sample `k` of level `l` uses seed `seed + l * samples + k`.
pub fn probe(
    model: &GameModel,
    eq: &Equilibrium,
    deltas: &[f64],
    samples: usize,
    seed: u64,
    opts: &EquilibriumOptions,
) -> Result<ProbeProfile> {
    if deltas.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(MfgError::InvalidArgument("probe radii must be positive and finite".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MfgError::InvalidArgument("probe radii must be strictly decreasing".into()));
    }
    let mut profile = ProbeProfile {
        deltas: deltas.to_vec(),
        levels: Vec::new(),
        seed,
        note: PROBE_NOTE.into(),
    };
    if samples == 0 {
        return Ok(profile);
    }
    let tasks: Vec<(usize, usize)> = (0..deltas.len())
        .flat_map(|l| (0..samples).map(move |k| (l, k)))
        .collect();
    let results: Vec<Result<Option<f64>>> = tasks
        .par_iter()
        .map(|&(l, k)| {
            let task_seed = seed.wrapping_add((l * samples + k) as u64);
            let perturbed = sample_perturbed_game(model, deltas[l], task_seed)?;
            match find_all_equilibria(&perturbed, opts) {
                Ok(set) if !set.is_empty() => Ok(Some(set_distance(&eq.m, &eq.pi, &set)?)),
                Ok(_) | Err(MfgError::CapExceeded { .. }) | Err(MfgError::Singular(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut results = results.into_iter();
    for &delta in deltas {
        let mut level = ProbeLevel {
            delta,
            samples,
            max_displacement: 0.0,
            mean_displacement: 0.0,
            failures: 0,
        };
        let mut sum = 0.0;
        for _ in 0..samples {
            match results.next().expect("one result per task")? {
                Some(dist) => {
                    level.max_displacement = level.max_displacement.max(dist);
                    sum += dist;
                }
                None => level.failures += 1,
            }
        }
        let ok = samples - level.failures;
        level.mean_displacement = if ok > 0 { sum / ok as f64 } else { 0.0 };
        profile.levels.push(level);
    }
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub deltas: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Displacement threshold at the smallest radius for corroboration.
    pub epsilon: f64,
    #[serde(skip, default)]
    pub eq: EquilibriumOptions,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            deltas: vec![0.1, 0.01, 0.001],
            samples: 20,
            seed: 0,
            epsilon: 0.05,
            eq: EquilibriumOptions::default(),
        }
    }
}

/// Random family of games with affine rates and rewards
/// `c0 + Σ_k c_k m_k`. Ranges are closed intervals `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub states: [usize; 2],
    pub actions: [usize; 2],
    pub beta: [f64; 2],
    /// Constant term of every off-diagonal rate.
    pub rate_constant: [f64; 2],
    pub rate_slope: [f64; 2],
    pub reward_constant: [f64; 2],
    pub reward_slope: [f64; 2],
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            states: [2, 2],
            actions: [2, 2],
            beta: [0.3, 1.0],
            rate_constant: [0.2, 2.0],
            rate_slope: [-1.0, 1.0],
            reward_constant: [-1.0, 1.0],
            reward_slope: [-1.0, 1.0],
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

fn draw_int(rng: &mut ChaCha8Rng, range: [usize; 2]) -> usize {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

impl FamilySpec {
    pub fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(MfgError::InvalidArgument(format!("family spec: {what}")));
        if self.states[0] < 2 || self.states[1] < self.states[0] {
            return bad("states must satisfy 2 <= lo <= hi");
        }
        if self.actions[0] < 1 || self.actions[1] < self.actions[0] {
            return bad("actions must satisfy 1 <= lo <= hi");
        }
        if !(self.beta[0] > 0.0) || self.beta[1] < self.beta[0] {
            return bad("beta must satisfy 0 < lo <= hi");
        }
        if self.rate_constant[0] < 0.0 {
            return bad("rate constants must be nonnegative");
        }
        for r in [self.rate_constant, self.rate_slope, self.reward_constant, self.reward_slope, self.beta] {
            if !(r[0].is_finite() && r[1].is_finite()) || r[1] < r[0] {
                return bad("every range must be finite with lo <= hi");
            }
        }
        Ok(())
    }

    /// Draws one game. Rate constants are raised where needed so every rate
    /// is nonnegative on the simplex.
    pub fn sample(&self, seed: u64) -> Result<GameModel> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = draw_int(&mut rng, self.states);
        let a_n = draw_int(&mut rng, self.actions);
        let mut model = GameModel::new(s, a_n, draw(&mut rng, self.beta))?;
        for i in 0..s {
            for j in (0..s).filter(|&j| j != i) {
                for a in 0..a_n {
                    let c0 = draw(&mut rng, self.rate_constant);
                    let slopes: Vec<f64> = (0..s).map(|_| draw(&mut rng, self.rate_slope)).collect();
                    // an affine map is smallest at a vertex
                    let floor = -slopes.iter().copied().fold(f64::INFINITY, f64::min);
                    model.set_rate(i, j, a, PolynomialField::affine(c0.max(floor), &slopes))?;
                }
            }
        }
        for i in 0..s {
            for a in 0..a_n {
                let c0 = draw(&mut rng, self.reward_constant);
                let slopes: Vec<f64> = (0..s).map(|_| draw(&mut rng, self.reward_slope)).collect();
                model.set_reward(i, a, PolynomialField::affine(c0, &slopes))?;
            }
        }
        Ok(model)
    }
}

/// A user-supplied game expected to contain a non-essential equilibrium.
#[derive(Debug, Clone)]
pub struct InjectedFixture {
    pub name: String,
    pub model: GameModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleGame {
    pub index: usize,
    pub seed: u64,
    pub states: usize,
    pub actions: usize,
    pub equilibria: usize,
    pub continuum: bool,
    /// Largest displacement at the smallest radius over all equilibria.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_max_displacement: Option<f64>,
    pub corroborated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionResult {
    pub name: String,
    pub equilibria: usize,
    pub final_max_displacement: Option<f64>,
    /// Some equilibrium moved by more than `epsilon` at the smallest radius.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub count: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub deltas: Vec<f64>,
    pub samples: usize,
    pub corroborated: usize,
    /// `corroborated / count`; absent for an empty ensemble.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fraction: Option<f64>,
    pub games: Vec<EnsembleGame>,
    pub injections: Vec<InjectionResult>,
    pub note: String,
}

/// `(equilibria, continuum, final max displacement)` of one game.
fn probe_game(model: &GameModel, p: &ProbeOptions, seed: u64) -> Result<(usize, bool, Option<f64>)> {
    let set = match find_all_equilibria(model, &p.eq) {
        Ok(s) => s,
        Err(MfgError::CapExceeded { .. }) | Err(MfgError::Singular(_)) => return Ok((0, false, None)),
        Err(e) => return Err(e),
    };
    let mut worst: Option<f64> = None;
    for (k, eq) in set.items.iter().enumerate() {
        let seed = seed.wrapping_add((k * p.deltas.len() * p.samples) as u64);
        let profile = probe(model, eq, &p.deltas, p.samples, seed, &p.eq)?;
        if let Some(level) = profile.levels.last() {
            let value = if level.failures == level.samples {
                f64::INFINITY
            } else {
                level.max_displacement
            };
            worst = Some(worst.map_or(value, |w: f64| w.max(value)));
        }
    }
    Ok((set.len(), set.is_continuum(), worst))
}

/// Draws `count` games from `family`, probes every equilibrium, and reports
/// the fraction of games whose equilibria all stay within `epsilon` at the
/// smallest radius. Injected fixtures are probed the same way and flagged
/// when some equilibrium moves by more than `epsilon`.
pub fn ensemble_genericity_study(
    family: &FamilySpec,
    count: usize,
    seed: u64,
    probe_opts: &ProbeOptions,
    injections: &[InjectedFixture],
) -> Result<EnsembleReport> {
    family.check()?;
    let game_seed = |k: usize| seed.wrapping_add(k as u64);
    let results: Vec<Result<EnsembleGame>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let model = family.sample(game_seed(k))?;
            let (n, continuum, worst) = probe_game(&model, probe_opts, game_seed(k))?;
            Ok(EnsembleGame {
                index: k,
                seed: game_seed(k),
                states: model.states(),
                actions: model.actions(),
                equilibria: n,
                continuum,
                corroborated: n > 0 && !continuum && worst.is_some_and(|w| w <= probe_opts.epsilon),
                final_max_displacement: worst,
            })
        })
        .collect();
    let games = results.into_iter().collect::<Result<Vec<_>>>()?;
    let mut injected = Vec::with_capacity(injections.len());
    for fx in injections {
        let (n, _, worst) = probe_game(&fx.model, probe_opts, seed)?;
        injected.push(InjectionResult {
            name: fx.name.clone(),
            equilibria: n,
            final_max_displacement: worst,
            flagged: worst.is_some_and(|w| w > probe_opts.epsilon),
        });
    }
    let corroborated = games.iter().filter(|g| g.corroborated).count();
    Ok(EnsembleReport {
        count,
        seed,
        epsilon: probe_opts.epsilon,
        deltas: probe_opts.deltas.clone(),
        samples: probe_opts.samples,
        corroborated,
        fraction: (count > 0).then(|| corroborated as f64 / count as f64),
        games,
        injections: injected,
        note: PROBE_NOTE.into(),
    })
}
