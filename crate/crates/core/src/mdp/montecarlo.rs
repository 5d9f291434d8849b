//! Path simulation of the discounted reward integral, used to cross-check the
//! linear-solve values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::model::{GameModel, StationaryStrategy};
use crate::simplex::Distribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    /// Truncation horizon; `None` picks [`default_horizon`].
    pub horizon: Option<f64>,
    /// Paths per starting state.
    pub paths: usize,
    pub seed: u64,
    pub batch_size: usize,
    /// Target precision for the default horizon.
    pub target: f64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            horizon: None,
            paths: 100_000,
            seed: 0,
            batch_size: 1000,
            target: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Per-starting-state sample means.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    /// `Σ_i x0_i · mean_i` and its standard error.
    pub x0_mean: f64,
    pub x0_std_error: f64,
    pub horizon: f64,
    /// `e^{-β H} · max|r| / β`: worst-case bias from truncating at `H`.
    pub truncation_bound: f64,
    pub paths: usize,
    pub seed: u64,
}

/// `⌈ln(r_range / (β · target)) / β⌉`, at least 1.
pub fn default_horizon(r_range: f64, beta: f64, target: f64) -> f64 {
    if r_range <= 0.0 {
        return 1.0;
    }
    ((r_range / (beta * target)).ln() / beta).ceil().max(1.0)
}

/// Simulates `paths` jump paths of `X^π(m)` from every starting state and
/// averages `∫_0^H r^π(X_t) e^{-βt} dt`.
pub fn monte_carlo_value(
    model: &GameModel,
    pi: &StationaryStrategy,
    m: &Distribution,
    x0: &Distribution,
    opts: &McOptions,
) -> Result<McEstimate> {
    model.check_strategy(pi)?;
    let s = model.states();
    if m.len() != s || x0.len() != s {
        return Err(MfgError::DimensionMismatch("distribution length differs from state count".into()));
    }
    if opts.paths == 0 {
        return Err(MfgError::InvalidArgument("at least one path is required".into()));
    }
    let g = model.at(m.as_slice());
    let q = g.generator(pi);
    let r = g.rewards_under(pi);
    let beta = model.beta();
    let r_max = r.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let horizon = opts
        .horizon
        .unwrap_or_else(|| default_horizon(r_max, beta, opts.target));
    if !(horizon > 0.0) {
        return Err(MfgError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }

    let chain = Chain {
        exit: (0..s).map(|i| -q[(i, i)]).collect(),
        jumps: (0..s)
            .map(|i| (0..s).map(|j| if i == j { 0.0 } else { q[(i, j)].max(0.0) }).collect())
            .collect(),
        reward: r.iter().copied().collect(),
        beta,
        horizon,
    };

    let batch = opts.batch_size.max(1);
    let batches_per_state = opts.paths.div_ceil(batch);
    let tasks: Vec<(usize, usize)> = (0..s)
        .flat_map(|i| (0..batches_per_state).map(move |b| (i, b)))
        .collect();
    let sums: Vec<(f64, f64)> = tasks
        .par_iter()
        .enumerate()
        .map(|(k, &(start, b))| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
            let n = batch.min(opts.paths - b * batch);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..n {
                let x = chain.sample(start, &mut rng);
                sum += x;
                sumsq += x * x;
            }
            (sum, sumsq)
        })
        .collect();

    let n = opts.paths as f64;
    let mut mean = vec![0.0; s];
    let mut std_error = vec![0.0; s];
    for i in 0..s {
        let (sum, sumsq) = sums[i * batches_per_state..(i + 1) * batches_per_state]
            .iter()
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        let mu = sum / n;
        let var = if opts.paths > 1 {
            ((sumsq - n * mu * mu) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        mean[i] = mu;
        std_error[i] = (var / n).sqrt();
    }
    let x0_mean = (0..s).map(|i| x0[i] * mean[i]).sum();
    let x0_std_error = (0..s)
        .map(|i| (x0[i] * std_error[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(McEstimate {
        mean,
        std_error,
        x0_mean,
        x0_std_error,
        horizon,
        truncation_bound: (-beta * horizon).exp() * r_max / beta,
        paths: opts.paths,
        seed: opts.seed,
    })
}

struct Chain {
    exit: Vec<f64>,
    jumps: Vec<Vec<f64>>,
    reward: Vec<f64>,
    beta: f64,
    horizon: f64,
}

impl Chain {
    fn sample(&self, start: usize, rng: &mut ChaCha8Rng) -> f64 {
        let beta = self.beta;
        let end_discount = (-beta * self.horizon).exp();
        let mut state = start;
        let mut t = 0.0;
        let mut discount = 1.0;
        let mut acc = 0.0;
        loop {
            let rate = self.exit[state];
            let rho = self.reward[state];
            if rate <= 0.0 {
                // absorbing: integrate the constant reward up to the horizon
                acc += rho * (discount - end_discount) / beta;
                return acc;
            }
            let u: f64 = rng.random();
            let hold = -(1.0 - u).ln() / rate;
            if t + hold >= self.horizon {
                acc += rho * (discount - end_discount) / beta;
                return acc;
            }
            let next_discount = discount * (-beta * hold).exp();
            acc += rho * (discount - next_discount) / beta;
            t += hold;
            discount = next_discount;

            let total: f64 = self.jumps[state].iter().sum();
            let mut pick = rng.random::<f64>() * total;
            let mut next = state;
            for (j, &w) in self.jumps[state].iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                next = j;
                if pick < w {
                    break;
                }
                pick -= w;
            }
            state = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DeterministicStrategy;
    use crate::poly::PolynomialField;

    fn two_state(q12: f64, q21: f64, r: [f64; 2]) -> GameModel {
        GameModel::new(2, 1, 0.5)
            .unwrap()
            .with_rate(0, 1, 0, PolynomialField::constant(2, q12))
            .unwrap()
            .with_rate(1, 0, 0, PolynomialField::constant(2, q21))
            .unwrap()
            .with_reward(0, 0, PolynomialField::constant(2, r[0]))
            .unwrap()
            .with_reward(1, 0, PolynomialField::constant(2, r[1]))
            .unwrap()
    }

    fn only(model: &GameModel) -> StationaryStrategy {
        DeterministicStrategy::new(vec![0; model.states()]).to_stationary(model.actions())
    }

    #[test]
    fn absorbing_paths_are_exact() {
        let model = two_state(0.0, 0.0, [1.0, 2.0]);
        let u = Distribution::uniform(2);
        let est = monte_carlo_value(
            &model,
            &only(&model),
            &u,
            &u,
            &McOptions { horizon: Some(40.0), paths: 10, ..Default::default() },
        )
        .unwrap();
        assert!((est.mean[0] - 2.0).abs() < 1e-8);
        assert!((est.mean[1] - 4.0).abs() < 1e-8);
        assert_eq!(est.std_error, vec![0.0, 0.0]);
        assert!((est.x0_mean - 3.0).abs() < 1e-8);
    }

    #[test]
    fn zero_rewards_give_zero() {
        let model = two_state(1.0, 1.0, [0.0, 0.0]);
        let u = Distribution::uniform(2);
        let est = monte_carlo_value(&model, &only(&model), &u, &u, &McOptions { paths: 100, ..Default::default() })
            .unwrap();
        assert_eq!(est.mean, vec![0.0, 0.0]);
    }

    #[test]
    fn agrees_with_linear_solve() {
        let model = two_state(1.0, 1.0, [1.0, 0.0]);
        let u = Distribution::uniform(2);
        let est = monte_carlo_value(&model, &only(&model), &u, &u, &McOptions { paths: 100_000, seed: 11, ..Default::default() })
            .unwrap();
        for (mean, (se, exact)) in est.mean.iter().zip(est.std_error.iter().zip([1.2, 0.8])) {
            assert!((mean - exact).abs() <= 3.0 * se, "{mean} vs {exact} (se {se})");
        }
        assert!(est.truncation_bound < 1e-6);
    }

    #[test]
    fn batching_is_deterministic() {
        let model = two_state(1.0, 2.0, [1.0, 0.5]);
        let u = Distribution::uniform(2);
        let opts = McOptions { paths: 5000, seed: 3, batch_size: 256, ..Default::default() };
        let a = monte_carlo_value(&model, &only(&model), &u, &u, &opts).unwrap();
        let b = monte_carlo_value(&model, &only(&model), &u, &u, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_formula() {
        // ln(1 / (0.5 * 1e-6)) / 0.5 = 29.0…
        assert_eq!(default_horizon(1.0, 0.5, 1e-6), 30.0);
        assert_eq!(default_horizon(0.0, 0.5, 1e-6), 1.0);
    }
}
