//! Mixed equilibria by support enumeration.
//!
//! For a support `A_1 × … × A_S` the unknowns are `m_1..m_{S-1}` and the
//! first `|A_i| - 1` weights of each mixing state; the equations are
//! stationarity in the first `S - 1` coordinates plus equality of Bellman
//! action values across each `A_i`. Bellman values use `V` of the
//! lexicographically smallest selection from the support.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_mixed_grid, dedup, make_equilibrium, Equilibrium, EquilibriumOptions, EquilibriumWarning};
use crate::error::{MfgError, Result};
use crate::linalg::{pseudo_solve, smallest_singular_value};
use crate::mdp::solve_deterministic;
use crate::model::{DeterministicStrategy, GameModel, StationaryStrategy};
use crate::simplex::{simplex_grid, Distribution};
use crate::stationary::is_continuum_count;

/// Smallest weight a declared support action may carry.
pub const MIN_SUPPORT_WEIGHT: f64 = 1e-9;

/// Per-state sorted 0-based action sets.
pub type Support = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportChoice {
    /// Every support with `1 ≤ Σ_i (|A_i| - 1) ≤ support_cap`.
    All,
    Listed(Vec<Support>),
}

fn label(support: &Support) -> String {
    let parts: Vec<String> = support
        .iter()
        .map(|s| {
            let a: Vec<String> = s.iter().map(|a| (a + 1).to_string()).collect();
            format!("{{{}}}", a.join(","))
        })
        .collect();
    parts.join("×")
}

fn extra(support: &Support) -> usize {
    support.iter().map(|s| s.len() - 1).sum()
}

/// Supports in increasing total size `Σ_i (|A_i| - 1)` from 1 to `cap`,
/// lexicographic within a size.
pub fn enumerate_supports(states: usize, actions: usize, cap: usize) -> Vec<Support> {
    let mut subsets: Vec<Vec<usize>> = (1u64..(1u64 << actions.min(63)))
        .map(|mask| (0..actions).filter(|a| mask >> a & 1 == 1).collect())
        .collect();
    subsets.sort_by(|a: &Vec<usize>, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(states);
    fn rec(
        subsets: &[Vec<usize>],
        states: usize,
        budget: usize,
        current: &mut Vec<Vec<usize>>,
        out: &mut Vec<Support>,
    ) {
        if current.len() == states {
            out.push(current.clone());
            return;
        }
        for s in subsets.iter().take_while(|s| s.len() - 1 <= budget) {
            current.push(s.clone());
            rec(subsets, states, budget - (s.len() - 1), current, out);
            current.pop();
        }
    }
    rec(&subsets, states, cap, &mut current, &mut out);
    out.retain(|s| extra(s) >= 1);
    out.sort_by_key(extra);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedSearchReport {
    pub items: Vec<Equilibrium>,
    pub warnings: Vec<EquilibriumWarning>,
    pub supports_examined: usize,
    /// Supports skipped because more indifference equations than population
    /// unknowns make their Jacobian singular everywhere.
    pub supports_skipped: usize,
    pub starts: usize,
}

/// Support-enumeration search; see [`MixedSearchReport`].
pub fn find_mixed_equilibria(
    model: &GameModel,
    supports: &SupportChoice,
    opts: &EquilibriumOptions,
) -> Result<MixedSearchReport> {
    search(model, supports, opts)
}

pub(super) fn search(model: &GameModel, choice: &SupportChoice, opts: &EquilibriumOptions) -> Result<MixedSearchReport> {
    let (s, a_n) = (model.states(), model.actions());
    let listed = matches!(choice, SupportChoice::Listed(_));
    let supports = match choice {
        SupportChoice::All => enumerate_supports(s, a_n, opts.support_cap),
        SupportChoice::Listed(list) => {
            for sup in list {
                check_support(sup, s, a_n)?;
            }
            list.clone()
        }
    };
    let grid = simplex_grid(s, opts.mixed_grid.unwrap_or_else(|| default_mixed_grid(s)));
    let mut report = MixedSearchReport {
        items: Vec::new(),
        warnings: Vec::new(),
        supports_examined: 0,
        supports_skipped: 0,
        starts: 0,
    };
    let mut runnable = Vec::new();
    for (k, sup) in supports.iter().enumerate() {
        let e = extra(sup);
        if e == 0 {
            // a pure support is the deterministic case
            continue;
        }
        if e > s - 1 {
            report.supports_skipped += 1;
            if listed {
                report.warnings.push(EquilibriumWarning::IllPosedSupport {
                    support: label(sup),
                    message: format!(
                        "{e} indifference equations in {} population unknowns: the system is singular",
                        s - 1
                    ),
                });
            }
            continue;
        }
        runnable.push((k, sup));
    }
    let results: Vec<Result<SupportOutcome>> = runnable
        .par_iter()
        .map(|&(k, sup)| {
            let sys = SupportSystem::new(model, sup);
            sys.solve_all(&grid, opts, k as u64)
        })
        .collect();
    for ((_, sup), r) in runnable.iter().zip(results) {
        let out = r?;
        report.supports_examined += 1;
        report.starts += out.starts;
        if let Some(reason) = out.continuum {
            report.warnings.push(EquilibriumWarning::Continuum {
                source: format!("support {}", label(sup)),
                reason: reason.into(),
            });
        }
        report.items.extend(out.items);
    }
    report.items = dedup(std::mem::take(&mut report.items), opts.dedup_radius);
    Ok(report)
}

fn check_support(sup: &Support, states: usize, actions: usize) -> Result<()> {
    if sup.len() != states {
        return Err(MfgError::InvalidArgument(format!(
            "support has {} state entries, expected {states}",
            sup.len()
        )));
    }
    for (i, set) in sup.iter().enumerate() {
        if set.is_empty() || set.windows(2).any(|w| w[0] >= w[1]) || set.iter().any(|&a| a >= actions) {
            return Err(MfgError::InvalidArgument(format!(
                "support of state {} must be a nonempty increasing list of actions below {actions}",
                i + 1
            )));
        }
    }
    Ok(())
}

struct SupportOutcome {
    items: Vec<Equilibrium>,
    continuum: Option<&'static str>,
    starts: usize,
}

struct SupportSystem<'a> {
    model: &'a GameModel,
    support: &'a Support,
    /// Lexicographically smallest selection, used for `V`.
    base: DeterministicStrategy,
    dim: usize,
}

impl<'a> SupportSystem<'a> {
    fn new(model: &'a GameModel, support: &'a Support) -> Self {
        let base = DeterministicStrategy::new(support.iter().map(|s| s[0]).collect());
        Self {
            model,
            support,
            base,
            dim: model.states() - 1 + extra(support),
        }
    }

    fn decode(&self, z: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let s = self.model.states();
        let mut m = z[..s - 1].to_vec();
        m.push(1.0 - m.iter().sum::<f64>());
        let mut k = s - 1;
        let rows = self
            .support
            .iter()
            .map(|set| {
                let mut row = vec![0.0; self.model.actions()];
                let mut rest = 1.0;
                for &a in &set[..set.len() - 1] {
                    row[a] = z[k];
                    rest -= z[k];
                    k += 1;
                }
                row[*set.last().expect("nonempty")] = rest;
                row
            })
            .collect();
        (m, rows)
    }

    fn encode(&self, m: &[f64], rows: &[Vec<f64>]) -> Vec<f64> {
        let s = self.model.states();
        let mut z = m[..s - 1].to_vec();
        for (set, row) in self.support.iter().zip(rows) {
            z.extend(set[..set.len() - 1].iter().map(|&a| row[a]));
        }
        z
    }

    fn project(&self, z: &[f64]) -> Vec<f64> {
        let (m, rows) = self.decode(z);
        let m = Distribution::project(&m).into_vec();
        let rows: Vec<Vec<f64>> = self
            .support
            .iter()
            .zip(&rows)
            .map(|(set, row)| {
                let on: Vec<f64> = set.iter().map(|&a| row[a]).collect();
                let p = Distribution::project(&on);
                let mut full = vec![0.0; row.len()];
                for (k, &a) in set.iter().enumerate() {
                    full[a] = p[k];
                }
                full
            })
            .collect();
        self.encode(&m, &rows)
    }

    fn residual(&self, z: &[f64]) -> Option<DVector<f64>> {
        let s = self.model.states();
        let (m, rows) = self.decode(z);
        let g = self.model.at(&m);
        let q = g.generator(&StationaryStrategy::from_rows_unchecked(rows));
        let v = solve_deterministic(&g, &self.base).ok()?;
        let mut f = Vec::with_capacity(self.dim);
        for j in 0..s - 1 {
            f.push((0..s).map(|i| m[i] * q[(i, j)]).sum());
        }
        for (i, set) in self.support.iter().enumerate() {
            let q0 = g.action_value(i, set[0], &v);
            for &a in &set[1..] {
                f.push(g.action_value(i, a, &v) - q0);
            }
        }
        let f = DVector::from_vec(f);
        f.iter().all(|x| x.is_finite()).then_some(f)
    }

    fn jacobian(&self, z: &[f64]) -> Option<DMatrix<f64>> {
        let n = self.dim;
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-7 * z[k].abs().max(1.0);
            let mut up = z.to_vec();
            let mut dn = z.to_vec();
            up[k] += h;
            dn[k] -= h;
            let col = (self.residual(&up)? - self.residual(&dn)?) / (2.0 * h);
            jac.set_column(k, &col);
        }
        Some(jac)
    }

    fn newton(&self, start: &[f64], opts: &EquilibriumOptions) -> Option<Vec<f64>> {
        let norm = |f: &DVector<f64>| f.amax();
        let mut z = self.project(start);
        let mut res = norm(&self.residual(&z)?);
        let mut polish = 2;
        for _ in 0..opts.max_iter {
            if res <= opts.tol {
                if polish == 0 {
                    break;
                }
                polish -= 1;
            }
            let f = self.residual(&z)?;
            let jac = self.jacobian(&z)?;
            let step = match jac.clone().lu().solve(&(-&f)) {
                Some(x) if x.iter().all(|v| v.is_finite()) => x,
                _ => pseudo_solve(&jac, &(-&f))?,
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            while lambda >= 1.0 / 1024.0 {
                let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(x, d)| x + lambda * d).collect();
                let trial = self.project(&trial);
                if let Some(ft) = self.residual(&trial) {
                    let r = norm(&ft);
                    if r < res * (1.0 - 1e-4 * lambda) || (res <= opts.tol && r <= res) {
                        z = trial;
                        res = r;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (res <= opts.tol).then_some(z)
    }

    fn weight_seeds(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<f64>>> {
        let a_n = self.model.actions();
        (0..count.max(1))
            .map(|k| {
                self.support
                    .iter()
                    .map(|set| {
                        let raw: Vec<f64> = if k == 0 {
                            vec![1.0; set.len()]
                        } else {
                            set.iter().map(|_| rng.random::<f64>() + 0.05).collect()
                        };
                        let total: f64 = raw.iter().sum();
                        let mut row = vec![0.0; a_n];
                        for (&a, w) in set.iter().zip(raw) {
                            row[a] = w / total;
                        }
                        row
                    })
                    .collect()
            })
            .collect()
    }

    fn solve_all(&self, grid: &[Distribution], opts: &EquilibriumOptions, salt: u64) -> Result<SupportOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let weights = self.weight_seeds(opts.weight_seeds, &mut rng);
        let mut starts = Vec::with_capacity(grid.len() * weights.len());
        for m in grid {
            for w in &weights {
                starts.push(self.encode(m.as_slice(), w));
            }
        }
        let mut items = Vec::new();
        let mut singular = false;
        for start in &starts {
            let Some(z) = self.newton(start, opts) else { continue };
            let (m, rows) = self.decode(&z);
            let low = self
                .support
                .iter()
                .zip(&rows)
                .any(|(set, row)| set.len() > 1 && set.iter().any(|&a| row[a] < MIN_SUPPORT_WEIGHT));
            if low {
                continue;
            }
            let pi = StationaryStrategy::new(rows)?;
            let eq = make_equilibrium(self.model, Distribution::project(&m), pi, opts)?;
            if !eq.diagnostics.passed {
                continue;
            }
            if !singular {
                if let Some(jac) = self.jacobian(&z) {
                    let smax = jac.amax().max(1.0);
                    singular = smallest_singular_value(&jac) <= 1e-6 * smax;
                }
            }
            items.push(eq);
        }
        let items = dedup(items, opts.dedup_radius);
        let continuum = if is_continuum_count(items.len(), starts.len()) {
            Some("distinct_starts")
        } else if singular {
            Some("singular_jacobian")
        } else {
            None
        };
        Ok(SupportOutcome {
            items,
            continuum,
            starts: starts.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_enumeration_order() {
        let sups = enumerate_supports(2, 2, 4);
        let want: Vec<Support> = vec![
            vec![vec![0], vec![0, 1]],
            vec![vec![1], vec![0, 1]],
            vec![vec![0, 1], vec![0]],
            vec![vec![0, 1], vec![1]],
            vec![vec![0, 1], vec![0, 1]],
        ];
        assert_eq!(sups, want);
        assert!(enumerate_supports(2, 1, 4).is_empty());
        assert!(enumerate_supports(3, 3, 1).iter().all(|s| extra(s) == 1));
    }

    #[test]
    fn decode_encode_round_trip() {
        let model = GameModel::new(3, 3, 0.5).unwrap();
        let sup: Support = vec![vec![0, 2], vec![1], vec![0, 1, 2]];
        let sys = SupportSystem::new(&model, &sup);
        assert_eq!(sys.dim, 2 + 1 + 2);
        let z = vec![0.2, 0.3, 0.4, 0.1, 0.6];
        let (m, rows) = sys.decode(&z);
        assert!((m[2] - 0.5).abs() < 1e-15);
        assert_eq!(rows[0], vec![0.4, 0.0, 0.6]);
        assert_eq!(rows[1], vec![0.0, 1.0, 0.0]);
        assert!((rows[2][2] - 0.3).abs() < 1e-15);
        assert_eq!(sys.encode(&m, &rows), z);
    }

    #[test]
    fn pure_supports_return_nothing() {
        let model = GameModel::new(2, 2, 0.5).unwrap();
        let report = find_mixed_equilibria(
            &model,
            &SupportChoice::Listed(vec![vec![vec![0], vec![1]]]),
            &EquilibriumOptions::default(),
        )
        .unwrap();
        assert!(report.items.is_empty());
        assert_eq!(report.supports_examined, 0);
    }
}
