//! Test-side oracles and random model generators shared by the integration
//! tests.
#![allow(dead_code)]

use mfg_essential::{Distribution, GameModel, PolynomialField, Term};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Term-by-term evaluation of a polynomial field.
pub fn naive_eval(p: &PolynomialField, m: &[f64]) -> f64 {
    p.terms()
        .iter()
        .map(|t| t.coef * t.exp.iter().zip(m).map(|(&e, &x)| x.powi(e as i32)).product::<f64>())
        .sum()
}

/// Generator under a deterministic selection, diagonal rebuilt from the
/// off-diagonal fields.
pub fn generator(model: &GameModel, d: &[usize], m: &[f64]) -> Vec<Vec<f64>> {
    let s = model.states();
    let mut q = vec![vec![0.0; s]; s];
    for i in 0..s {
        for j in (0..s).filter(|&j| j != i) {
            q[i][j] = naive_eval(model.rate_field(i, j, d[i]), m);
        }
        q[i][i] = -q[i].iter().sum::<f64>();
    }
    q
}

pub fn reward(model: &GameModel, i: usize, a: usize, m: &[f64]) -> f64 {
    naive_eval(model.reward_field(i, a), m)
}

pub fn values(model: &GameModel, d: &[usize], m: &[f64]) -> Vec<f64> {
    let s = model.states();
    let q = generator(model, d, m);
    let a = (0..s)
        .map(|i| (0..s).map(|j| if i == j { model.beta() } else { 0.0 } - q[i][j]).collect())
        .collect();
    gauss(a, (0..s).map(|i| reward(model, i, d[i], m)).collect())
}

pub fn action_value(model: &GameModel, i: usize, a: usize, m: &[f64], v: &[f64]) -> f64 {
    let mut d = vec![0; model.states()];
    d[i] = a;
    let q = generator(model, &d, m);
    reward(model, i, a, m) + (0..model.states()).map(|j| q[i][j] * v[j]).sum::<f64>()
}

pub fn all_strategies(s: usize, a: usize) -> Vec<Vec<usize>> {
    (0..a.pow(s as u32))
        .map(|mut k| {
            (0..s)
                .map(|_| {
                    let x = k % a;
                    k /= a;
                    x
                })
                .collect()
        })
        .collect()
}

pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_distribution(rng: &mut ChaCha8Rng, s: usize) -> Distribution {
    let w: Vec<f64> = (0..s).map(|_| -rng.random_range(1e-12..1.0f64).ln()).collect();
    let total: f64 = w.iter().sum();
    Distribution::new(w.iter().map(|x| x / total).collect()).unwrap()
}

/// Rates `c + Σ slope_k m_k` with `|slope_k| < c` (nonnegative on the
/// simplex); rewards affine plus an optional `m_1²` term.
pub fn random_model(rng: &mut ChaCha8Rng, s: usize, a_n: usize, quadratic: bool) -> GameModel {
    let mut model = GameModel::new(s, a_n, rng.random_range(0.3..0.9)).unwrap();
    for i in 0..s {
        for j in (0..s).filter(|&j| j != i) {
            for a in 0..a_n {
                let c = rng.random_range(0.2..2.0);
                let slopes: Vec<f64> = (0..s).map(|_| rng.random_range(-0.9..0.9) * c).collect();
                model.set_rate(i, j, a, PolynomialField::affine(c, &slopes)).unwrap();
            }
        }
        for a in 0..a_n {
            let c = rng.random_range(-1.0..1.0);
            let slopes: Vec<f64> = (0..s).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut p = PolynomialField::affine(c, &slopes);
            if quadratic {
                let mut exp = vec![0; s];
                exp[0] = 2;
                let q = PolynomialField::from_terms(s, vec![Term { exp, coef: rng.random_range(-1.0..1.0) }]).unwrap();
                p = p.add(&q).unwrap();
            }
            model.set_reward(i, a, p).unwrap();
        }
    }
    model
}

/// Constant-coefficient 2-state model with the given rates and rewards per
/// action: `rates[a] = (Q12, Q21)`, `rewards[a] = (r1, r2)`.
pub fn constant_two_state(beta: f64, rates: &[(f64, f64)], rewards: &[(f64, f64)]) -> GameModel {
    let mut model = GameModel::new(2, rates.len(), beta).unwrap();
    for (a, (&(q12, q21), &(r1, r2))) in rates.iter().zip(rewards).enumerate() {
        model.set_rate(0, 1, a, PolynomialField::constant(2, q12)).unwrap();
        model.set_rate(1, 0, a, PolynomialField::constant(2, q21)).unwrap();
        model.set_reward(0, a, PolynomialField::constant(2, r1)).unwrap();
        model.set_reward(1, a, PolynomialField::constant(2, r2)).unwrap();
    }
    model
}
