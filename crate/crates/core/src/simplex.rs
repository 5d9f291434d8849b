//! Points of the probability simplex and uniform grids on it.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};

/// Simplex-membership tolerance.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point of the probability simplex over the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution(Vec<f64>);

impl Distribution {
    /// Checks nonnegativity and unit sum within [`SIMPLEX_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(MfgError::InvalidDistribution("empty vector".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < -SIMPLEX_TOL)
        {
            return Err(MfgError::InvalidDistribution(format!(
                "entry {} is {p}",
                i + 1
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(MfgError::InvalidDistribution(format!(
                "entries sum to {sum}"
            )));
        }
        Ok(Self(probs))
    }

    /// Clips negative entries to zero and rescales to unit sum. Falls back to
    /// the uniform distribution if nothing positive remains.
    pub fn project(raw: &[f64]) -> Self {
        let clipped: Vec<f64> = raw.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect();
        let sum: f64 = clipped.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            let n = raw.len();
            return Self(vec![1.0 / n as f64; n]);
        }
        Self(clipped.iter().map(|x| x / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// Vertex `e_k` (0-based).
    pub fn vertex(n: usize, k: usize) -> Self {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        max_norm_diff(&self.0, &other.0)
    }

    /// Re-orders the entries so that entry `perm[i]` of the result is entry `i`
    /// of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = vec![0.0; self.0.len()];
        for (i, &p) in perm.iter().enumerate() {
            out[p] = self.0[i];
        }
        Self(out)
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn max_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Number of points of the uniform grid with `resolution` subdivisions per edge
/// on the simplex over `states` states: C(resolution + states - 1, states - 1).
pub fn grid_size(states: usize, resolution: usize) -> u128 {
    let k = (states - 1) as u128;
    let n = resolution as u128 + k;
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All points `c / resolution` where `c` is a composition of `resolution` into
/// `states` nonnegative parts, in lexicographically decreasing order of `c`
/// (so the first point is the first vertex).
pub fn simplex_grid(states: usize, resolution: usize) -> Vec<Distribution> {
    assert!(states >= 1 && resolution >= 1);
    let mut out = Vec::with_capacity(grid_size(states, resolution) as usize);
    let mut counts = vec![0usize; states];
    fill(&mut counts, 0, resolution, resolution, &mut out);
    out
}

fn fill(counts: &mut [usize], pos: usize, left: usize, n: usize, out: &mut Vec<Distribution>) {
    if pos == counts.len() - 1 {
        counts[pos] = left;
        out.push(Distribution(
            counts.iter().map(|&c| c as f64 / n as f64).collect(),
        ));
        return;
    }
    for c in (0..=left).rev() {
        counts[pos] = c;
        fill(counts, pos + 1, left - c, n, out);
    }
}

/// Default grid resolution for sup-norm metrics and validation.
pub fn default_metric_resolution(states: usize) -> usize {
    match states {
        0..=3 => 50,
        4..=5 => 20,
        _ => 8,
    }
}

/// Default seeding resolution for stationary-point searches.
pub fn default_seed_resolution(states: usize) -> usize {
    match states {
        0..=3 => 20,
        4..=5 => 8,
        _ => 4,
    }
}

/// Lattice points of the max-norm ball of radius `radius` around `center`,
/// intersected with the simplex. Offsets of the first `S - 1` coordinates run
/// over `steps` equally spaced values in `[-radius, radius]`; the last
/// coordinate absorbs the sum. The center is always the first point.
pub fn ball_lattice(center: &Distribution, radius: f64, steps: usize) -> Vec<Distribution> {
    let s = center.len();
    let steps = steps.max(2);
    let mut out = vec![center.clone()];
    let free = s - 1;
    let total = steps.pow(free as u32);
    for code in 0..total {
        let mut c = code;
        let mut point = center.as_slice().to_vec();
        let mut shift = 0.0;
        for coord in point.iter_mut().take(free) {
            let k = c % steps;
            c /= steps;
            let off = -radius + 2.0 * radius * k as f64 / (steps - 1) as f64;
            *coord += off;
            shift += off;
        }
        point[s - 1] -= shift;
        if shift.abs() > radius * (1.0 + 1e-12) {
            continue;
        }
        if point.iter().any(|&x| x < 0.0) {
            continue;
        }
        let sum: f64 = point.iter().sum();
        for x in point.iter_mut() {
            *x /= sum;
        }
        let p = Distribution(point);
        if p.max_dist(center) < 1e-15 {
            continue;
        }
        out.push(p);
    }
    out
}

/// Default number of lattice steps per axis for [`ball_lattice`].
pub fn default_ball_steps(states: usize) -> usize {
    match states {
        0..=2 => 41,
        3 => 11,
        4..=5 => 5,
        _ => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts_match_binomial() {
        for (s, n) in [(2, 1), (2, 50), (3, 20), (4, 8), (5, 20)] {
            let g = simplex_grid(s, n);
            assert_eq!(g.len() as u128, grid_size(s, n), "S={s} n={n}");
            for p in &g {
                Distribution::new(p.as_slice().to_vec()).unwrap();
            }
        }
        assert_eq!(grid_size(3, 2), 6);
    }

    #[test]
    fn grid_contains_vertices() {
        let g = simplex_grid(3, 4);
        for k in 0..3 {
            assert!(g.iter().any(|p| p.max_dist(&Distribution::vertex(3, k)) == 0.0));
        }
        assert_eq!(g[0], Distribution::vertex(3, 0));
    }

    #[test]
    fn distribution_rejects_bad_input() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![1.5, -0.5]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Distribution::new(vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn projection_clips_and_normalizes() {
        let p = Distribution::project(&[0.6, -0.1, 0.6]);
        assert_eq!(p.as_slice(), &[0.5, 0.0, 0.5]);
        assert_eq!(Distribution::project(&[-1.0, -1.0]).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn ball_lattice_stays_in_ball_and_simplex() {
        let c = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let pts = ball_lattice(&c, 0.1, 7);
        assert!(pts.len() > 10);
        for p in &pts {
            assert!(p.max_dist(&c) <= 0.1 + 1e-12);
            assert!(p.as_slice().iter().all(|&x| x >= 0.0));
        }
        let corner = Distribution::vertex(2, 0);
        let pts = ball_lattice(&corner, 0.1, 5);
        assert!(pts.iter().all(|p| p[0] <= 1.0 && p[1] >= 0.0));
    }
}
