//! Bundled reference games. All use two states and `β = 0.5`.

use crate::model::GameModel;
use crate::poly::{PolynomialField, Term};

pub const FIXTURE_NAMES: [&str; 5] = ["REF-1A", "REF-DOM", "REF-IND", "REF-KNIFE", "REF-2x2"];

fn c(v: f64) -> PolynomialField {
    PolynomialField::constant(2, v)
}

/// `c0 + c1 m1 + c2 m2`.
fn aff(c0: f64, c1: f64, c2: f64) -> PolynomialField {
    PolynomialField::affine(c0, &[c1, c2])
}

fn build(actions: usize, rates: &[(usize, usize, usize, PolynomialField)], rewards: &[(usize, usize, PolynomialField)]) -> GameModel {
    let mut m = GameModel::new(2, actions, 0.5).expect("valid dimensions");
    for (i, j, a, p) in rates {
        m.set_rate(*i, *j, *a, p.clone()).expect("fixture indices");
    }
    for (i, a, p) in rewards {
        m.set_reward(*i, *a, p.clone()).expect("fixture indices");
    }
    m
}

/// One action, `Q12 = 1`, `Q21 = 2`, `r = (1, 0)`. Unique equilibrium at
/// `m = (2/3, 1/3)`.
pub fn ref_1a() -> GameModel {
    build(1, &[(0, 1, 0, c(1.0)), (1, 0, 0, c(2.0))], &[(0, 0, c(1.0))])
}

/// Rates as in REF-1A for both actions; action 1 pays 0.25 more in every
/// state, so `d = (1,1)` is strictly optimal everywhere.
pub fn ref_dom() -> GameModel {
    build(
        2,
        &[
            (0, 1, 0, c(1.0)),
            (0, 1, 1, c(1.0)),
            (1, 0, 0, c(2.0)),
            (1, 0, 1, c(2.0)),
        ],
        &[(0, 0, c(1.25)), (1, 0, c(0.25)), (0, 1, c(1.0))],
    )
}

/// Two identical actions: every strategy is optimal at `m = (2/3, 1/3)`.
pub fn ref_ind() -> GameModel {
    build(
        2,
        &[
            (0, 1, 0, c(1.0)),
            (0, 1, 1, c(1.0)),
            (1, 0, 0, c(2.0)),
            (1, 0, 1, c(2.0)),
        ],
        &[(0, 0, c(1.0)), (0, 1, c(1.0))],
    )
}

/// Tie fixture. In state 1 action 1 leaves at rate 1 and action 2 at rate
/// 3; state 2 returns at rate 1 and earns 1 under action 1.
/// `r12(m) = -2.3 + 7 m1 - 8 m1²` makes state 1 indifferent exactly at
/// `m1 ∈ {3/8, 1/2}`.
///
/// Equilibria: `(m1 = 1/2, d = (1,1))` with a tie in state 1, and a mixed
/// one at `m1 = 3/8` with weight 2/3 on action 1.
pub fn ref_knife() -> GameModel {
    let r12 = PolynomialField::from_terms(
        2,
        vec![
            Term { exp: vec![0, 0], coef: -2.3 },
            Term { exp: vec![1, 0], coef: 7.0 },
            Term { exp: vec![2, 0], coef: -8.0 },
        ],
    )
    .expect("well-formed");
    build(
        2,
        &[
            (0, 1, 0, c(1.0)),
            (0, 1, 1, c(3.0)),
            (1, 0, 0, c(1.0)),
            (1, 0, 1, c(1.0)),
        ],
        &[(0, 1, r12), (1, 0, c(1.0))],
    )
}

/// Congestion game: rewards fall with the mass in the own state. Action 1
/// stays in state 1 and action 2 leaves it; in state 2 action 1 leaves.
/// One equilibrium, `d = (1,1)` at an interior `m1 ≈ 0.878`, strictly
/// optimal.
pub fn ref_2x2() -> GameModel {
    build(
        2,
        &[
            (0, 1, 0, aff(0.2, 0.0, 0.5)),
            (0, 1, 1, aff(1.0, 0.0, 1.0)),
            (1, 0, 0, aff(1.0, 1.0, 0.0)),
            (1, 0, 1, aff(0.2, 0.5, 0.0)),
        ],
        &[
            (0, 0, aff(1.2, -1.0, 0.0)),
            (0, 1, aff(0.8, -1.0, 0.0)),
            (1, 0, aff(1.0, 0.0, -1.0)),
            (1, 1, aff(0.5, 0.0, -1.0)),
        ],
    )
}

/// Looks a fixture up by name (case-insensitive).
pub fn fixture(name: &str) -> Option<GameModel> {
    match name.to_ascii_uppercase().as_str() {
        "REF-1A" => Some(ref_1a()),
        "REF-DOM" => Some(ref_dom()),
        "REF-IND" => Some(ref_ind()),
        "REF-KNIFE" => Some(ref_knife()),
        "REF-2X2" => Some(ref_2x2()),
        _ => None,
    }
}
