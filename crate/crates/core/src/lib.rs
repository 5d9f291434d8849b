//! Stationary equilibria of continuous-time mean field games with finite
//! state and action spaces, and tools to judge whether they survive small
//! perturbations of the game.
//!
//! The pipeline is:
//!
//! * [`model`]: rate and reward families `Q_{ija}(m)`, `r_{ia}(m)` as
//!   polynomials in the population distribution `m`, plus the sup-norm game
//!   metric;
//! * [`mdp`]: the individual discounted control problem at a frozen `m`;
//! * [`stationary`]: solutions of `0 = mᵀ Q^π(m)`;
//! * [`equilibrium`]: enumeration of all stationary equilibria `(m, π)`;
//! * [`essentiality`]: sufficient criteria for essential equilibria, certified
//!   perturbation radii and empirical perturbation probes.

pub mod equilibrium;
pub mod error;
pub mod essentiality;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod model;
pub mod poly;
pub mod simplex;
pub mod stationary;

pub use error::{MfgError, Result};
pub use model::{DeterministicStrategy, GameModel, StationaryStrategy};
pub use poly::{PolynomialField, Term};
pub use simplex::Distribution;
