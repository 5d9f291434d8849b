//! JSON model documents.
//!
//! ```json
//! { "states": 2, "actions": 1, "beta": 0.5,
//!   "rates":   [ {"from": 1, "to": 2, "action": 1, "poly": [{"exp": [0, 0], "coef": 1.0}]} ],
//!   "rewards": [ {"state": 1, "action": 1, "poly": [{"exp": [0, 0], "coef": 1.0}]} ] }
//! ```
//!
//! Indices are 1-based. Off-diagonal rates that are omitted are zero;
//! diagonal entries must be omitted since they are implied by the row sums.

use serde::{Deserialize, Serialize};

use crate::error::{MfgError, Result};
use crate::model::GameModel;
use crate::poly::{PolynomialField, Term};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    states: usize,
    actions: usize,
    beta: f64,
    #[serde(default)]
    rates: Vec<RateDoc>,
    #[serde(default)]
    rewards: Vec<RewardDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateDoc {
    from: usize,
    to: usize,
    action: usize,
    poly: Vec<Term>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RewardDoc {
    state: usize,
    action: usize,
    poly: Vec<Term>,
}

/// A parsed model plus non-fatal generator diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub model: GameModel,
    pub warnings: Vec<String>,
}

/// Grid used for the load-time generator check; `validate` is authoritative.
const LOAD_CHECK_RESOLUTION: usize = 10;

fn schema(location: impl Into<String>, message: impl Into<String>) -> MfgError {
    MfgError::Schema {
        location: location.into(),
        message: message.into(),
    }
}

fn one_based(location: &str, field: &str, v: usize, max: usize) -> Result<usize> {
    if v == 0 || v > max {
        return Err(schema(
            format!("{location}.{field}"),
            format!("index {v} outside 1..={max}"),
        ));
    }
    Ok(v - 1)
}

fn poly_from(location: &str, states: usize, terms: Vec<Term>) -> Result<PolynomialField> {
    for (k, t) in terms.iter().enumerate() {
        if t.exp.len() != states {
            return Err(schema(
                format!("{location}.poly[{k}].exp"),
                format!("expected {states} exponents, found {}", t.exp.len()),
            ));
        }
        if !t.coef.is_finite() {
            return Err(schema(format!("{location}.poly[{k}].coef"), "non-finite coefficient"));
        }
    }
    PolynomialField::from_terms(states, terms).map_err(|e| schema(location, e.to_string()))
}

/// Parses a model document.
pub fn load_model(bytes: &[u8]) -> Result<LoadedModel> {
    let doc: ModelDoc = serde_json::from_slice(bytes).map_err(|e| {
        schema(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if doc.states < 2 {
        return Err(schema("states", format!("must be at least 2, got {}", doc.states)));
    }
    if doc.actions < 1 {
        return Err(schema("actions", "must be at least 1"));
    }
    if !doc.beta.is_finite() || doc.beta <= 0.0 {
        return Err(schema("beta", format!("must be positive, got {}", doc.beta)));
    }
    let (s, a_n) = (doc.states, doc.actions);
    let mut model = GameModel::new(s, a_n, doc.beta)?;
    let mut seen_rates = vec![false; s * s * a_n];
    for (k, r) in doc.rates.into_iter().enumerate() {
        let loc = format!("rates[{k}]");
        let i = one_based(&loc, "from", r.from, s)?;
        let j = one_based(&loc, "to", r.to, s)?;
        let a = one_based(&loc, "action", r.action, a_n)?;
        if i == j {
            return Err(schema(&loc, "diagonal entries must be omitted (they are computed)"));
        }
        let slot = (i * s + j) * a_n + a;
        if std::mem::replace(&mut seen_rates[slot], true) {
            return Err(schema(&loc, format!("duplicate entry for ({}, {}, {})", r.from, r.to, r.action)));
        }
        model.set_rate(i, j, a, poly_from(&loc, s, r.poly)?)?;
    }
    let mut seen_rewards = vec![false; s * a_n];
    for (k, r) in doc.rewards.into_iter().enumerate() {
        let loc = format!("rewards[{k}]");
        let i = one_based(&loc, "state", r.state, s)?;
        let a = one_based(&loc, "action", r.action, a_n)?;
        if std::mem::replace(&mut seen_rewards[i * a_n + a], true) {
            return Err(schema(&loc, format!("duplicate entry for ({}, {})", r.state, r.action)));
        }
        model.set_reward(i, a, poly_from(&loc, s, r.poly)?)?;
    }
    let report = model.validate(LOAD_CHECK_RESOLUTION);
    Ok(LoadedModel {
        model,
        warnings: report.failures,
    })
}

pub fn load_model_str(text: &str) -> Result<LoadedModel> {
    load_model(text.as_bytes())
}

fn doc_of(model: &GameModel) -> ModelDoc {
    let (s, a_n) = (model.states(), model.actions());
    let mut rates = Vec::new();
    for i in 0..s {
        for j in (0..s).filter(|&j| j != i) {
            for a in 0..a_n {
                let p = model.rate_field(i, j, a);
                if !p.is_zero() {
                    rates.push(RateDoc {
                        from: i + 1,
                        to: j + 1,
                        action: a + 1,
                        poly: p.terms().to_vec(),
                    });
                }
            }
        }
    }
    let mut rewards = Vec::new();
    for i in 0..s {
        for a in 0..a_n {
            let p = model.reward_field(i, a);
            if !p.is_zero() {
                rewards.push(RewardDoc {
                    state: i + 1,
                    action: a + 1,
                    poly: p.terms().to_vec(),
                });
            }
        }
    }
    ModelDoc {
        states: s,
        actions: a_n,
        beta: model.beta(),
        rates,
        rewards,
    }
}

/// Serializes a model; coefficients are written in shortest round-trip form,
/// so `load_model(save_model(x))` reproduces `x` exactly.
pub fn save_model(model: &GameModel) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&doc_of(model)).expect("model documents always serialize");
    out.push(b'\n');
    out
}
