//! Sufficient criteria for essential equilibria, certified perturbation
//! radii, and empirical perturbation probes.
//!
//! Verdicts are tri-state. A criterion can certify that an equilibrium is
//! essential; it never proves the opposite. Probes only give evidence.

mod probe;
mod radius;

use serde::{Deserialize, Serialize};

use crate::equilibrium::{
    find_all_equilibria, Equilibrium, EquilibriumKind, EquilibriumOptions, EquilibriumSet, SearchMetadata,
};
use crate::error::{MfgError, Result};
use crate::mdp::{DEFAULT_OPT_TOL, DEFAULT_STRATEGY_CAP};
use crate::model::GameModel;
use crate::simplex::{default_ball_steps, default_metric_resolution};

pub use probe::{
    ensemble_genericity_study, probe, sample_perturbed_game, EnsembleGame, EnsembleReport, FamilySpec,
    InjectedFixture, InjectionResult, ProbeLevel, ProbeOptions, ProbeProfile,
};
pub use radius::{
    certified_delta, essential_stationary_check, perturbation_constants, strategy_persistence_radius,
    PerturbationConstants, RawExtrema, StationaryCertificate, StrategyPersistence, MAX_SHRINKS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    NotCertified,
    Inapplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "certified",
            Verdict::NotCertified => "not-certified",
            Verdict::Inapplicable => "inapplicable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssentialityOptions {
    /// Ball radius around `m` for strategy persistence.
    pub epsilon: f64,
    /// Grid for the perturbation constants and the irreducibility scan;
    /// `None` = default.
    pub grid: Option<usize>,
    pub ball_steps: Option<usize>,
    pub opt_tol: f64,
    pub cap: usize,
    pub eq: EquilibriumOptions,
}

impl Default for EssentialityOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            grid: None,
            ball_steps: None,
            opt_tol: DEFAULT_OPT_TOL,
            cap: DEFAULT_STRATEGY_CAP,
            eq: EquilibriumOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniqueCriterion {
    pub verdict: Verdict,
    pub reason: String,
    pub equilibria: usize,
    /// Uniqueness holds only relative to these search settings.
    pub search: SearchMetadata,
}

/// A single equilibrium is essential.
pub fn check_unique_criterion(_model: &GameModel, eqset: &EquilibriumSet) -> UniqueCriterion {
    let n = eqset.len();
    let (verdict, reason) = if eqset.is_continuum() {
        (Verdict::Inapplicable, "the equilibrium set looks like a continuum".to_string())
    } else if n == 1 {
        (
            Verdict::Certified,
            "exactly one equilibrium found (relative to the search grids and caps)".to_string(),
        )
    } else if n == 0 {
        (Verdict::NotCertified, "no equilibrium found".to_string())
    } else {
        (Verdict::NotCertified, format!("{n} equilibria found"))
    };
    UniqueCriterion {
        verdict,
        reason,
        equilibria: n,
        search: eqset.metadata.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationCriterion {
    pub verdict: Verdict,
    pub reason: String,
    /// Strict optimality of the strategy near `m` (`δ1`).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strategy: Option<StrategyPersistence>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strategy_failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stationary: Option<StationaryCertificate>,
    /// Rate radius keeping a stationary point of `Q^d` near `m` (`δ2`).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stationary_delta: Option<f64>,
    /// `min(δ1, δ2)`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub radius: Option<f64>,
}

impl CharacterizationCriterion {
    fn new(verdict: Verdict, reason: impl Into<String>) -> Self {
        Self {
            verdict,
            reason: reason.into(),
            strategy: None,
            strategy_failure: None,
            stationary: None,
            stationary_delta: None,
            radius: None,
        }
    }
}

/// A deterministic equilibrium whose strategy is the unique optimum near `m`
/// and whose population is an essential stationary point is essential.
pub fn check_characterization(
    model: &GameModel,
    eq: &Equilibrium,
    opts: &EssentialityOptions,
) -> Result<CharacterizationCriterion> {
    let grid = opts.grid.unwrap_or_else(|| default_metric_resolution(model.states()));
    let constants = perturbation_constants(model, grid, opts.cap)?;
    characterization_with(model, eq, &constants, opts)
}

fn characterization_with(
    model: &GameModel,
    eq: &Equilibrium,
    constants: &PerturbationConstants,
    opts: &EssentialityOptions,
) -> Result<CharacterizationCriterion> {
    let d = match (eq.kind, eq.strategy()) {
        (EquilibriumKind::Deterministic, Some(d)) => d,
        _ => {
            return Ok(CharacterizationCriterion::new(
                Verdict::Inapplicable,
                "mixed equilibrium: the criterion covers deterministic strategies only",
            ))
        }
    };
    let mut out = CharacterizationCriterion::new(Verdict::NotCertified, "");
    match radius::persistence_with(model, &eq.m, &d, opts.epsilon, constants, opts) {
        Ok(p) => out.strategy = Some(p),
        Err(MfgError::NotUniqueOptimal(msg)) => out.strategy_failure = Some(msg),
        Err(e) => return Err(e),
    }
    let cert = essential_stationary_check(model, &d, &eq.m, opts)?;
    let stationary_ok = cert.verdict == Verdict::Certified;
    out.stationary = Some(cert);
    match (&out.strategy, stationary_ok) {
        (Some(p), true) => {
            let steps = opts.ball_steps.unwrap_or_else(|| default_ball_steps(model.states()));
            out.verdict = Verdict::Certified;
            out.stationary_delta = radius::stationary_radius(model, &d, &eq.m, p.epsilon, steps).map(|(delta, _)| delta);
            out.radius = out.stationary_delta.map(|d2| d2.min(p.delta));
            out.reason = format!(
                "{d} is the unique optimal strategy near m (gap {:.3e}) and m is an essential stationary point",
                p.gamma
            );
        }
        (None, _) => {
            out.reason = format!(
                "strategy not uniquely optimal: {}",
                out.strategy_failure.clone().unwrap_or_default()
            );
        }
        (Some(_), false) => {
            out.reason = format!(
                "stationary point not certified: {}",
                out.stationary.as_ref().map(|c| c.reason.clone()).unwrap_or_default()
            );
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialityReport {
    pub equilibrium: Equilibrium,
    pub unique_criterion: UniqueCriterion,
    pub characterization_criterion: CharacterizationCriterion,
    /// True iff at least one criterion certified the equilibrium.
    pub essential_certified: bool,
    /// Certified game radius, when the characterization criterion supplies
    /// one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certified_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probe: Option<ProbeProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialityAssessment {
    pub equilibria: EquilibriumSet,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub constants: Option<PerturbationConstants>,
    pub reports: Vec<EssentialityReport>,
}

impl EssentialityAssessment {
    pub fn all_certified(&self) -> bool {
        !self.reports.is_empty() && self.reports.iter().all(|r| r.essential_certified)
    }
}

/// Runs both criteria (and optionally a probe) on every equilibrium found.
pub fn assess(model: &GameModel, opts: &EssentialityOptions, probe_opts: Option<&ProbeOptions>) -> Result<EssentialityAssessment> {
    let equilibria = find_all_equilibria(model, &opts.eq)?;
    let unique = check_unique_criterion(model, &equilibria);
    let needs_constants = equilibria.items.iter().any(|e| e.kind == EquilibriumKind::Deterministic);
    let constants = if needs_constants {
        let grid = opts.grid.unwrap_or_else(|| default_metric_resolution(model.states()));
        Some(perturbation_constants(model, grid, opts.cap)?)
    } else {
        None
    };
    let mut reports = Vec::with_capacity(equilibria.len());
    for eq in &equilibria.items {
        let characterization = match &constants {
            Some(c) => characterization_with(model, eq, c, opts)?,
            None => CharacterizationCriterion::new(
                Verdict::Inapplicable,
                "mixed equilibrium: the criterion covers deterministic strategies only",
            ),
        };
        let essential_certified =
            unique.verdict == Verdict::Certified || characterization.verdict == Verdict::Certified;
        let probe = match probe_opts {
            Some(p) => Some(probe(model, eq, &p.deltas, p.samples, p.seed, &p.eq)?),
            None => None,
        };
        reports.push(EssentialityReport {
            equilibrium: eq.clone(),
            unique_criterion: unique.clone(),
            certified_radius: characterization.radius,
            characterization_criterion: characterization,
            essential_certified,
            probe,
        });
    }
    Ok(EssentialityAssessment {
        equilibria,
        constants,
        reports,
    })
}
