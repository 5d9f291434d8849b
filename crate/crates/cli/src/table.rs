//! Plain-text renderings of the command reports.

use std::fmt::Write;

use mfg_essential::equilibrium::{Equilibrium, EquilibriumKind, EquilibriumSet};
use mfg_essential::essentiality::{EnsembleReport, EssentialityAssessment, ProbeProfile};
use mfg_essential::mdp::McEstimate;
use mfg_essential::model::ValidationReport;
use mfg_essential::DeterministicStrategy;

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

fn strategy(eq: &Equilibrium) -> String {
    match eq.strategy() {
        Some(d) => d.to_string(),
        None => {
            let rows: Vec<String> = eq.pi.rows().iter().map(|r| vector(r)).collect();
            format!("[{}]", rows.join("; "))
        }
    }
}

fn kind(eq: &Equilibrium) -> &'static str {
    match eq.kind {
        EquilibriumKind::Deterministic => "deterministic",
        EquilibriumKind::Mixed => "mixed",
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4e}"))
}

pub(crate) fn validation(source: &str, r: &ValidationReport) -> String {
    let mut out = String::new();
    let verdict = if r.passed { "valid" } else { "INVALID" };
    let _ = writeln!(out, "{source}: {verdict}");
    let _ = writeln!(
        out,
        "  beta in (0,1): {}  grid: {}  points checked: {}",
        r.beta_ok, r.grid_resolution, r.points_checked
    );
    for f in &r.failures {
        let _ = writeln!(out, "  - {f}");
    }
    out
}

pub(crate) fn equilibria(source: &str, set: &EquilibriumSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{source}: {} equilibria", set.len());
    let _ = writeln!(out, "{:>3}  {:<13}  {:<28}  {:<24}  {:>11}  {:>11}", "#", "kind", "m", "strategy", "residual", "gap");
    for (k, eq) in set.items.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:>3}  {:<13}  {:<28}  {:<24}  {:>11.3e}  {:>11}",
            k + 1,
            kind(eq),
            vector(eq.m.as_slice()),
            strategy(eq),
            eq.diagnostics.stationarity_residual,
            opt(eq.diagnostics.value_gap)
        );
    }
    if set.is_continuum() {
        let _ = writeln!(out, "warning: the equilibrium set looks like a continuum");
    }
    out
}

pub(crate) fn essential(source: &str, a: &EssentialityAssessment) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{source}: {} equilibria", a.equilibria.len());
    let _ = writeln!(
        out,
        "{:>3}  {:<28}  {:<24}  {:<14}  {:<14}  {:<10}  {:>11}  {:>11}",
        "#", "m", "strategy", "unique", "characterize", "essential", "radius", "probe max"
    );
    for (k, r) in a.reports.iter().enumerate() {
        let probe_max = r.probe.as_ref().and_then(|p| p.final_max());
        let _ = writeln!(
            out,
            "{:>3}  {:<28}  {:<24}  {:<14}  {:<14}  {:<10}  {:>11}  {:>11}",
            k + 1,
            vector(r.equilibrium.m.as_slice()),
            strategy(&r.equilibrium),
            r.unique_criterion.verdict.to_string(),
            r.characterization_criterion.verdict.to_string(),
            if r.essential_certified { "certified" } else { "unknown" },
            opt(r.certified_radius),
            opt(probe_max)
        );
        let _ = writeln!(out, "     {}", r.characterization_criterion.reason);
    }
    out
}

pub(crate) fn probe(source: &str, index: usize, eq: &Equilibrium, p: &ProbeProfile) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{source}: equilibrium {index} m = {} strategy {}",
        vector(eq.m.as_slice()),
        strategy(eq)
    );
    let _ = writeln!(out, "{:>11}  {:>7}  {:>11}  {:>11}  {:>8}", "delta", "samples", "max", "mean", "failures");
    for l in &p.levels {
        let _ = writeln!(
            out,
            "{:>11.3e}  {:>7}  {:>11.4e}  {:>11.4e}  {:>8}",
            l.delta, l.samples, l.max_displacement, l.mean_displacement, l.failures
        );
    }
    let _ = writeln!(out, "note: {}", p.note);
    out
}

pub(crate) fn ensemble(r: &EnsembleReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4}  {:>10}  {:>6}  {:>9}  {:>11}  {:>12}", "#", "seed", "eqs", "continuum", "final max", "corroborated");
    for g in &r.games {
        let _ = writeln!(
            out,
            "{:>4}  {:>10}  {:>6}  {:>9}  {:>11}  {:>12}",
            g.index,
            g.seed,
            g.equilibria,
            g.continuum,
            opt(g.final_max_displacement),
            g.corroborated
        );
    }
    let _ = writeln!(
        out,
        "corroborated {}/{} (epsilon {})",
        r.corroborated, r.count, r.epsilon
    );
    for inj in &r.injections {
        let _ = writeln!(
            out,
            "injected {}: final max {} flagged {}",
            inj.name,
            opt(inj.final_max_displacement),
            inj.flagged
        );
    }
    let _ = writeln!(out, "note: {}", r.note);
    out
}

pub(crate) fn mc(
    source: &str,
    d: &DeterministicStrategy,
    rows: &[serde_json::Value],
    x0_exact: f64,
    est: &McEstimate,
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{source}: strategy {d}, {} paths, horizon {}",
        est.paths, est.horizon
    );
    let _ = writeln!(out, "{:>5}  {:>14}  {:>14}  {:>11}  {:>6}", "state", "linear", "monte carlo", "std err", "ok");
    for r in rows {
        let _ = writeln!(
            out,
            "{:>5}  {:>14.8}  {:>14.8}  {:>11.3e}  {:>6}",
            r["state"],
            r["linear_solve"].as_f64().unwrap_or(f64::NAN),
            r["monte_carlo"].as_f64().unwrap_or(f64::NAN),
            r["std_error"].as_f64().unwrap_or(f64::NAN),
            r["within_3se"]
        );
    }
    let _ = writeln!(out, "value from x0 (linear solve): {x0_exact:.8}");
    out
}
