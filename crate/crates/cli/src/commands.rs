use std::path::Path;

use mfg_essential::equilibrium::{find_all_equilibria, EquilibriumOptions, EquilibriumSet};
use mfg_essential::essentiality::{
    assess, ensemble_genericity_study, probe, FamilySpec, InjectedFixture, ProbeOptions,
};
use mfg_essential::fixtures::{fixture, FIXTURE_NAMES};
use mfg_essential::io::{load_model, save_model};
use mfg_essential::mdp::{monte_carlo_value, value_of_deterministic, McOptions};
use mfg_essential::model::game_distance;
use mfg_essential::{DeterministicStrategy, Distribution, GameModel, StationaryStrategy};
use serde_json::json;

use crate::{input_error, table, Command, Failure, Outcome, ProbeArgs, SearchArgs, Status};

struct Loaded {
    model: GameModel,
    warnings: Vec<String>,
}

/// A model file, or a bundled fixture when no such file exists.
fn load(source: &str) -> Result<Loaded, Failure> {
    let path = Path::new(source);
    if path.exists() {
        let bytes = std::fs::read(path).map_err(|e| input_error(format!("cannot read {source}: {e}")))?;
        let loaded = load_model(&bytes)?;
        return Ok(Loaded {
            model: loaded.model,
            warnings: loaded.warnings,
        });
    }
    fixture(source)
        .map(|model| Loaded { model, warnings: Vec::new() })
        .ok_or_else(|| {
            input_error(format!(
                "{source}: no such file and not a bundled fixture ({})",
                FIXTURE_NAMES.join(", ")
            ))
        })
}

fn search_options(s: &SearchArgs) -> Result<EquilibriumOptions, Failure> {
    if !(s.tol > 0.0 && s.tol < 1.0) {
        return Err(input_error(format!("--tol must lie in (0, 1), got {}", s.tol)));
    }
    if matches!(s.grid, Some(g) if g < 2) {
        return Err(input_error("--grid must be at least 2"));
    }
    Ok(EquilibriumOptions {
        stationary_grid: s.grid,
        tol: s.tol,
        strategy_cap: s.cap,
        ..EquilibriumOptions::default()
    })
}

fn probe_options(p: &ProbeArgs, eq: EquilibriumOptions, epsilon: f64) -> Result<ProbeOptions, Failure> {
    if p.deltas.is_empty() || p.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(input_error("--deltas must be positive numbers"));
    }
    if p.deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(input_error("--deltas must be strictly decreasing"));
    }
    Ok(ProbeOptions {
        deltas: p.deltas.clone(),
        samples: p.samples,
        seed: p.seed,
        epsilon,
        eq,
    })
}

fn warnings_of(set: &EquilibriumSet) -> Vec<String> {
    set.warnings
        .iter()
        .map(|w| serde_json::to_string(w).expect("warnings serialize"))
        .collect()
}

pub(crate) fn dispatch(cmd: &Command) -> Result<Outcome, Failure> {
    match cmd {
        Command::Validate { model, grid } => validate(model, *grid),
        Command::Equilibria { model, search } => equilibria(model, search),
        Command::Essential {
            model,
            search,
            epsilon,
            metric_grid,
            probe,
            probe_args,
        } => essential(model, search, *epsilon, *metric_grid, probe.then_some(probe_args)),
        Command::Probe {
            model,
            equilibrium,
            search,
            probe_args,
        } => probe_cmd(model, *equilibrium, search, probe_args),
        Command::Ensemble {
            family,
            count,
            epsilon,
            inject,
            search,
            probe_args,
        } => ensemble(family.as_deref(), *count, *epsilon, inject, search, probe_args),
        Command::Distance { model_a, model_b, grid } => distance(model_a, model_b, *grid),
        Command::McCheck {
            model,
            strategy,
            m,
            x0,
            horizon,
            paths,
            seed,
        } => mc_check(model, strategy, m.as_deref(), x0.as_deref(), *horizon, *paths, *seed),
        Command::Fixtures { name } => fixtures(name.as_deref()),
    }
}

fn validate(source: &str, grid: usize) -> Result<Outcome, Failure> {
    if grid < 1 {
        return Err(input_error("--grid must be at least 1"));
    }
    let loaded = load(source)?;
    let report = loaded.model.validate(grid);
    let status = if report.passed { Status::Ok } else { Status::NotMet };
    Ok(Outcome {
        table: table::validation(source, &report),
        json: json!({ "command": "validate", "model": source, "report": report }),
        status,
        notes: Vec::new(),
    })
}

fn equilibria(source: &str, search: &SearchArgs) -> Result<Outcome, Failure> {
    let loaded = load(source)?;
    let set = find_all_equilibria(&loaded.model, &search_options(search)?)?;
    let mut notes = loaded.warnings;
    notes.extend(warnings_of(&set).into_iter().map(|w| format!("warning: {w}")));
    let status = if set.is_empty() {
        notes.push("no equilibrium found: refine --grid (an equilibrium always exists)".into());
        Status::Empty
    } else {
        Status::Ok
    };
    Ok(Outcome {
        table: table::equilibria(source, &set),
        json: json!({
            "command": "equilibria",
            "model": source,
            "continuum": set.is_continuum(),
            "report": set,
        }),
        status,
        notes,
    })
}

fn essential(
    source: &str,
    search: &SearchArgs,
    epsilon: f64,
    metric_grid: Option<usize>,
    probe_args: Option<&ProbeArgs>,
) -> Result<Outcome, Failure> {
    if !(epsilon > 0.0) {
        return Err(input_error("--epsilon must be positive"));
    }
    let loaded = load(source)?;
    let eq = search_options(search)?;
    let opts = mfg_essential::essentiality::EssentialityOptions {
        epsilon,
        grid: metric_grid,
        cap: search.cap,
        eq,
        ..Default::default()
    };
    let probe_opts = probe_args.map(|p| probe_options(p, eq, epsilon)).transpose()?;
    let report = assess(&loaded.model, &opts, probe_opts.as_ref())?;
    let status = if report.equilibria.is_empty() {
        Status::Empty
    } else if report.all_certified() {
        Status::Ok
    } else {
        Status::NotMet
    };
    Ok(Outcome {
        table: table::essential(source, &report),
        json: json!({
            "command": "essential",
            "model": source,
            "all_certified": report.all_certified(),
            "report": report,
        }),
        status,
        notes: loaded.warnings,
    })
}

fn probe_cmd(source: &str, index: usize, search: &SearchArgs, p: &ProbeArgs) -> Result<Outcome, Failure> {
    let loaded = load(source)?;
    let eq_opts = search_options(search)?;
    let popts = probe_options(p, eq_opts, 0.05)?;
    let set = find_all_equilibria(&loaded.model, &eq_opts)?;
    if set.is_empty() {
        return Err(Failure {
            status: Status::Empty,
            message: "no equilibrium to probe: refine --grid".into(),
        });
    }
    if index == 0 || index > set.len() {
        return Err(input_error(format!(
            "--equilibrium {index} out of range: {} equilibria found",
            set.len()
        )));
    }
    let eq = &set.items[index - 1];
    let profile = probe(&loaded.model, eq, &popts.deltas, popts.samples, popts.seed, &eq_opts)?;
    Ok(Outcome {
        table: table::probe(source, index, eq, &profile),
        json: json!({
            "command": "probe",
            "model": source,
            "equilibrium_index": index,
            "equilibrium": eq,
            "report": profile,
        }),
        status: Status::Ok,
        notes: loaded.warnings,
    })
}

fn ensemble(
    family: Option<&Path>,
    count: usize,
    epsilon: f64,
    inject: &[String],
    search: &SearchArgs,
    p: &ProbeArgs,
) -> Result<Outcome, Failure> {
    if !(epsilon > 0.0) {
        return Err(input_error("--epsilon must be positive"));
    }
    let spec = match family {
        Some(path) => {
            let text = std::fs::read(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_slice::<FamilySpec>(&text)
                .map_err(|e| input_error(format!("family {}: {e}", path.display())))?
        }
        None => FamilySpec::default(),
    };
    let eq = search_options(search)?;
    let popts = probe_options(p, eq, epsilon)?;
    let injections = inject
        .iter()
        .map(|src| {
            load(src).map(|l| InjectedFixture {
                name: src.clone(),
                model: l.model,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = ensemble_genericity_study(&spec, count, p.seed, &popts, &injections)?;
    Ok(Outcome {
        table: table::ensemble(&report),
        json: json!({ "command": "ensemble", "family": spec, "report": report }),
        status: Status::Ok,
        notes: Vec::new(),
    })
}

fn distance(a: &str, b: &str, grid: usize) -> Result<Outcome, Failure> {
    if grid < 1 {
        return Err(input_error("--grid must be at least 1"));
    }
    let (ma, mb) = (load(a)?.model, load(b)?.model);
    let d = game_distance(&ma, &mb, grid)?;
    Ok(Outcome {
        table: format!("distance({a}, {b}) on grid {grid} = {d}\n"),
        json: json!({
            "command": "distance",
            "model_a": a,
            "model_b": b,
            "report": { "distance": d, "grid_resolution": grid },
        }),
        status: Status::Ok,
        notes: Vec::new(),
    })
}

fn distribution(values: Option<&[f64]>, states: usize, flag: &str) -> Result<Distribution, Failure> {
    match values {
        None => Ok(Distribution::uniform(states)),
        Some(v) if v.len() != states => Err(input_error(format!("--{flag} needs {states} entries"))),
        Some(v) => Distribution::new(v.to_vec()).map_err(|e| input_error(format!("--{flag}: {e}"))),
    }
}

fn mc_check(
    source: &str,
    strategy: &[usize],
    m: Option<&[f64]>,
    x0: Option<&[f64]>,
    horizon: Option<f64>,
    paths: usize,
    seed: u64,
) -> Result<Outcome, Failure> {
    let loaded = load(source)?;
    let model = &loaded.model;
    let s = model.states();
    if strategy.len() != s {
        return Err(input_error(format!("--strategy needs {s} entries")));
    }
    let d = DeterministicStrategy::from_one_based(strategy)?;
    model.check_deterministic(&d)?;
    let m = distribution(m, s, "m")?;
    let x0 = distribution(x0, s, "x0")?;
    let exact = value_of_deterministic(model, &d, &m)?;
    let est = monte_carlo_value(
        model,
        &StationaryStrategy::from_deterministic(&d, model.actions()),
        &m,
        &x0,
        &McOptions {
            horizon,
            paths,
            seed,
            ..McOptions::default()
        },
    )?;
    let rows: Vec<serde_json::Value> = (0..s)
        .map(|i| {
            let v = exact.values()[i];
            let diff = (est.mean[i] - v).abs();
            json!({
                "state": i + 1,
                "linear_solve": v,
                "monte_carlo": est.mean[i],
                "std_error": est.std_error[i],
                "within_3se": diff <= 3.0 * est.std_error[i] + est.truncation_bound,
            })
        })
        .collect();
    let all_ok = rows.iter().all(|r| r["within_3se"] == json!(true));
    let x0_exact: f64 = (0..s).map(|i| x0[i] * exact.values()[i]).sum();
    Ok(Outcome {
        table: table::mc(source, &d, &rows, x0_exact, &est),
        json: json!({
            "command": "mc-check",
            "model": source,
            "strategy": d,
            "m": m,
            "x0": x0,
            "report": {
                "states": rows,
                "x0_linear_solve": x0_exact,
                "estimate": est,
                "all_within_3se": all_ok,
            },
        }),
        status: if all_ok { Status::Ok } else { Status::NotMet },
        notes: loaded.warnings,
    })
}

fn fixtures(name: Option<&str>) -> Result<Outcome, Failure> {
    match name {
        None => Ok(Outcome {
            table: FIXTURE_NAMES.iter().map(|n| format!("{n}\n")).collect(),
            json: json!({ "command": "fixtures", "report": { "fixtures": FIXTURE_NAMES } }),
            status: Status::Ok,
            notes: Vec::new(),
        }),
        Some(n) => {
            let model = fixture(n).ok_or_else(|| input_error(format!("unknown fixture {n}")))?;
            let doc: serde_json::Value = serde_json::from_slice(&save_model(&model)).expect("round trip");
            Ok(Outcome {
                table: String::from_utf8(save_model(&model)).expect("utf-8"),
                json: json!({ "command": "fixtures", "report": { "name": n, "model": doc } }),
                status: Status::Ok,
                notes: Vec::new(),
            })
        }
    }
}
