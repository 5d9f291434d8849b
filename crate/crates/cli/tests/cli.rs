use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mfg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfg"))
        .args(args)
        .env_remove("MFG_THREADS")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut full = vec!["--format", "json"];
    full.extend_from_slice(args);
    let o = mfg(&full);
    let v = serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("{args:?}: invalid JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)));
    (v, o.status.code().unwrap())
}

fn schema(name: &str) -> Value {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let validator = jsonschema::validator_for(&schema(name)).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name} report violates its schema: {errors:?}");
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn every_report_matches_its_schema() {
    let cases: [(&str, Vec<&str>); 10] = [
        ("validate", vec!["validate", "REF-1A"]),
        ("equilibria", vec!["equilibria", "REF-IND"]),
        ("equilibria", vec!["equilibria", "REF-KNIFE"]),
        ("essential", vec!["essential", "REF-1A", "--probe", "--samples", "3"]),
        ("essential", vec!["essential", "REF-KNIFE"]),
        ("probe", vec!["probe", "REF-DOM", "--samples", "3"]),
        ("ensemble", vec!["ensemble", "--count", "3", "--samples", "2", "--inject", "REF-KNIFE"]),
        ("distance", vec!["distance", "REF-DOM", "REF-KNIFE"]),
        ("mc-check", vec!["mc-check", "REF-2x2", "--strategy", "1,1", "--paths", "2000"]),
        ("fixtures", vec!["fixtures", "REF-2x2"]),
    ];
    for (name, args) in cases {
        let (doc, _) = json(&args);
        assert_eq!(doc["command"], name);
        assert_valid(name, &doc);
    }
    let (list, code) = json(&["fixtures"]);
    assert_eq!(code, 0);
    assert_valid("fixtures", &list);
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mfg(&["validate", "REF-1A"]).status.code(), Some(0));
    let negative = write(
        dir.path(),
        "neg.json",
        r#"{"states": 2, "actions": 1, "beta": 0.5,
            "rates": [{"from": 1, "to": 2, "action": 1, "poly": [{"exp": [0, 0], "coef": -0.5}]},
                      {"from": 2, "to": 1, "action": 1, "poly": [{"exp": [0, 0], "coef": 1.0}]}],
            "rewards": []}"#,
    );
    let (doc, code) = json(&["validate", &negative]);
    assert_eq!(code, 1, "{doc}");
    assert_eq!(doc["report"]["passed"], false);
    let malformed = write(dir.path(), "bad.json", "{ states: 2");
    let o = mfg(&["validate", &malformed]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(mfg(&["validate", "no-such-model"]).status.code(), Some(2));
}

#[test]
fn equilibria_counts_and_codes() {
    let (doc, code) = json(&["equilibria", "REF-1A"]);
    assert_eq!(code, 0);
    let items = doc["report"]["items"].as_array().unwrap();
    assert_eq!(items.len(), 1);
    let m1 = items[0]["m"][0].as_f64().unwrap();
    assert!((m1 - 2.0 / 3.0).abs() < 1e-8);

    let (doc, _) = json(&["equilibria", "REF-DOM"]);
    assert!(doc["report"]["items"].as_array().unwrap().iter().all(|e| e["kind"] == "deterministic"));

    let o = mfg(&["--format", "json", "equilibria", "REF-IND"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["continuum"], true);
    assert!(String::from_utf8_lossy(&o.stderr).contains("continuum"));

    let o = mfg(&["equilibria", "REF-DOM", "--cap", "2"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn essential_verdicts() {
    let (doc, code) = json(&["essential", "REF-1A"]);
    assert_eq!(code, 0);
    assert_eq!(doc["report"]["reports"][0]["unique_criterion"]["verdict"], "certified");

    let (doc, code) = json(&["essential", "REF-DOM"]);
    assert_eq!(code, 0);
    let c = &doc["report"]["reports"][0]["characterization_criterion"];
    assert_eq!(c["verdict"], "certified");
    assert!(c["radius"].as_f64().unwrap() > 0.0);
    let table = String::from_utf8(mfg(&["essential", "REF-DOM"]).stdout).unwrap();
    assert!(table.contains("e-3"), "radius printed in the table: {table}");

    let (doc, code) = json(&["essential", "REF-KNIFE"]);
    assert_eq!(code, 1);
    assert_eq!(doc["all_certified"], false);
}

#[test]
fn probe_selector_and_argument_checks() {
    let (doc, code) = json(&["probe", "REF-KNIFE", "--equilibrium", "2", "--samples", "3"]);
    assert_eq!(code, 0);
    assert_eq!(doc["equilibrium"]["kind"], "mixed");
    assert_eq!(mfg(&["probe", "REF-KNIFE", "--equilibrium", "5"]).status.code(), Some(2));
    assert_eq!(mfg(&["probe", "REF-1A", "--deltas", "0.01,0.1"]).status.code(), Some(2));
    assert_eq!(mfg(&["probe", "REF-1A", "--deltas", "-1"]).status.code(), Some(2));
}

#[test]
fn ensemble_family_file() {
    let dir = tempfile::tempdir().unwrap();
    let family = write(
        dir.path(),
        "family.json",
        r#"{"states": [2, 2], "actions": [1, 2], "beta": [0.4, 0.6],
            "rate_constant": [0.5, 1.5], "rate_slope": [-0.3, 0.3],
            "reward_constant": [-1, 1], "reward_slope": [-0.5, 0.5]}"#,
    );
    let (doc, code) = json(&["ensemble", &family, "--count", "3", "--samples", "2", "--deltas", "0.1,0.01"]);
    assert_eq!(code, 0);
    assert_eq!(doc["report"]["games"].as_array().unwrap().len(), 3);
    let unknown = write(dir.path(), "unknown.json", r#"{"states": [2, 2], "colour": 1}"#);
    assert_eq!(mfg(&["ensemble", &unknown]).status.code(), Some(2));
}

#[test]
fn distance_of_a_model_to_itself_is_zero() {
    let (doc, code) = json(&["distance", "REF-DOM", "REF-DOM"]);
    assert_eq!(code, 0);
    assert_eq!(doc["report"]["distance"], 0.0);
    assert_eq!(mfg(&["distance", "REF-1A", "REF-DOM"]).status.code(), Some(2));
}

#[test]
fn mc_check_agrees_with_linear_solve() {
    let (doc, code) = json(&["mc-check", "REF-1A", "--strategy", "1,1", "--paths", "50000", "--m", "0.5,0.5"]);
    assert_eq!(code, 0);
    assert_eq!(doc["report"]["all_within_3se"], true);
    assert_eq!(mfg(&["mc-check", "REF-1A", "--strategy", "1"]).status.code(), Some(2));
    assert_eq!(mfg(&["mc-check", "REF-1A", "--strategy", "1,3"]).status.code(), Some(2));
}

#[test]
fn fixture_documents_load_back() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["REF-1A", "REF-DOM", "REF-IND", "REF-KNIFE", "REF-2x2"] {
        let o = mfg(&["fixtures", name]);
        assert_eq!(o.status.code(), Some(0));
        let path = write(dir.path(), &format!("{name}.json"), &String::from_utf8(o.stdout).unwrap());
        let (doc, code) = json(&["distance", &path, name]);
        assert_eq!(code, 0);
        assert_eq!(doc["report"]["distance"], 0.0);
    }
}

#[test]
fn out_file_matches_json_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = mfg(&["--format", "json", "--out", out.to_str().unwrap(), "equilibria", "REF-2x2"]);
    assert_eq!(std::fs::read(&out).unwrap(), o.stdout);
}

#[test]
fn bad_thread_setting_is_an_input_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_mfg"))
        .args(["fixtures"])
        .env("MFG_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
