//! Machine-readable run summaries. Every run writes `summary.json` with the
//! resolved config echo, per-check pass/fail with measured values, free-form
//! metrics, and the artifact list. Serialization is deterministic: maps are
//! sorted, no timestamps, and floats are emitted as fixed-width scientific
//! literals with 17 significant digits (exact round-trip).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nlvc::Result;
use serde_json::{Map, Value};

/// One named tolerance check with its measured value.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// Pass when |value| <= tol.
    pub fn bound(name: impl Into<String>, value: f64, tol: f64) -> Check {
        Check { name: name.into(), value, tol, pass: value.abs() <= tol }
    }

    /// Pass when |value - target| <= tol; the measured value is recorded.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Check {
        Check { name: name.into(), value, tol, pass: (value - target).abs() <= tol }
    }

    /// Pass/fail decided by the caller (monotonicity, convergence flags).
    pub fn flag(name: impl Into<String>, value: f64, pass: bool) -> Check {
        Check { name: name.into(), value, tol: 0.0, pass }
    }
}

/// Everything a command hands back for reporting.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, Value>,
    pub artifacts: Vec<String>,
    pub resolved: BTreeMap<String, BTreeMap<String, String>>,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), num(value));
    }
}

/// A float as a JSON number literal with 17 significant digits. NaN and
/// infinities have no JSON representation and map to null.
pub fn num(v: f64) -> Value {
    serde_json::from_str::<serde_json::Number>(&format!("{v:.16e}"))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

fn config_value(resolved: &BTreeMap<String, BTreeMap<String, String>>) -> Value {
    let mut sections = Map::new();
    for (section, entries) in resolved {
        let mut keys = Map::new();
        for (key, value) in entries {
            keys.insert(key.clone(), Value::String(value.clone()));
        }
        sections.insert(section.clone(), Value::Object(keys));
    }
    Value::Object(sections)
}

fn summary_value(command: &str, status: &str, outcome: &Outcome, error: Option<&str>) -> Value {
    let mut root = Map::new();
    root.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    root.insert("command".into(), Value::String(command.into()));
    root.insert("status".into(), Value::String(status.into()));
    if let Some(msg) = error {
        root.insert("error".into(), Value::String(msg.into()));
    }
    root.insert("config".into(), config_value(&outcome.resolved));
    let checks: Vec<Value> = outcome
        .checks
        .iter()
        .map(|c| {
            let mut m = Map::new();
            m.insert("name".into(), Value::String(c.name.clone()));
            m.insert("value".into(), num(c.value));
            m.insert("tol".into(), num(c.tol));
            m.insert("pass".into(), Value::Bool(c.pass));
            Value::Object(m)
        })
        .collect();
    root.insert("checks".into(), Value::Array(checks));
    root.insert("metrics".into(), Value::Object(outcome.metrics.clone().into_iter().collect()));
    root.insert(
        "artifacts".into(),
        Value::Array(outcome.artifacts.iter().map(|a| Value::String(a.clone())).collect()),
    );
    Value::Object(root)
}

/// Write `summary.json` into the output directory and return its path.
pub fn write_summary(out_dir: &Path, command: &str, outcome: &Outcome) -> Result<PathBuf> {
    let status = if outcome.all_passed() { "pass" } else { "tolerance_failure" };
    let value = summary_value(command, status, outcome, None);
    let path = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&value).expect("static structure serializes");
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// Best-effort error summary so failed runs still leave a machine-readable
/// trace; I/O problems here are swallowed (the exit code already says 1).
pub fn write_error_summary(out_dir: &Path, command: &str, message: &str) {
    let outcome = Outcome::default();
    let value = summary_value(command, "error", &outcome, Some(message));
    if let Ok(mut text) = serde_json::to_string_pretty(&value) {
        text.push('\n');
        let _ = std::fs::create_dir_all(out_dir);
        let _ = std::fs::write(out_dir.join("summary.json"), text);
    }
}
