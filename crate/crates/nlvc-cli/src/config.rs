//! Flat sectioned run configuration: `key = value` lines under `[section]`
//! headers, `#`/`;` full-line comments. Parse errors carry line numbers;
//! strict mode rejects any key or section outside the schema. Every value a
//! run actually uses (defaults included) is recorded so the summary can echo
//! a config sufficient to reproduce the run.

use std::collections::BTreeMap;

use nlvc::{NlvcError, Result};

/// Known sections and keys. Unknown entries warn by default and fail in
/// strict mode.
pub const SCHEMA: &[(&str, &[&str])] = &[
    ("geometry", &["lo", "hi", "h", "mode", "margin"]),
    ("kernel", &["family", "delta", "beta"]),
    ("solver", &["tol", "maxiter", "preconditioner"]),
    (
        "decompose",
        &[
            "bc",
            "compat_tol",
            "allow_incompatible",
            "deflation_probes",
            "seed",
            "recon_tol",
            "orth_tol",
        ],
    ),
    ("input", &["kind", "field", "lift", "path", "mask"]),
    ("example32", &["h", "m"]),
    (
        "study",
        &["operator", "field", "deltas", "m", "expect_slope", "slope_tol", "expect_defect", "defect_tol"],
    ),
    ("moments", &["delta", "resolution", "tol_even", "tol_odd", "tol_homog"]),
    ("identities", &["seed"]),
    ("output", &["dir"]),
];

#[derive(Clone, Debug)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// Parsed config text: section -> key -> (value, line).
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    pub sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

pub fn parse_config(text: &str) -> Result<RawConfig> {
    let mut cfg = RawConfig::default();
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| {
                NlvcError::InvalidInput(format!(
                    "config line {lineno}: section header {line:?} is missing the closing `]`"
                ))
            })?;
            if !valid_name(name) {
                return Err(NlvcError::InvalidInput(format!(
                    "config line {lineno}: invalid section name {name:?} (use lowercase, digits, `_`)"
                )));
            }
            section = Some(name.to_string());
            cfg.sections.entry(name.to_string()).or_default();
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            NlvcError::InvalidInput(format!(
                "config line {lineno}: expected `key = value`, got {line:?}"
            ))
        })?;
        let key = key.trim();
        let value = value.trim();
        if !valid_name(key) {
            return Err(NlvcError::InvalidInput(format!(
                "config line {lineno}: invalid key {key:?} (use lowercase, digits, `_`)"
            )));
        }
        let section = section.as_ref().ok_or_else(|| {
            NlvcError::InvalidInput(format!(
                "config line {lineno}: key {key:?} appears before any [section] header"
            ))
        })?;
        let entries = cfg.sections.get_mut(section).expect("section registered");
        if let Some(prev) = entries.get(key) {
            return Err(NlvcError::InvalidInput(format!(
                "config line {lineno}: duplicate key `{section}.{key}` (first set on line {})",
                prev.line
            )));
        }
        entries.insert(key.to_string(), Entry { value: value.to_string(), line: lineno });
    }
    Ok(cfg)
}

/// Return `section.key` paths not covered by the schema. Callers reject them
/// in strict mode and warn otherwise.
pub fn unknown_paths(cfg: &RawConfig) -> Vec<String> {
    let mut out = Vec::new();
    for (section, entries) in &cfg.sections {
        match SCHEMA.iter().find(|(s, _)| s == section) {
            None => out.push(format!("[{section}]")),
            Some((_, keys)) => {
                for key in entries.keys() {
                    if !keys.contains(&key.as_str()) {
                        out.push(format!("{section}.{key}"));
                    }
                }
            }
        }
    }
    out
}

/// Typed accessor over a [`RawConfig`] that records every resolved value
/// (user-set or default) for the summary's config echo.
pub struct Resolver<'a> {
    raw: &'a RawConfig,
    echo: BTreeMap<String, BTreeMap<String, String>>,
}

impl<'a> Resolver<'a> {
    pub fn new(raw: &'a RawConfig) -> Resolver<'a> {
        Resolver { raw, echo: BTreeMap::new() }
    }

    /// The resolved-config echo accumulated so far.
    pub fn into_echo(self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.echo
    }

    fn record(&mut self, section: &str, key: &str, value: String) {
        self.echo.entry(section.to_string()).or_default().insert(key.to_string(), value);
    }

    fn entry(&self, section: &str, key: &str) -> Option<&'a Entry> {
        self.raw.sections.get(section).and_then(|s| s.get(key))
    }

    pub fn get_str(&mut self, section: &str, key: &str, default: &str) -> String {
        let v = self.entry(section, key).map(|e| e.value.clone()).unwrap_or_else(|| default.to_string());
        self.record(section, key, v.clone());
        v
    }

    pub fn get_opt_str(&mut self, section: &str, key: &str) -> Option<String> {
        let v = self.entry(section, key).map(|e| e.value.clone());
        if let Some(ref s) = v {
            self.record(section, key, s.clone());
        }
        v
    }

    pub fn require_str(&mut self, section: &str, key: &str) -> Result<String> {
        let e = self.entry(section, key).ok_or_else(|| {
            NlvcError::InvalidInput(format!("config: {section}.{key} is required"))
        })?;
        self.record(section, key, e.value.clone());
        Ok(e.value.clone())
    }

    fn parse_f64(section: &str, key: &str, e: &Entry) -> Result<f64> {
        e.value.parse::<f64>().map_err(|_| {
            NlvcError::InvalidInput(format!(
                "config line {}: {section}.{key}: expected a number, got {:?}",
                e.line, e.value
            ))
        })
    }

    pub fn require_f64(&mut self, section: &str, key: &str) -> Result<f64> {
        let e = self.entry(section, key).ok_or_else(|| {
            NlvcError::InvalidInput(format!("config: {section}.{key} is required"))
        })?;
        let v = Self::parse_f64(section, key, e)?;
        self.record(section, key, e.value.clone());
        Ok(v)
    }

    pub fn get_f64(&mut self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.entry(section, key) {
            Some(e) => {
                let v = Self::parse_f64(section, key, e)?;
                self.record(section, key, e.value.clone());
                Ok(v)
            }
            None => {
                self.record(section, key, format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn get_opt_f64(&mut self, section: &str, key: &str) -> Result<Option<f64>> {
        match self.entry(section, key) {
            Some(e) => {
                let v = Self::parse_f64(section, key, e)?;
                self.record(section, key, e.value.clone());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn get_usize(&mut self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.entry(section, key) {
            Some(e) => {
                let v = e.value.parse::<usize>().map_err(|_| {
                    NlvcError::InvalidInput(format!(
                        "config line {}: {section}.{key}: expected a non-negative integer, got {:?}",
                        e.line, e.value
                    ))
                })?;
                self.record(section, key, e.value.clone());
                Ok(v)
            }
            None => {
                self.record(section, key, format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn get_opt_usize(&mut self, section: &str, key: &str) -> Result<Option<usize>> {
        match self.entry(section, key) {
            Some(e) => {
                let v = e.value.parse::<usize>().map_err(|_| {
                    NlvcError::InvalidInput(format!(
                        "config line {}: {section}.{key}: expected a non-negative integer, got {:?}",
                        e.line, e.value
                    ))
                })?;
                self.record(section, key, e.value.clone());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    pub fn get_u64(&mut self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.entry(section, key) {
            Some(e) => {
                let v = e.value.parse::<u64>().map_err(|_| {
                    NlvcError::InvalidInput(format!(
                        "config line {}: {section}.{key}: expected a non-negative integer, got {:?}",
                        e.line, e.value
                    ))
                })?;
                self.record(section, key, e.value.clone());
                Ok(v)
            }
            None => {
                self.record(section, key, format!("{default}"));
                Ok(default)
            }
        }
    }

    pub fn get_bool(&mut self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.entry(section, key) {
            Some(e) => {
                let v = match e.value.as_str() {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(NlvcError::InvalidInput(format!(
                            "config line {}: {section}.{key}: expected true or false, got {other:?}",
                            e.line
                        )))
                    }
                };
                self.record(section, key, e.value.clone());
                Ok(v)
            }
            None => {
                self.record(section, key, format!("{default}"));
                Ok(default)
            }
        }
    }

    /// Whitespace-separated triple of numbers, e.g. `lo = 0 0 0`.
    pub fn get_triple(&mut self, section: &str, key: &str, default: [f64; 3]) -> Result<[f64; 3]> {
        match self.entry(section, key) {
            Some(e) => {
                let parts: Vec<&str> = e.value.split_whitespace().collect();
                let bad = || {
                    NlvcError::InvalidInput(format!(
                        "config line {}: {section}.{key}: expected three numbers, got {:?}",
                        e.line, e.value
                    ))
                };
                if parts.len() != 3 {
                    return Err(bad());
                }
                let mut out = [0.0; 3];
                for (slot, part) in out.iter_mut().zip(&parts) {
                    *slot = part.parse::<f64>().map_err(|_| bad())?;
                }
                self.record(section, key, e.value.clone());
                Ok(out)
            }
            None => {
                self.record(section, key, default.map(|v| format!("{v}")).join(" "));
                Ok(default)
            }
        }
    }

    /// Whitespace-separated list of numbers, e.g. `deltas = 0.4 0.2 0.1`.
    pub fn get_f64_list(&mut self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.entry(section, key) {
            Some(e) => {
                let mut out = Vec::new();
                for part in e.value.split_whitespace() {
                    out.push(part.parse::<f64>().map_err(|_| {
                        NlvcError::InvalidInput(format!(
                            "config line {}: {section}.{key}: expected numbers, got {:?}",
                            e.line, e.value
                        ))
                    })?);
                }
                if out.is_empty() {
                    return Err(NlvcError::InvalidInput(format!(
                        "config line {}: {section}.{key}: expected at least one number",
                        e.line
                    )));
                }
                self.record(section, key, e.value.clone());
                Ok(out)
            }
            None => {
                self.record(
                    section,
                    key,
                    default.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" "),
                );
                Ok(default.to_vec())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_keys_and_comments() {
        let cfg = parse_config(
            "# run\n[geometry]\nh = 0.125\nlo = 0 0 0\n; note\n[kernel]\nfamily = planar_scaled\n",
        )
        .unwrap();
        assert_eq!(cfg.sections["geometry"]["h"].value, "0.125");
        assert_eq!(cfg.sections["geometry"]["lo"].line, 4);
        assert_eq!(cfg.sections["kernel"]["family"].value, "planar_scaled");
    }

    #[test]
    fn rejects_malformed_lines_with_line_context() {
        let err = parse_config("[geometry]\nh 0.125\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = parse_config("h = 1\n").unwrap_err().to_string();
        assert!(err.contains("before any [section]"), "{err}");
        let err = parse_config("[geometry\nh = 1\n").unwrap_err().to_string();
        assert!(err.contains("closing"), "{err}");
        let err = parse_config("[geometry]\nh = 1\nh = 2\n").unwrap_err().to_string();
        assert!(err.contains("duplicate key `geometry.h`") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn flags_unknown_sections_and_keys() {
        let cfg = parse_config("[geometry]\nhh = 1\n[mystery]\nx = 2\n").unwrap();
        let unknown = unknown_paths(&cfg);
        assert_eq!(unknown, vec!["geometry.hh".to_string(), "[mystery]".to_string()]);
    }

    #[test]
    fn resolver_records_defaults_and_user_values() {
        let cfg = parse_config("[kernel]\ndelta = 0.5\n").unwrap();
        let mut r = Resolver::new(&cfg);
        assert_eq!(r.require_f64("kernel", "delta").unwrap(), 0.5);
        assert_eq!(r.get_str("kernel", "family", "peridynamic_unit"), "peridynamic_unit");
        let echo = r.into_echo();
        assert_eq!(echo["kernel"]["delta"], "0.5");
        assert_eq!(echo["kernel"]["family"], "peridynamic_unit");
    }

    #[test]
    fn resolver_reports_missing_and_mistyped_fields_by_path() {
        let cfg = parse_config("[kernel]\ndelta = fast\n").unwrap();
        let mut r = Resolver::new(&cfg);
        let err = r.require_f64("kernel", "delta").unwrap_err().to_string();
        assert!(err.contains("kernel.delta") && err.contains("line 2"), "{err}");
        let cfg = parse_config("[geometry]\n").unwrap();
        let mut r = Resolver::new(&cfg);
        let err = r.require_f64("kernel", "delta").unwrap_err().to_string();
        assert!(err.contains("kernel.delta is required"), "{err}");
    }
}
