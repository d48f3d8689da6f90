//! Experiment files: a `[sim]` table holding the full simulator config and an
//! `[experiment]` table for run-level choices. Every field has a default, so
//! an empty file is a valid config.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use urllc_core::{Policy, SimConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSource {
    pub sigma: f64,
    pub xi: f64,
    pub samples: usize,
    pub learners: usize,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        SyntheticSource {
            sigma: 50.0,
            xi: 0.3,
            samples: 5000,
            learners: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    /// Empty means the single policy in `sim.control.policy`.
    pub policies: Vec<Policy>,
    /// Empty means the single seed in `sim.seed`.
    pub seeds: Vec<u64>,
    /// Rounds used by `compare-fl` for both estimators.
    pub compare_rounds: usize,
    pub ccdf_points: usize,
    pub synthetic: SyntheticSource,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            policies: Vec::new(),
            seeds: Vec::new(),
            compare_rounds: 50,
            ccdf_points: 20,
            synthetic: SyntheticSource::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub sim: SimConfig,
    pub experiment: Experiment,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(message) => CliError::ConfigParse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.sim.validate()?;
        let syn = &self.experiment.synthetic;
        if !(syn.sigma > 0.0 && syn.xi < 1.0) {
            return Err(CliError::Config(
                "experiment.synthetic: need sigma > 0 and xi < 1".into(),
            ));
        }
        if syn.samples == 0 || syn.learners == 0 {
            return Err(CliError::Config(
                "experiment.synthetic: samples and learners must be positive".into(),
            ));
        }
        if self.experiment.compare_rounds == 0 {
            return Err(CliError::Config(
                "experiment.compare_rounds: must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Applies `key=value` assignments. Keys are dotted paths; a leading
    /// `sim.` may be omitted. Values are TOML literals, with bare words taken
    /// as strings.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> CliResult<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut tree = self.to_value()?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{raw}` is not key=value")))?;
            set_path(&mut tree, key.trim(), parse_literal(value.trim()))?;
        }
        tree.try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    fn to_value(&self) -> CliResult<Value> {
        Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// All settable dotted keys, sorted.
    pub fn keys() -> Vec<String> {
        let mut out = Vec::new();
        if let Ok(Value::Table(t)) = Value::try_from(ConfigFile::default()) {
            collect_keys(&t, "", &mut out);
        }
        out.sort();
        out
    }
}

/// Resolves a user-facing key to its full dotted path.
pub fn canonical_key(key: &str) -> CliResult<String> {
    let keys = ConfigFile::keys();
    for candidate in [key.to_string(), format!("sim.{key}")] {
        if keys.contains(&candidate) {
            return Ok(candidate);
        }
    }
    Err(CliError::Config(format!(
        "unknown parameter `{key}`; valid names: {}",
        keys.join(", ")
    )))
}

fn collect_keys(table: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(inner) => collect_keys(inner, &path, out),
            _ => out.push(path),
        }
    }
}

fn parse_literal(text: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {text}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let full = canonical_key(key)?;
    let mut node = tree;
    let mut parts = full.split('.').peekable();
    while let Some(part) = parts.next() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{full}` is not a table path")))?;
        if parts.peek().is_none() {
            let slot = table
                .get_mut(part)
                .ok_or_else(|| CliError::Config(format!("unknown parameter `{full}`")))?;
            *slot = coerce(slot, value);
            return Ok(());
        }
        node = table
            .get_mut(part)
            .ok_or_else(|| CliError::Config(format!("unknown parameter `{full}`")))?;
    }
    Ok(())
}

/// Integers written where a float is expected are accepted, and a single
/// value written where a list is expected becomes a one-element list.
fn coerce(existing: &Value, value: Value) -> Value {
    match (existing, value) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Array(_), v @ Value::Array(_)) => v,
        (Value::Array(_), v) => Value::Array(vec![v]),
        (_, v) => v,
    }
}
