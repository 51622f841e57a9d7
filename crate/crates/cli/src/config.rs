//! Flat key-value config files for `score`.
//!
//! Keys mirror the long flag names, e.g.
//!
//! ```toml
//! evaluator-endpoints = ["10.0.0.1:8000", "10.0.0.2:8000"]
//! verifier-endpoints = "10.0.0.3:8000"
//! workers = 16
//! w-hallu = 0.2
//! strict = true
//! ```

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use toml::{Table, Value};

pub const KNOWN_KEYS: &[&str] = &[
    "evaluator-endpoints",
    "verifier-endpoints",
    "strict",
    "workers",
    "w-acc",
    "w-think",
    "w-evid",
    "w-hallu",
    "hallu-gate-exclude",
    "allow-empty-evidence",
    "timeout-s",
    "retries",
    "max-in-flight",
    "failover",
];

#[derive(Debug, Default, Clone)]
pub struct FlatConfig {
    table: Table,
}

impl FlatConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&raw).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(raw: &str) -> anyhow::Result<Self> {
        let table: Table = raw.parse()?;
        for (k, v) in &table {
            if !KNOWN_KEYS.contains(&k.as_str()) {
                bail!("unknown key `{k}`");
            }
            if v.is_table() {
                bail!("key `{k}` must be a plain value, not a table");
            }
        }
        Ok(Self { table })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.table.get(key)
    }

    /// A list given either as an array of strings or a comma-separated string.
    pub fn list(&self, key: &str) -> anyhow::Result<Option<Vec<String>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(split_list(s))),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .map(str::to_owned)
                        .ok_or_else(|| anyhow!("`{key}` entries must be strings"))
                })
                .collect::<anyhow::Result<Vec<_>>>()
                .map(Some),
            Some(_) => bail!("`{key}` must be a string or an array of strings"),
        }
    }

    pub fn float(&self, key: &str) -> anyhow::Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => bail!("`{key}` must be a number"),
        }
    }

    pub fn uint(&self, key: &str) -> anyhow::Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => bail!("`{key}` must be a non-negative integer"),
        }
    }

    pub fn boolean(&self, key: &str) -> anyhow::Result<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => bail!("`{key}` must be true or false"),
        }
    }
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_owned)
        .collect()
}
