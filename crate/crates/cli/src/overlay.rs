//! TOML config files whose sections override values set by flags.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use toml::{Table, Value};

const SECTIONS: [&str; 5] = ["fit", "weights", "roles", "simulate", "interval"];

#[derive(Debug, Default)]
pub struct ConfigFile {
    table: Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let table: Table = text
            .parse()
            .with_context(|| format!("parsing config {}", path.display()))?;
        for key in table.keys() {
            if !SECTIONS.contains(&key.as_str()) {
                bail!("unknown config section `{key}` (expected one of {SECTIONS:?})");
            }
        }
        Ok(ConfigFile { table })
    }

    /// Returns `base` with every key of section `name` written over it.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, name: &str, base: T) -> Result<T> {
        let Some(patch) = self.table.get(name) else {
            return Ok(base);
        };
        let Value::Table(patch) = patch else {
            bail!("config section `{name}` must be a table");
        };
        let mut merged = Table::try_from(&base).context("serializing flag values")?;
        merge(&mut merged, patch);
        Value::Table(merged)
            .try_into()
            .with_context(|| format!("config section `{name}`"))
    }
}

fn merge(into: &mut Table, patch: &Table) {
    for (k, v) in patch {
        match (into.get_mut(k), v) {
            (Some(Value::Table(a)), Value::Table(b)) => merge(a, b),
            _ => {
                into.insert(k.clone(), v.clone());
            }
        }
    }
}
