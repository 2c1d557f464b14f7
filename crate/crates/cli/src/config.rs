//! Merging of a config file with command-line flags.
//!
//! A config file is TOML (by `.toml` extension) or JSON. It may hold the keys
//! of one command directly, one table per command (`[train]`, `[eval]`, ...),
//! or be a run manifest, in which case its recorded config is replayed. Keys
//! use the long flag names with underscores. Flags win on conflict.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub const COMMANDS: [&str; 5] = ["synth", "train", "eval", "compare", "gradcheck"];

fn read_config(path: &Path, command: &str) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(CliError::Usage)?;
    let is_toml = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let value: Value = if is_toml {
        let t: toml::Table = toml::from_str(&text)
            .with_context(|| format!("cannot parse {}", path.display()))
            .map_err(CliError::Usage)?;
        serde_json::to_value(t).map_err(|e| CliError::Usage(e.into()))?
    } else {
        serde_json::from_str(&text)
            .with_context(|| format!("cannot parse {}", path.display()))
            .map_err(CliError::Usage)?
    };
    let Value::Object(mut top) = value else {
        return Err(CliError::Usage(anyhow!(
            "config {} is not a table",
            path.display()
        )));
    };

    // a run manifest
    if let (Some(Value::String(recorded)), Some(Value::Object(_))) = (top.get("command"), top.get("config")) {
        if recorded != command {
            return Err(CliError::Usage(anyhow!(
                "manifest {} records a '{recorded}' run, not '{command}'",
                path.display()
            )));
        }
        let Some(Value::Object(cfg)) = top.remove("config") else {
            unreachable!()
        };
        return Ok(cfg);
    }
    // one section per command
    if COMMANDS.iter().any(|c| top.get(*c).is_some_and(Value::is_object)) {
        return match top.remove(command) {
            Some(Value::Object(section)) => Ok(section),
            Some(_) => Err(CliError::Usage(anyhow!(
                "[{command}] in {} is not a table",
                path.display()
            ))),
            None => Ok(Map::new()),
        };
    }
    Ok(top)
}

/// Overlays the flags that were given on top of the config file and
/// deserializes the result. Any problem here is a usage error.
pub fn resolve<F: Serialize, R: DeserializeOwned>(
    command: &str,
    flags: &F,
    config: Option<&Path>,
) -> Result<R, CliError> {
    let mut merged = match config {
        Some(path) => read_config(path, command)?,
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.into()))? else {
        unreachable!("flag structs serialize to objects");
    };
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(anyhow!("invalid {command} configuration: {e}")))
}
