use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::system::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    LinkSim,
    SystemSim,
    Sweep,
    ComparePrototype,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::LinkSim => "link-sim",
            Command::SystemSim => "system-sim",
            Command::Sweep => "sweep",
            Command::ComparePrototype => "compare-prototype",
        }
    }

    pub fn needs_seed(self) -> bool {
        self != Command::ComparePrototype
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub scenario_path: PathBuf,
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// `key=value` pairs with dotted keys into the scenario document.
    pub overrides: Vec<String>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.command.needs_seed() && self.seed.is_none() {
            return Err(Error::invalid("--seed", format!("required for {}", self.command.as_str())));
        }
        for o in &self.overrides {
            split_override(o)?;
        }
        Ok(())
    }
}

fn split_override(s: &str) -> Result<(&str, &str)> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim(), v.trim())),
        _ => Err(Error::invalid("--set", format!("`{s}` is not key=value"))),
    }
}

/// Dotted path segments; `a[2].b` and `a.2.b` are equivalent.
fn key_segments(key: &str) -> Vec<String> {
    key.replace('[', ".")
        .replace(']', "")
        .split('.')
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// A value is parsed as JSON when possible, else taken as a string.
fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

fn set_path(node: &mut Value, segs: &[String], value: &Value, key: &str) -> Result<()> {
    let Some((head, rest)) = segs.split_first() else {
        *node = value.clone();
        return Ok(());
    };
    let unknown = || Error::invalid(key, "unknown override key");
    match node {
        Value::Object(map) => {
            let child = map.get_mut(head.as_str()).ok_or_else(unknown)?;
            set_path(child, rest, value, key)
        }
        Value::Array(items) if head == "*" => {
            for item in items.iter_mut() {
                set_path(item, rest, value, key)?;
            }
            Ok(())
        }
        Value::Array(items) => {
            let i: usize = head.parse().map_err(|_| unknown())?;
            let child = items.get_mut(i).ok_or_else(unknown)?;
            set_path(child, rest, value, key)
        }
        _ => Err(unknown()),
    }
}

fn from_value(v: Value) -> Result<Scenario> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        Error::invalid(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })
}

/// Apply `key=value` overrides to a fully resolved scenario. Keys must name
/// a field that exists once defaults are filled in.
pub fn apply_overrides(scenario: &Scenario, overrides: &[String]) -> Result<Scenario> {
    if overrides.is_empty() {
        return Ok(scenario.clone());
    }
    let mut doc = serde_json::to_value(scenario)?;
    for o in overrides {
        let (k, v) = split_override(o)?;
        set_path(&mut doc, &key_segments(k), &parse_value(v), k)?;
    }
    let s = from_value(doc)?;
    s.validate()?;
    Ok(s)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut de = serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::invalid(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

pub fn load_scenario_with_overrides(path: &Path, overrides: &[String]) -> Result<Scenario> {
    apply_overrides(&load_scenario(path)?, overrides)
}

pub fn scenario_to_json(s: &Scenario) -> Result<String> {
    let mut text = serde_json::to_string_pretty(s)?;
    text.push('\n');
    Ok(text)
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, scenario_to_json(s)?).map_err(|e| Error::io(path, e))
}

/// Thread cap from `FDIAB_THREADS`; `None` leaves the rayon default.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("FDIAB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::invalid("FDIAB_THREADS", format!("`{v}` is not a positive integer"))),
        },
    }
}
