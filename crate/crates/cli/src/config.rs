//! JSON configs with dotted-path overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Sets `key` (dotted path) in `root`, creating intermediate objects. The
/// value is parsed as JSON and taken as a plain string when that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override `{assignment}` is not of the form key=value");
    };
    if key.is_empty() || key.split('.').any(str::is_empty) {
        bail!("override `{assignment}` has an empty key segment");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = cur else {
            bail!("override `{key}`: `{}` is not an object", parts[..i].join("."));
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        cur = map
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("loop returns on the last segment")
}

/// Reads `path` (or starts from `{}`), applies the overrides in order and
/// deserialises. Without overrides the text is parsed directly so serde
/// reports line and column.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
        None => "{}".to_string(),
    };
    let name = path.map_or("<defaults>".to_string(), |p| p.display().to_string());
    if overrides.is_empty() {
        return serde_json::from_str(&text).with_context(|| format!("config {name}"));
    }
    let mut v: Value = serde_json::from_str(&text).with_context(|| format!("config {name}"))?;
    for o in overrides {
        apply_override(&mut v, o)?;
    }
    serde_json::from_value(v).with_context(|| format!("config {name} after overrides {overrides:?}"))
}
