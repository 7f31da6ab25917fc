use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use hamdesign::Error;

/// Flags over config-file values. Both sides share one type whose fields
/// are all optional; a flag that was not given serializes to `null` and
/// leaves the config value in place.
pub fn layered<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Value>) -> Result<T> {
    let mut merged = match config {
        Some(v) => {
            let parsed: T = serde_json::from_value(v.clone())
                .map_err(|e| Error::Config(format!("config file: {e}")))?;
            serde_json::to_value(parsed)?
        }
        None => serde_json::to_value(flags)?,
    };
    if let (Some(dst), Value::Object(src)) = (merged.as_object_mut(), serde_json::to_value(flags)?) {
        for (k, v) in src {
            if !v.is_null() {
                dst.insert(k, v);
            }
        }
    }
    Ok(serde_json::from_value(merged).context("merging flags with config")?)
}

pub fn read_config(path: &std::path::Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).map_err(Error::from)?;
    if !v.is_object() {
        return Err(Error::Config("config file must hold a JSON object".into()).into());
    }
    Ok(v)
}
