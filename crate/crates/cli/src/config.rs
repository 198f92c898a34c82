//! Model config files.
//!
//! A config is either a bare model spec such as
//! `{"kind": "toral_linear", "A": [[3, 2], [2, 2]]}` or an object with the spec
//! under `"model"`, which leaves room for comments in `"note"`.

use std::path::Path;

use thermo_core::{EndomorphismModel, IntMatrix2, ModelSpec};

use crate::error::CliError;

pub fn parse_model(text: &str, path: &Path) -> Result<EndomorphismModel, CliError> {
    let invalid = |schema_path: String, message: String| CliError::ConfigInvalid {
        path: path.to_path_buf(),
        schema_path,
        message,
    };
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| invalid(".".into(), e.to_string()))?;
    let (value, prefix) = match raw {
        serde_json::Value::Object(mut map) if map.contains_key("model") => {
            (map.remove("model").expect("checked key"), "model.")
        }
        other => (other, ""),
    };
    let spec: ModelSpec = serde_path_to_error::deserialize(&value).map_err(|e| {
        let at = match e.path().to_string() {
            p if p == "." => locate(&value).unwrap_or(p),
            p => p,
        };
        invalid(format!("{prefix}{at}"), e.into_inner().to_string())
    })?;
    EndomorphismModel::new(spec).map_err(|e| invalid(format!("{prefix}."), e.to_string()))
}

/// Field-level path of a spec error.
///
/// The tagged spec enum buffers its content, which hides the failing field; this
/// rechecks each field on its own.
fn locate(value: &serde_json::Value) -> Option<String> {
    fn check<T: serde::de::DeserializeOwned>(key: &str, v: &serde_json::Value) -> Option<String> {
        serde_path_to_error::deserialize::<_, T>(v).err().map(|e| match e.path().to_string() {
            p if p == "." => key.to_string(),
            p => format!("{key}{}", if p.starts_with('[') { p } else { format!(".{p}") }),
        })
    }
    let map = value.as_object()?;
    if !map.contains_key("kind") {
        return Some("kind".into());
    }
    map.iter().find_map(|(key, v)| match key.as_str() {
        "kind" => check::<String>(key, v),
        "A" => check::<IntMatrix2>(key, v),
        "c" | "eps" => check::<f64>(key, v),
        "k" => check::<u32>(key, v),
        _ => Some(key.clone()),
    })
}

pub fn load_model(path: &Path) -> Result<EndomorphismModel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_model(&text, path)
}
