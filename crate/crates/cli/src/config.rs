//! JSON run documents with command-line overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::failure::Failure;

/// Flag values that replace document fields of the same name.
#[derive(Default)]
pub struct Overrides(Map<String, Value>);

impl Overrides {
    pub fn set<T: Into<Value>>(&mut self, key: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.into());
        }
        self
    }

    pub fn set_list(&mut self, key: &str, v: Option<Vec<f64>>) -> &mut Self {
        self.set(
            key,
            v.map(|xs| Value::Array(xs.into_iter().map(Value::from).collect())),
        )
    }
}

fn read_document(path: Option<&Path>) -> Result<Map<String, Value>, Failure> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(Failure::config(format!(
            "{}: config must be a JSON object",
            path.display()
        ))),
        Err(e) => Err(Failure::config(format!(
            "{}: malformed JSON: {e}",
            path.display()
        ))),
    }
}

/// Merge `overrides` onto the document at `path` and deserialize.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, overrides: Overrides) -> Result<T, Failure> {
    let mut doc = read_document(path)?;
    doc.remove("meta");
    doc.extend(overrides.0);
    serde_json::from_value(Value::Object(doc))
        .map_err(|e| Failure::config(format!("invalid config: {e}")))
}

/// Read a JSON file verbatim (model documents and similar).
pub fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}
