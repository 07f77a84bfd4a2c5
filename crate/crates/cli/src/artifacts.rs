//! Output files: CSV with a one-line metadata header, JSON with a `meta` object.

use std::path::Path;

use serde_json::{json, Value};

use crate::failure::Failure;

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Run identity stamped on every artifact.
#[derive(Debug, Clone)]
pub struct Meta {
    pub subcommand: &'static str,
    pub seed: u64,
    pub dt: Option<f64>,
}

impl Meta {
    pub fn new(subcommand: &'static str, seed: u64, dt: Option<f64>) -> Self {
        Meta {
            subcommand,
            seed,
            dt,
        }
    }

    fn dt_text(&self) -> String {
        self.dt
            .map_or_else(|| "none".to_string(), |d| d.to_string())
    }

    /// `# liectl <subcommand> seed=<s> dt=<dt>`.
    pub fn header(&self) -> String {
        format!(
            "# liectl {} seed={} dt={}",
            self.subcommand,
            self.seed,
            self.dt_text()
        )
    }

    pub fn preamble(&self) -> Vec<String> {
        vec![self.header()]
    }

    pub fn csv(&self, name: &str, body: String) -> Artifact {
        Artifact {
            name: name.to_string(),
            contents: body,
        }
    }

    /// `body` must be a JSON object; a `meta` field is added.
    pub fn json(&self, name: &str, mut body: Value) -> Artifact {
        if let Value::Object(m) = &mut body {
            m.insert(
                "meta".into(),
                json!({ "tool": "liectl", "subcommand": self.subcommand, "seed": self.seed, "dt": self.dt }),
            );
        }
        let mut contents = serde_json::to_string_pretty(&body).expect("JSON value serializes");
        contents.push('\n');
        Artifact {
            name: name.to_string(),
            contents,
        }
    }
}

/// Finite numbers as JSON numbers, everything else as `null`.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents)
            .map_err(|e| Failure::config(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// Build a CSV from a header line and rows of numbers.
pub fn numeric_csv(
    preamble: &[String],
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> String {
    let mut out = String::new();
    for line in preamble {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .map(|&v| liectl_core::trajectory::fmt_num(v))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
