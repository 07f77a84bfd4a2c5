pub mod adaptive;
pub mod bracket;
pub mod feedbacklin;
pub mod langevin;
pub mod linear;
pub mod operator;
pub mod sliding;
pub mod vdp;

use nalgebra::DVector;
use serde_json::Value;

use crate::artifacts::Artifact;
use crate::failure::Failure;

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    /// Printed to stdout.
    pub summary: Value,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn new(artifacts: Vec<Artifact>, summary: Value) -> Self {
        Outcome {
            artifacts,
            summary,
            warnings: Vec::new(),
        }
    }
}

pub fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::config(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// `v` as a state of dimension `n`, or zeros when absent.
pub fn state_or_zero(name: &str, v: &Option<Vec<f64>>, n: usize) -> Result<DVector<f64>, Failure> {
    match v {
        None => Ok(DVector::zeros(n)),
        Some(xs) if xs.len() == n => Ok(DVector::from_column_slice(xs)),
        Some(xs) => Err(Failure::config(format!(
            "{name} has {} entries, expected {n}",
            xs.len()
        ))),
    }
}

pub fn vec_json(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&x| crate::artifacts::num(x)).collect())
}
