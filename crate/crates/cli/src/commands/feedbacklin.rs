use liectl_core::catalog::siso_system;
use liectl_core::feedback_lin::{
    butterworth_beta, closed_loop_simulate, reference_output, relative_degree,
    synthesize_controller, verify_linearity,
};
use liectl_core::field::DiffConfig;
use liectl_core::signal::InputSignal;
use nalgebra::{dvector, DVector};
use serde::Deserialize;
use serde_json::json;

use super::{positive, Outcome};
use crate::artifacts::{num, numeric_csv, Meta};
use crate::failure::Failure;

fn default_system() -> String {
    "cubic".into()
}
fn default_t() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    1e-3
}
fn default_cutoff() -> f64 {
    1.0
}

/// Setpoint `v(t)`.
#[derive(Deserialize, Clone, Copy)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Setpoint {
    Constant { value: f64 },
    Sine { amplitude: f64, omega: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_system")]
    system: String,
    beta: Option<Vec<f64>>,
    #[serde(default = "default_cutoff")]
    cutoff: f64,
    x0: Option<Vec<f64>>,
    #[serde(rename = "T", default = "default_t")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    setpoint: Option<Setpoint>,
}

pub fn run(cfg: FeedbackConfig) -> Result<Outcome, Failure> {
    positive("T", cfg.horizon)?;
    positive("dt", cfg.dt)?;
    let sys = siso_system(&cfg.system)?;
    let n = sys.dim();
    let x0 = match &cfg.x0 {
        Some(v) if v.len() == n => DVector::from_column_slice(v),
        Some(v) => {
            return Err(Failure::config(format!(
                "x0 has {} entries, expected {n}",
                v.len()
            )))
        }
        None => {
            let mut x = DVector::zeros(n);
            x[0] = 1.0;
            x
        }
    };
    let diff = DiffConfig::default();
    let v = match cfg.setpoint.unwrap_or(Setpoint::Constant { value: 0.0 }) {
        Setpoint::Constant { value } => InputSignal::Constant(dvector![value]),
        Setpoint::Sine { amplitude, omega } => {
            InputSignal::function(1, move |t| dvector![amplitude * (omega * t).sin()])
        }
    };
    let beta = match cfg.beta {
        Some(b) => b,
        None => butterworth_beta(
            relative_degree(&sys, &x0, diff.depth_cap, &diff)?,
            cfg.cutoff,
        )?,
    };
    let ctrl = synthesize_controller(&sys, &beta, &x0, &diff)?;
    let traj = closed_loop_simulate(&ctrl, &v, &x0, cfg.horizon, cfg.dt)?;
    let report = verify_linearity(&traj, &beta, &v)?;
    let y_ref = reference_output(&traj, &beta, &v)?;
    let meta = Meta::new("feedbacklin", cfg.seed, Some(cfg.dt));
    let csv = numeric_csv(
        &meta.preamble(),
        &["t", "y", "y_ref", "u"],
        traj.times()
            .enumerate()
            .map(|(i, t)| vec![t, traj.outputs[i][0], y_ref[i], traj.inputs[i][0]]),
    );
    let body = json!({
        "system": cfg.system,
        "relative_degree": ctrl.r,
        "beta": beta,
        "max_deviation": num(report.max_deviation),
        "rms_deviation": num(report.rms_deviation),
    });
    Ok(Outcome::new(
        vec![
            meta.csv("feedbacklin.csv", csv),
            meta.json("feedbacklin_report.json", body.clone()),
        ],
        body,
    ))
}
