use std::f64::consts::TAU;

use liectl_core::describing::{harmonic_balance_solve, vdp_simulate_amplitude, QuasiLinearLoop};
use nalgebra::DVector;
use serde::Deserialize;
use serde_json::json;

use super::{positive, Outcome};
use crate::artifacts::{num, numeric_csv, Meta};
use crate::failure::Failure;

fn default_alpha() -> f64 {
    1.0
}
fn default_t() -> f64 {
    200.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_x0() -> Vec<f64> {
    vec![0.5, 0.0]
}
fn default_guess() -> [f64; 2] {
    [1.5, 0.8]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VdpConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(rename = "T", default = "default_t")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_x0")]
    x0: Vec<f64>,
    /// Initial `(A, ω)` for the harmonic-balance solver.
    #[serde(default = "default_guess")]
    guess: [f64; 2],
}

pub fn run(cfg: VdpConfig) -> Result<Outcome, Failure> {
    positive("alpha", cfg.alpha)?;
    positive("T", cfg.horizon)?;
    positive("dt", cfg.dt)?;
    if cfg.x0.len() != 2 {
        return Err(Failure::config("x0 must have two entries"));
    }
    let meta = Meta::new("vdp", cfg.seed, Some(cfg.dt));
    let pred = harmonic_balance_solve(
        &QuasiLinearLoop::van_der_pol(cfg.alpha),
        cfg.guess[0],
        cfg.guess[1],
    )?;
    let (meas, traj) = vdp_simulate_amplitude(
        cfg.alpha,
        &DVector::from_vec(cfg.x0.clone()),
        cfg.horizon,
        cfg.dt,
    )?;
    let predicted_period = TAU / pred.omega;
    let body = json!({
        "alpha": cfg.alpha,
        "prediction": { "A": num(pred.amplitude), "omega": num(pred.omega), "residual": num(pred.residual) },
        "simulation": {
            "amplitude": num(meas.amplitude),
            "period": num(meas.period),
            "amplitude_error": num((meas.amplitude - pred.amplitude).abs() / pred.amplitude),
            "period_error": num((meas.period - predicted_period).abs() / predicted_period),
        },
    });
    let tracer = numeric_csv(
        &meta.preamble(),
        &["t", "x", "xdot"],
        traj.times()
            .zip(&traj.states)
            .map(|(t, z)| vec![t, z[0], z[1]]),
    );
    Ok(Outcome::new(
        vec![
            meta.json("vdp_prediction.json", body.clone()),
            meta.csv("vdp_trajectory.csv", traj.to_csv(&meta.preamble())),
            meta.csv("vdp_tracer.csv", tracer),
        ],
        body,
    ))
}
