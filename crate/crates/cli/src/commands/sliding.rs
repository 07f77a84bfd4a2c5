use liectl_core::catalog::switching_system;
use liectl_core::ode::{default_band, integrate_variable_structure, IntegratorConfig};
use serde::Deserialize;
use serde_json::json;

use super::{positive, vec_json, Outcome};
use crate::artifacts::{num, Meta};
use crate::failure::Failure;

fn default_system() -> String {
    "relay".into()
}
fn default_t() -> f64 {
    2.0
}
fn default_dt() -> f64 {
    1e-3
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlidingConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_system")]
    system: String,
    x0: Option<Vec<f64>>,
    #[serde(rename = "T", default = "default_t")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    band: Option<f64>,
}

pub fn run(cfg: SlidingConfig) -> Result<Outcome, Failure> {
    positive("T", cfg.horizon)?;
    positive("dt", cfg.dt)?;
    let surface = switching_system(&cfg.system)?;
    let n = surface.s.dim();
    let x0 = match &cfg.x0 {
        Some(v) if v.len() == n => nalgebra::DVector::from_column_slice(v),
        Some(v) => {
            return Err(Failure::config(format!(
                "x0 has {} entries, expected {n}",
                v.len()
            )))
        }
        None => {
            let mut x = nalgebra::DVector::zeros(n);
            x[n - 1] = 1.0;
            x
        }
    };
    let band = match cfg.band {
        Some(b) => positive("band", b)?,
        None => default_band(&x0),
    };
    let traj = integrate_variable_structure(
        &surface,
        &x0,
        0.0,
        cfg.horizon,
        &IntegratorConfig::rk4(cfg.dt),
        band,
    )?;
    let inside: Vec<bool> = traj
        .states
        .iter()
        .map(|x| surface.s.eval(x).abs() < band)
        .collect();
    let reach = inside.iter().position(|&b| b);
    let remained = reach.is_some_and(|i| inside[i..].iter().all(|&b| b));
    let meta = Meta::new("sliding", cfg.seed, Some(cfg.dt));
    let body = json!({
        "system": cfg.system,
        "band": band,
        "reach_time": reach.map(|i| num(traj.time(i))),
        "remained_in_band": remained,
        "final_state": vec_json(traj.last_state()),
        "events": traj.events.iter().map(|e| json!({ "t": num(e.t), "kind": e.kind })).collect::<Vec<_>>(),
    });
    Ok(Outcome::new(
        vec![
            meta.json("sliding.json", body.clone()),
            meta.csv("sliding.csv", traj.to_csv(&meta.preamble())),
            meta.csv("sliding_events.csv", traj.events_csv(&meta.preamble())),
        ],
        body,
    ))
}
