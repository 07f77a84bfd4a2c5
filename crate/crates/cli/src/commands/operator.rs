use liectl_core::operator::{
    classify_step_response, cost_functional, crossover_frequency_response, crossover_margin,
    simulate_tracking, tracking_error, CostWeights, CrossoverParams, Forcing, Plant, ResponseClass,
    TrackingMode, TrackingTask,
};
use liectl_core::Error;
use serde::Deserialize;
use serde_json::json;

use super::Outcome;
use crate::artifacts::{num, numeric_csv, Meta};
use crate::failure::{Failure, EXIT_NUMERIC};

fn default_forcing() -> Forcing {
    Forcing::Step { amplitude: 1.0 }
}
fn default_t() -> f64 {
    20.0
}
fn default_dt() -> f64 {
    0.01
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default)]
    seed: u64,
    #[serde(rename = "K")]
    k: f64,
    #[serde(default)]
    tau: f64,
    #[serde(default)]
    mode: TrackingMode,
    #[serde(default = "default_forcing")]
    forcing: Forcing,
    #[serde(default)]
    plant: Plant,
    #[serde(rename = "T", default = "default_t")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    omegas: Option<Vec<f64>>,
    weights: Option<CostWeights>,
}

pub fn run(cfg: OperatorConfig) -> Result<Outcome, Failure> {
    let op = CrossoverParams::new(cfg.k, cfg.tau)?;
    let task = TrackingTask {
        mode: cfg.mode,
        forcing: cfg.forcing,
        plant: cfg.plant,
        duration: cfg.horizon,
        dt: cfg.dt,
    };
    let meta = Meta::new("operator", cfg.seed, Some(cfg.dt));

    let margin = crossover_margin(&op)?;
    let omegas = cfg.omegas.unwrap_or_else(|| {
        (0..=80)
            .map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 80.0))
            .collect()
    });
    let bode = crossover_frequency_response(&op, &omegas)?;
    let bode_csv = numeric_csv(
        &meta.preamble(),
        &["omega", "re", "im", "magnitude", "phase"],
        bode.iter()
            .map(|p| vec![p.omega, p.value.re, p.value.im, p.magnitude, p.phase]),
    );
    let margin_body = json!({
        "K": op.k,
        "tau": op.tau,
        "omega_c": num(margin.omega_c),
        "phase_margin": num(margin.phase_margin),
        "predicted": if margin.phase_margin > 0.0 { "bounded" } else { "divergent" },
    });
    let always = vec![
        meta.csv("operator_bode.csv", bode_csv),
        meta.json("operator_margin.json", margin_body.clone()),
    ];

    let traj = match simulate_tracking(&task, &op) {
        Ok(t) => t,
        Err(e @ Error::Diverged { .. }) => return Err(Failure::from(e).with_artifacts(always)),
        Err(e) => return Err(e.into()),
    };
    let mut artifacts = always;
    artifacts.push(meta.csv("operator_tracking.csv", traj.to_csv(&meta.preamble())));
    // A growing envelope that stays below the blow-up bound is still a
    // divergence; report where the error peaked.
    if classify_step_response(&traj) == ResponseClass::Divergent {
        let (i, peak) =
            tracking_error(&traj)
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, e)| {
                    if e.abs() > acc.1 {
                        (i, e.abs())
                    } else {
                        acc
                    }
                });
        let msg = format!(
            "closed loop diverges: error envelope grows, |e| = {peak:.6e} at t = {}",
            traj.time(i)
        );
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: msg,
            artifacts,
        });
    }
    let weights = cfg.weights.unwrap_or_else(|| CostWeights {
        q: vec![1.0; traj.outputs[0].len()],
        r: vec![0.0; traj.inputs[0].len()],
        g: vec![0.0; traj.inputs[0].len()],
    });
    let cost = cost_functional(std::slice::from_ref(&traj), &weights)?;
    let cost_body = json!({ "J": num(cost), "weights": weights });
    let summary =
        json!({ "margin": margin_body, "cost": cost_body.clone(), "observed": "bounded" });
    artifacts.push(meta.json("operator_cost.json", cost_body));
    Ok(Outcome::new(artifacts, summary))
}
