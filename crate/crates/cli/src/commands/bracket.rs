use liectl_core::catalog::control_system;
use liectl_core::controllability::{
    bracket_tree, commutator_maneuver, evaluate_tree, execute_maneuver, parking_maneuver, stlc_rank,
};
use liectl_core::field::DiffConfig;
use serde::Deserialize;
use serde_json::json;

use super::{state_or_zero, vec_json, Outcome};
use crate::artifacts::{num, Meta};
use crate::failure::Failure;

fn default_system() -> String {
    "car".into()
}
fn default_depth() -> usize {
    2
}
fn default_wheelbase() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    0.1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_system")]
    system: String,
    #[serde(default = "default_depth")]
    depth: usize,
    at: Option<Vec<f64>>,
    #[serde(rename = "L", default = "default_wheelbase")]
    wheelbase: f64,
    maneuver: Option<String>,
    #[serde(default = "default_eps")]
    eps: f64,
}

pub fn run(cfg: BracketConfig) -> Result<Outcome, Failure> {
    let sys = control_system(&cfg.system, cfg.wheelbase)?;
    let x = state_or_zero("at", &cfg.at, sys.dim())?;
    let diff = DiffConfig::default();
    let verdict = stlc_rank(&sys, &x, cfg.depth, &diff)?;
    let nodes = evaluate_tree(&bracket_tree(&sys, cfg.depth, &diff)?, &x);
    let meta = Meta::new("bracket", cfg.seed, None);
    let mut body = json!({
        "system": cfg.system,
        "depth": cfg.depth,
        "at": vec_json(&x),
        "rank": verdict.rank,
        "controllable": verdict.controllable,
        "nodes": nodes
            .iter()
            .map(|n| json!({ "label": n.label, "depth": n.depth, "value": n.value.iter().map(|&v| num(v)).collect::<Vec<_>>() }))
            .collect::<Vec<_>>(),
    });
    let mut artifacts = Vec::new();
    if let Some(kind) = &cfg.maneuver {
        let man = match kind.as_str() {
            "commutator" => commutator_maneuver(&sys, 0, 1, cfg.eps)?,
            "parking" => parking_maneuver(&sys, cfg.eps)?,
            other => {
                return Err(Failure::config(format!(
                    "unknown maneuver {other:?}; expected commutator or parking"
                )))
            }
        };
        let run = execute_maneuver(&sys, &man, &x, cfg.eps / 200.0)?;
        body["maneuver"] = json!({
            "kind": kind,
            "eps": cfg.eps,
            "displacement": vec_json(&(run.final_state() - &x)),
        });
        artifacts.push(meta.csv("bracket_maneuver.csv", man.to_csv(&meta.preamble())));
    }
    artifacts.insert(0, meta.json("bracket.json", body.clone()));
    Ok(Outcome::new(artifacts, body))
}
