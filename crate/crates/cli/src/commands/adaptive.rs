use liectl_core::adaptive::{
    scalar_benchmark, BENCHMARK_ALPHA, BENCHMARK_DT, BENCHMARK_DURATION, BENCHMARK_UPDATE_GAIN,
};
use serde::Deserialize;
use serde_json::json;

use super::{positive, Outcome};
use crate::artifacts::{num, Meta};
use crate::failure::Failure;

/// Tail RMS error allowed, as a fraction of the reference amplitude.
const RMS_THRESHOLD: f64 = 0.05;

fn default_benchmark() -> String {
    "scalar".into()
}
fn default_alpha() -> f64 {
    BENCHMARK_ALPHA
}
fn default_gain() -> f64 {
    BENCHMARK_UPDATE_GAIN
}
fn default_t() -> f64 {
    BENCHMARK_DURATION
}
fn default_dt() -> f64 {
    BENCHMARK_DT
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_benchmark")]
    benchmark: String,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_gain")]
    update_gain: f64,
    #[serde(rename = "T", default = "default_t")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
}

pub fn run(cfg: AdaptiveConfig) -> Result<Outcome, Failure> {
    if cfg.benchmark != "scalar" {
        return Err(Failure::config(format!(
            "unknown benchmark {:?}; expected scalar",
            cfg.benchmark
        )));
    }
    positive("T", cfg.horizon)?;
    positive("dt", cfg.dt)?;
    let run = scalar_benchmark(cfg.update_gain, cfg.alpha, cfg.horizon, cfg.dt)?;
    let meta = Meta::new("adaptive", cfg.seed, Some(cfg.dt));
    let tail_rms = run.tail_rms(0.2);
    let last = run.estimates.last().expect("run has samples");
    let body = json!({
        "benchmark": cfg.benchmark,
        "alpha": cfg.alpha,
        "update_gain": cfg.update_gain,
        "tail_rms": num(tail_rms),
        "threshold": RMS_THRESHOLD,
        "within_threshold": tail_rms < RMS_THRESHOLD,
        "clamp_events": run.clamp_events,
        "final_gamma_hat": num(last[0]),
        "final_d_hat": num(last[1]),
    });
    Ok(Outcome::new(
        vec![
            meta.csv("adaptive.csv", run.to_csv(&meta.preamble(), 1)),
            meta.json("adaptive_summary.json", body.clone()),
        ],
        body,
    ))
}
