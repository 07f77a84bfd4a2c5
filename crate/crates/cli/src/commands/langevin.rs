use liectl_core::kicks::{
    dt_warning, einstein_q, langevin_ensemble, simulate_langevin, EnsembleSpec, KickProcess,
    LangevinParams, ThermalParams,
};
use serde::Deserialize;
use serde_json::json;

use super::{positive, Outcome};
use crate::artifacts::{num, numeric_csv, Meta};
use crate::failure::Failure;

fn one() -> f64 {
    1.0
}
fn default_t0() -> f64 {
    0.01
}
fn default_runs() -> usize {
    1000
}
fn default_t() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_t_start() -> f64 {
    5.0
}
fn default_max_lag() -> usize {
    300
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default = "one")]
    gamma: f64,
    #[serde(default = "one")]
    m: f64,
    /// Fluctuation strength; derived from `thermal` when absent.
    #[serde(rename = "Q")]
    q: Option<f64>,
    thermal: Option<ThermalParams>,
    #[serde(default = "default_t0")]
    t0: f64,
    #[serde(default = "default_runs")]
    runs: usize,
    #[serde(rename = "T", default = "default_t")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    #[serde(default = "default_t_start")]
    t_start: f64,
    #[serde(default = "default_max_lag")]
    max_lag_steps: usize,
    #[serde(default)]
    v0: f64,
}

pub fn run(cfg: LangevinConfig) -> Result<Outcome, Failure> {
    positive("T", cfg.horizon)?;
    positive("dt", cfg.dt)?;
    if cfg.runs == 0 {
        return Err(Failure::config("runs must be positive"));
    }
    let q = match (cfg.q, &cfg.thermal) {
        (Some(q), _) => q,
        (None, Some(th)) => einstein_q(cfg.gamma, th)?,
        (None, None) => 2.0 * cfg.gamma,
    };
    let params = LangevinParams {
        gamma: cfg.gamma,
        m: cfg.m,
        q,
    };
    params.validate()?;
    let proc = KickProcess::with_fluctuation(q, cfg.t0, cfg.seed)?;
    let spec = EnsembleSpec {
        v0: cfg.v0,
        t_end: cfg.horizon,
        dt: cfg.dt,
        runs: cfg.runs,
        t_start: cfg.t_start,
        max_lag_steps: cfg.max_lag_steps,
    };
    let stats = langevin_ensemble(&params, &proc, &spec)?;
    let sample = simulate_langevin(&params, &proc, cfg.v0, cfg.horizon, cfg.dt, 0)?;
    let meta = Meta::new("langevin", cfg.seed, Some(cfg.dt));

    let mut body = json!({
        "runs": stats.runs,
        "gamma": cfg.gamma,
        "m": cfg.m,
        "Q": q,
        "t0": cfg.t0,
        "kick_strength": num(proc.strength),
        "mean": num(stats.mean),
        "mean_square": num(stats.var + stats.mean * stats.mean),
        "variance": num(stats.var),
        "expected_variance": num(params.stationary_variance()),
        "decay_constant": stats.decay_constant.map(num),
        "expected_decay_constant": num(cfg.gamma / cfg.m),
    });
    if let Some(th) = &cfg.thermal {
        body["einstein"] = json!({
            "kb": th.kb,
            "T_abs": th.t_abs,
            "equipartition_ratio": num(cfg.m * stats.var / (th.kb * th.t_abs)),
        });
    }
    let moments = numeric_csv(
        &meta.preamble(),
        &["t", "mean", "var"],
        stats
            .mean_by_time
            .iter()
            .zip(&stats.var_by_time)
            .enumerate()
            .map(|(i, (&m, &v))| vec![i as f64 * cfg.dt, m, v]),
    );
    let autocorr = numeric_csv(
        &meta.preamble(),
        &["lag", "autocorr"],
        stats
            .lags
            .iter()
            .zip(&stats.autocorr)
            .map(|(&l, &a)| vec![l, a]),
    );
    let mut outcome = Outcome::new(
        vec![
            meta.json("langevin_summary.json", body.clone()),
            meta.csv("langevin_moments.csv", moments),
            meta.csv("langevin_autocorr.csv", autocorr),
            meta.csv("langevin_sample.csv", sample.to_csv(&meta.preamble())),
            meta.csv("langevin_kicks.csv", sample.events_csv(&meta.preamble())),
        ],
        body,
    );
    outcome.warnings.extend(dt_warning(cfg.dt, &proc));
    Ok(outcome)
}
