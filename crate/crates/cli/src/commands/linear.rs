use liectl_core::linalg::{condition_number, eigenvalues};
use liectl_core::linear::{StateSpaceModel, DEFAULT_GRAMIAN_STEPS};
use liectl_core::ode::IntegratorConfig;
use liectl_core::signal::InputSignal;
use nalgebra::{Complex, DMatrix};
use serde::Deserialize;
use serde_json::{json, Value};

use super::{positive, state_or_zero, vec_json, Outcome};
use crate::artifacts::{num, numeric_csv, Meta};
use crate::config::read_text;
use crate::failure::Failure;

fn default_task() -> String {
    "rank".into()
}
fn default_t() -> f64 {
    10.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_steps() -> usize {
    DEFAULT_GRAMIAN_STEPS
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    #[serde(default)]
    seed: u64,
    model: Option<Value>,
    model_file: Option<String>,
    #[serde(default = "default_task")]
    task: String,
    #[serde(rename = "T", default = "default_t")]
    horizon: f64,
    #[serde(default = "default_dt")]
    dt: f64,
    x0: Option<Vec<f64>>,
    target: Option<Vec<f64>>,
    u: Option<Vec<f64>>,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(rename = "K")]
    gain: Option<Vec<Vec<f64>>>,
    omegas: Option<Vec<f64>>,
}

fn load_model(cfg: &LinearConfig) -> Result<StateSpaceModel, Failure> {
    match (&cfg.model, &cfg.model_file) {
        (Some(_), Some(_)) => Err(Failure::config("give either model or model_file, not both")),
        (Some(v), None) => serde_json::from_value(v.clone())
            .map_err(|e| Failure::config(format!("invalid model: {e}"))),
        (None, Some(path)) => Ok(StateSpaceModel::from_json(&read_text(path.as_ref())?)?),
        (None, None) => Err(Failure::config("a model is required (model or --model)")),
    }
}

fn rows(m: &DMatrix<f64>) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&v| num(v)).collect()))
            .collect(),
    )
}

fn complex_list(v: &[Complex<f64>]) -> Value {
    Value::Array(v.iter().map(|c| json!([num(c.re), num(c.im)])).collect())
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, Failure> {
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Failure::config(format!(
            "{name} rows must have equal length"
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn run(cfg: LinearConfig) -> Result<Outcome, Failure> {
    let model = load_model(&cfg)?;
    let (n, m) = (model.states(), model.inputs());
    let meta = Meta::new("linear", cfg.seed, Some(cfg.dt));
    let task = cfg.task.as_str();
    let (artifacts, summary) = match task {
        "rank" => {
            let r = model.rank_condition();
            let body = json!({ "task": task, "rank": r.rank, "controllable": r.controllable });
            (vec![meta.json("linear_rank.json", body.clone())], body)
        }
        "simulate" => {
            positive("dt", cfg.dt)?;
            positive("T", cfg.horizon)?;
            let x0 = state_or_zero("x0", &cfg.x0, n)?;
            let u = state_or_zero("u", &cfg.u, m)?;
            let traj = model.simulate_continuous(&x0, &InputSignal::Constant(u), cfg.horizon, &IntegratorConfig::rk4(cfg.dt))?;
            let body = json!({
                "task": task,
                "final_state": vec_json(traj.last_state()),
                "final_output": vec_json(traj.outputs.last().expect("nonempty trajectory")),
            });
            (
                vec![meta.csv("linear_simulate.csv", traj.to_csv(&meta.preamble())), meta.json("linear_simulate.json", body.clone())],
                body,
            )
        }
        "gramian" => {
            positive("T", cfg.horizon)?;
            let w = model.controllability_gramian(cfg.horizon, cfg.steps)?;
            let body = json!({
                "task": task,
                "T": cfg.horizon,
                "gramian": rows(&w),
                "condition": num(condition_number(&w)),
                "eigenvalues": complex_list(&eigenvalues(&w)),
            });
            (vec![meta.json("linear_gramian.json", body.clone())], body)
        }
        "minenergy" => {
            positive("dt", cfg.dt)?;
            positive("T", cfg.horizon)?;
            let x0 = state_or_zero("x0", &cfg.x0, n)?;
            let target = state_or_zero("target", &cfg.target, n)?;
            let signal = model.min_energy_control(&x0, &target, cfg.horizon, cfg.dt)?;
            let traj = model.simulate_continuous(&x0, &InputSignal::Sampled(signal.clone()), cfg.horizon, &IntegratorConfig::rk4(cfg.dt))?;
            let endpoint_error = (traj.last_state() - &target).norm();
            let sq: Vec<f64> = signal.values.iter().map(|u| u.norm_squared()).collect();
            let energy = cfg.dt * (sq.iter().sum::<f64>() - 0.5 * (sq[0] + sq[sq.len() - 1]));
            let mut cols = vec!["t".to_string()];
            cols.extend((1..=m).map(|i| format!("u{i}")));
            let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
            let csv = numeric_csv(
                &meta.preamble(),
                &col_refs,
                signal.values.iter().enumerate().map(|(i, u)| {
                    let mut row = vec![i as f64 * cfg.dt];
                    row.extend(u.iter());
                    row
                }),
            );
            let body = json!({
                "task": task,
                "endpoint_error": num(endpoint_error),
                "energy": num(energy),
                "final_state": vec_json(traj.last_state()),
            });
            (vec![meta.csv("linear_minenergy.csv", csv), meta.json("linear_minenergy.json", body.clone())], body)
        }
        "freq" => {
            let omegas = cfg.omegas.clone().unwrap_or_else(|| (0..=60).map(|k| 10f64.powf(-2.0 + 4.0 * k as f64 / 60.0)).collect());
            let fr = model.frequency_response(&omegas);
            let p = model.outputs();
            let mut cols = vec!["omega".to_string()];
            for i in 1..=p {
                for j in 1..=m {
                    for part in ["re", "im", "mag", "phase"] {
                        cols.push(format!("{part}_{i}{j}"));
                    }
                }
            }
            let col_refs: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
            let csv = numeric_csv(
                &meta.preamble(),
                &col_refs,
                fr.frequencies.iter().zip(&fr.values).map(|(&w, g)| {
                    let mut row = vec![w];
                    for i in 0..p {
                        for j in 0..m {
                            match g {
                                Some(g) => row.extend([g[(i, j)].re, g[(i, j)].im, g[(i, j)].norm(), g[(i, j)].arg()]),
                                None => row.extend([f64::NAN; 4]),
                            }
                        }
                    }
                    row
                }),
            );
            let body = json!({ "task": task, "points": omegas.len(), "resonances": fr.resonances() });
            (vec![meta.csv("linear_freq.csv", csv), meta.json("linear_freq.json", body.clone())], body)
        }
        "feedback" => {
            let k = matrix_from_rows("K", cfg.gain.as_deref().ok_or_else(|| Failure::config("feedback task needs K"))?)?;
            let closed = model.output_feedback(&k)?;
            let eigs = eigenvalues(&closed.a);
            let body = json!({
                "task": task,
                "closed_loop": serde_json::to_value(&closed).expect("model serializes"),
                "eigenvalues": complex_list(&eigs),
                "stable": closed.is_stable(),
            });
            (vec![meta.json("linear_feedback.json", body.clone())], body)
        }
        "steady" => {
            let u = state_or_zero("u", &cfg.u, m)?;
            let ss = model.steady_state_output(&u)?;
            let body = json!({
                "task": task,
                "output": vec_json(&ss.output),
                "stable": ss.stable,
                "full_output_rank": ss.full_output_rank,
            });
            (vec![meta.json("linear_steady.json", body.clone())], body)
        }
        other => {
            return Err(Failure::config(format!(
                "unknown task {other:?}; expected simulate, gramian, rank, minenergy, freq, feedback or steady"
            )))
        }
    };
    Ok(Outcome::new(artifacts, summary))
}
