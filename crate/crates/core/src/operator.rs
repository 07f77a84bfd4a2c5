//! Crossover models of the human manual controller and tracking-loop
//! simulation.
//!
//! The crossover model is `H(s) = K e^{−τs}/s`. In the time domain the
//! operator is an integrator with gain `K` acting on the error delayed by
//! `τ`: `u̇(t) = K e(t − τ)`. Its crossover frequency is `K` and the phase
//! margin `π/2 − τK`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{dvector, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linear::StateSpaceModel;
use crate::ode::{integrate_with_delay, DelaySpec, IntegratorConfig};
use crate::signal::differentiate;
use crate::trajectory::Trajectory;

/// Default bound on `|e|` beyond which a tracking loop counts as diverged.
pub const DIVERGENCE_BOUND: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossoverParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub tau: f64,
}

impl CrossoverParams {
    pub fn new(k: f64, tau: f64) -> Result<Self> {
        let p = CrossoverParams { k, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::invalid("K", "must be positive and finite"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid("tau", "must be non-negative and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpandedCrossoverParams {
    #[serde(rename = "K")]
    pub k: f64,
    pub tau: f64,
    #[serde(rename = "T_L", default)]
    pub t_l: f64,
    #[serde(rename = "T_I", default)]
    pub t_i: f64,
    #[serde(rename = "T_N", default)]
    pub t_n: f64,
    #[serde(default)]
    pub alpha_drop: f64,
}

impl ExpandedCrossoverParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.k,
            self.tau,
            self.t_l,
            self.t_i,
            self.t_n,
            self.alpha_drop,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "expanded model",
                "parameters must be finite",
            ));
        }
        if self.t_i < 0.0 || self.t_n < 0.0 {
            return Err(Error::invalid(
                "T_I/T_N",
                "lag constants must be non-negative",
            ));
        }
        Ok(())
    }
}

/// One frequency-response sample with a continuous (unwrapped) phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub omega: f64,
    pub value: Complex64,
    pub magnitude: f64,
    /// Radians, accumulated analytically rather than wrapped into (−π, π].
    pub phase: f64,
}

fn check_omegas(omegas: &[f64]) -> Result<()> {
    if omegas.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::invalid(
            "omega",
            "frequencies must be positive (the model has an integrator pole at 0)",
        ));
    }
    Ok(())
}

/// `H(iω) = K e^{−iτω}/(iω)`.
pub fn crossover_frequency_response(
    p: &CrossoverParams,
    omegas: &[f64],
) -> Result<Vec<FrequencyPoint>> {
    p.validate()?;
    check_omegas(omegas)?;
    Ok(omegas
        .iter()
        .map(|&w| {
            let magnitude = p.k / w;
            let phase = -FRAC_PI_2 - p.tau * w;
            FrequencyPoint {
                omega: w,
                value: Complex64::from_polar(magnitude, phase),
                magnitude,
                phase,
            }
        })
        .collect())
}

/// `K(T_L s + 1) e^{−(τs + α/s)} / ((T_I s + 1)(T_N s + 1))` at `s = iω`.
///
/// The phase-drop factor is evaluated as written: `e^{−α/(iω)} = e^{+iα/ω}`,
/// a pure phase shift of `+α/ω` that leaves the magnitude untouched.
pub fn expanded_frequency_response(
    p: &ExpandedCrossoverParams,
    omegas: &[f64],
) -> Result<Vec<FrequencyPoint>> {
    p.validate()?;
    check_omegas(omegas)?;
    Ok(omegas
        .iter()
        .map(|&w| {
            let s = Complex64::new(0.0, w);
            let rational = (s * p.t_l + 1.0) / ((s * p.t_i + 1.0) * (s * p.t_n + 1.0)) * p.k;
            let value = rational * (-(s * p.tau + p.alpha_drop / s)).exp();
            let gain_phase = if p.k < 0.0 { std::f64::consts::PI } else { 0.0 };
            let phase = gain_phase + (p.t_l * w).atan()
                - (p.t_i * w).atan()
                - (p.t_n * w).atan()
                - p.tau * w
                + p.alpha_drop / w;
            FrequencyPoint {
                omega: w,
                value,
                magnitude: value.norm(),
                phase,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub omega_c: f64,
    pub phase_margin: f64,
}

/// Crossover frequency `K` and phase margin `π/2 − τK`.
pub fn crossover_margin(p: &CrossoverParams) -> Result<Margin> {
    p.validate()?;
    Ok(Margin {
        omega_c: p.k,
        phase_margin: FRAC_PI_2 - p.tau * p.k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackingMode {
    #[default]
    Compensatory,
    Pursuit,
}

/// Target signal `r(t)`; zero for `t < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Forcing {
    Zero,
    Step { amplitude: f64 },
    Sine { amplitude: f64, omega: f64 },
}

impl Forcing {
    pub fn at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match *self {
            Forcing::Zero => 0.0,
            Forcing::Step { amplitude } => amplitude,
            Forcing::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plant {
    #[default]
    Unity,
    Model(StateSpaceModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingTask {
    #[serde(default)]
    pub mode: TrackingMode,
    pub forcing: Forcing,
    #[serde(default)]
    pub plant: Plant,
    #[serde(rename = "T")]
    pub duration: f64,
    pub dt: f64,
}

/// Closed compensatory loop `e = r − y`, `u̇ = K e(t − τ)`, plant after the operator.
///
/// The trajectory state is `(u, plant state…)`, the input channel records
/// `u`. Outputs are `(e)` in compensatory mode and `(r, y, e)` in pursuit
/// mode; both modes use the same control law. The operator sees zero error
/// before `t = 0`. A loop whose error exceeds [`DIVERGENCE_BOUND`] is
/// reported as [`Error::Diverged`].
pub fn simulate_tracking(task: &TrackingTask, op: &CrossoverParams) -> Result<Trajectory> {
    simulate_tracking_bounded(task, op, DIVERGENCE_BOUND)
}

pub fn simulate_tracking_bounded(
    task: &TrackingTask,
    op: &CrossoverParams,
    bound: f64,
) -> Result<Trajectory> {
    op.validate()?;
    if !(task.duration > 0.0) {
        return Err(Error::invalid("T", "duration must be positive"));
    }
    let cfg = IntegratorConfig::rk4(task.dt);
    cfg.validate()?;
    if op.tau > 0.0 && task.dt >= op.tau {
        return Err(Error::invalid(
            "dt",
            format!("must be below the delay tau = {}", op.tau),
        ));
    }
    let (a, b, c, d) = match &task.plant {
        Plant::Unity => (None, None, None, 1.0),
        Plant::Model(m) => {
            check_dim("plant inputs", 1, m.inputs())?;
            check_dim("plant outputs", 1, m.outputs())?;
            (
                Some(m.a.clone()),
                Some(m.b.column(0).into_owned()),
                Some(m.c.row(0).transpose()),
                m.d[(0, 0)],
            )
        }
    };
    let n_plant = a.as_ref().map_or(0, |a| a.nrows());
    let output = |z: &DVector<f64>| -> f64 {
        let u = z[0];
        match &c {
            Some(c) => c.dot(&z.rows(1, n_plant)) + d * u,
            None => u,
        }
    };
    let forcing = task.forcing;
    let k = op.k;
    let rhs = |_t: f64, z: &DVector<f64>, e_del: &DVector<f64>| -> DVector<f64> {
        let mut dz = DVector::zeros(1 + n_plant);
        dz[0] = k * e_del[0];
        if let (Some(a), Some(b)) = (&a, &b) {
            let xp = z.rows(1, n_plant);
            dz.rows_mut(1, n_plant).copy_from(&(a * xp + b * z[0]));
        }
        dz
    };
    let signal = |t: f64, z: &DVector<f64>| dvector![forcing.at(t) - output(z)];
    let spec = DelaySpec::constant(op.tau, dvector![0.0]);
    let z0 = DVector::zeros(1 + n_plant);
    let base = integrate_with_delay(rhs, signal, &spec, &z0, 0.0, task.duration, &cfg)?;

    let mut outputs = Vec::with_capacity(base.len());
    let mut inputs = Vec::with_capacity(base.len());
    for (t, z) in base.times().zip(&base.states) {
        let r = forcing.at(t);
        let y = output(z);
        let e = r - y;
        if !(e.abs() <= bound) {
            return Err(Error::Diverged { time: t });
        }
        outputs.push(match task.mode {
            TrackingMode::Compensatory => dvector![e],
            TrackingMode::Pursuit => dvector![r, y, e],
        });
        inputs.push(dvector![z[0]]);
    }
    Trajectory::new(0.0, task.dt, base.states, outputs, inputs)
}

/// Error series of a tracking trajectory (last output channel).
pub fn tracking_error(traj: &Trajectory) -> Vec<f64> {
    traj.outputs.iter().map(|y| y[y.len() - 1]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseClass {
    Bounded,
    Divergent,
}

/// Compare the peak error over the last quarter of the run with the peak
/// over the second quarter: a non-growing envelope counts as bounded.
pub fn classify_step_response(traj: &Trajectory) -> ResponseClass {
    let e = tracking_error(traj);
    let n = e.len();
    let peak = |a: usize, b: usize| e[a..b].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let early = peak(n / 4, n / 2);
    let late = peak(3 * n / 4, n);
    if late <= early {
        ResponseClass::Bounded
    } else {
        ResponseClass::Divergent
    }
}

/// Simulate a unit step and classify the response, treating divergence
/// errors as divergent.
pub fn step_response_class(op: &CrossoverParams, duration: f64, dt: f64) -> Result<ResponseClass> {
    let task = TrackingTask {
        mode: TrackingMode::Compensatory,
        forcing: Forcing::Step { amplitude: 1.0 },
        plant: Plant::Unity,
        duration,
        dt,
    };
    match simulate_tracking(&task, op) {
        Ok(traj) => Ok(classify_step_response(&traj)),
        Err(Error::Diverged { .. }) => Ok(ResponseClass::Divergent),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryCell {
    #[serde(rename = "K")]
    pub k: f64,
    pub tau: f64,
    pub phase_margin: f64,
    pub observed: ResponseClass,
    /// `τK` within the exclusion band around `π/2`.
    pub near_boundary: bool,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub cells: Vec<BatteryCell>,
    /// Fraction of cells outside the band where the margin sign predicts the response.
    pub agreement: f64,
}

/// Margin-versus-simulation sweep over gains `ks` and `τK` values.
///
/// Each run lasts `K·T = kt_horizon` and uses `dt = min(τ/10, 0.01/K)`
/// (the second term when `τ = 0`). Cells with `|τK − π/2| ≤ band·π/2` are
/// reported but excluded from the agreement fraction.
pub fn margin_battery(
    ks: &[f64],
    tau_ks: &[f64],
    kt_horizon: f64,
    band: f64,
) -> Result<BatteryReport> {
    let grid: Vec<(f64, f64)> = ks
        .iter()
        .flat_map(|&k| tau_ks.iter().map(move |&tk| (k, tk)))
        .collect();
    let cells = grid
        .par_iter()
        .map(|&(k, tk)| {
            let tau = tk / k;
            let op = CrossoverParams::new(k, tau)?;
            let dt = if tau > 0.0 {
                (tau / 10.0).min(0.01 / k)
            } else {
                0.01 / k
            };
            let observed = step_response_class(&op, kt_horizon / k, dt)?;
            let phase_margin = crossover_margin(&op)?.phase_margin;
            let predicted = if phase_margin > 0.0 {
                ResponseClass::Bounded
            } else {
                ResponseClass::Divergent
            };
            Ok(BatteryCell {
                k,
                tau,
                phase_margin,
                observed,
                near_boundary: (tk - FRAC_PI_2).abs() <= band * FRAC_PI_2,
                agrees: predicted == observed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let outside: Vec<_> = cells.iter().filter(|c| !c.near_boundary).collect();
    let agreement = if outside.is_empty() {
        1.0
    } else {
        outside.iter().filter(|c| c.agrees).count() as f64 / outside.len() as f64
    };
    Ok(BatteryReport { cells, agreement })
}

/// Weights for `J = E[ mean_t( Σ q_i y_i² + Σ (r_i u_i² + g_i u̇_i²) ) ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostWeights {
    pub q: Vec<f64>,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
}

/// Time-averaged quadratic cost, averaged over the supplied runs.
///
/// `q` weights output channels, `r` and `g` input channels and their rates.
/// The time average is the trapezoid mean over the sampled window; `u̇`
/// comes from central differences with one-sided ends.
pub fn cost_functional(runs: &[Trajectory], w: &CostWeights) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::invalid("trajectory", "at least one run required"));
    }
    if [&w.q, &w.r, &w.g]
        .iter()
        .any(|v| v.iter().any(|x| !(*x >= 0.0)))
    {
        return Err(Error::invalid("weights", "must be non-negative"));
    }
    let mut total = 0.0;
    for traj in runs {
        if traj.is_empty() {
            return Err(Error::invalid("trajectory", "must be nonempty"));
        }
        check_dim("q weights", traj.outputs[0].len(), w.q.len())?;
        check_dim("r weights", traj.inputs[0].len(), w.r.len())?;
        check_dim("g weights", traj.inputs[0].len(), w.g.len())?;
        let udot = differentiate(&traj.inputs, traj.dt);
        let penalty: Vec<f64> = (0..traj.len())
            .map(|i| {
                let y = &traj.outputs[i];
                let u = &traj.inputs[i];
                let du = &udot[i];
                (0..y.len()).map(|j| w.q[j] * y[j] * y[j]).sum::<f64>()
                    + (0..u.len())
                        .map(|j| w.r[j] * u[j] * u[j] + w.g[j] * du[j] * du[j])
                        .sum::<f64>()
            })
            .collect();
        total += trapezoid_mean(&penalty);
    }
    Ok(total / runs.len() as f64)
}

fn trapezoid_mean(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let inner: f64 = v[1..n - 1].iter().sum();
            (inner + 0.5 * (v[0] + v[n - 1])) / (n - 1) as f64
        }
    }
}
