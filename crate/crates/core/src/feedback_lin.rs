//! Exact input/output linearization of affine SISO systems
//! `ẋ = f(x) + g(x)u`, `y = h(x)`.
//!
//! With relative degree `r`, the control `u = p(x) + q(x)v` where
//!
//! ```text
//! p = −(L_f^r h + β₁ L_f^{r−1} h + … + β_r h) / (L_g L_f^{r−1} h)
//! q = 1 / (L_g L_f^{r−1} h)
//! ```
//!
//! makes the output obey `y⁽ʳ⁾ + β₁y⁽ʳ⁻¹⁾ + … + β_r y = v`.

use std::cell::RefCell;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::{lie_chain, DiffConfig, ScalarField, State, VectorField};
use crate::ode::{integrate, step, IntegratorConfig, Method};
use crate::signal::InputSignal;
use crate::trajectory::Trajectory;

/// `|L_g L_f^{r−1} h|` below this is a singular decoupling term.
pub const SINGULARITY_THRESHOLD: f64 = 1e-8;

/// Lie derivatives below this count as vanishing when determining the
/// relative degree. Nested finite differences leave noise near 1e-7, so
/// this sits above that floor.
pub const VANISHING_THRESHOLD: f64 = 1e-6;

/// Radius of the sample star used for the neighbourhood vanishing check.
pub const STAR_RADIUS: f64 = 1e-3;

#[derive(Clone)]
pub struct AffineSiso {
    pub f: VectorField,
    pub g: VectorField,
    pub h: ScalarField,
}

impl AffineSiso {
    pub fn new(f: VectorField, g: VectorField, h: ScalarField) -> Result<Self> {
        check_dim("input field dimension", f.dim(), g.dim())?;
        check_dim("output dimension", f.dim(), h.dim())?;
        Ok(AffineSiso { f, g, h })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `L_f^k h(x)`.
    pub fn drift_derivative(&self, k: usize, x: &State, cfg: &DiffConfig) -> Result<f64> {
        lie_chain(&self.h, &vec![&self.f; k], x, cfg)
    }

    /// `L_g L_f^{k−1} h(x)` for `k ≥ 1`.
    pub fn input_derivative(&self, k: usize, x: &State, cfg: &DiffConfig) -> Result<f64> {
        let mut fields = vec![&self.f; k - 1];
        fields.push(&self.g);
        lie_chain(&self.h, &fields, x, cfg)
    }
}

/// Centre plus `±radius` along each axis: `2n + 1` points.
pub fn sample_star(x0: &State, radius: f64) -> Vec<State> {
    let mut pts = vec![x0.clone()];
    for i in 0..x0.len() {
        for sign in [1.0, -1.0] {
            let mut p = x0.clone();
            p[i] += sign * radius;
            pts.push(p);
        }
    }
    pts
}

/// Smallest `r ≤ r_max` with `L_g L_f^{r−1} h(x0) ≠ 0`.
///
/// Lower orders must vanish on the whole sample star around `x0`; an order
/// that vanishes at `x0` but not nearby makes `x0` a singular point.
pub fn relative_degree(
    sys: &AffineSiso,
    x0: &State,
    r_max: usize,
    cfg: &DiffConfig,
) -> Result<usize> {
    check_dim("state", sys.dim(), x0.len())?;
    if r_max == 0 {
        return Err(Error::invalid("r_max", "must be at least 1"));
    }
    if r_max > cfg.depth_cap {
        return Err(Error::DepthExceeded {
            requested: r_max,
            cap: cfg.depth_cap,
        });
    }
    let star = sample_star(x0, STAR_RADIUS);
    for k in 1..=r_max {
        let at_centre = sys.input_derivative(k, x0, cfg)?;
        if at_centre.abs() > VANISHING_THRESHOLD {
            return Ok(k);
        }
        for p in &star[1..] {
            let v = sys.input_derivative(k, p, cfg)?;
            if v.abs() > VANISHING_THRESHOLD {
                return Err(Error::SingularDecoupling {
                    value: at_centre.abs(),
                    state: x0.iter().cloned().collect(),
                });
            }
        }
    }
    Err(Error::UndefinedRelativeDegree { r_max })
}

/// Coefficients `β₁…β_r` of the Butterworth polynomial with cutoff `ω_c`.
pub fn butterworth_beta(r: usize, cutoff: f64) -> Result<Vec<f64>> {
    if !(1..=4).contains(&r) {
        return Err(Error::invalid("r", "Butterworth order must be 1 to 4"));
    }
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(Error::invalid("cutoff", "must be positive"));
    }
    // Poles ω_c·e^{iπ(2k + r − 1)/(2r)}, k = 1..r, all in the left half plane.
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for k in 1..=r {
        let angle = std::f64::consts::PI * (2 * k + r - 1) as f64 / (2 * r) as f64;
        let pole = Complex64::from_polar(cutoff, angle);
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * pole;
        }
        poly = next;
    }
    Ok(poly[1..].iter().map(|c| c.re).collect())
}

#[derive(Clone)]
pub struct LinearizingController {
    pub r: usize,
    pub beta: Vec<f64>,
    sys: AffineSiso,
    cfg: DiffConfig,
}

impl LinearizingController {
    /// `(p(x), q(x))`, or a singularity error carrying the state.
    pub fn evaluate(&self, x: &State) -> Result<(f64, f64)> {
        let decoupling = self.sys.input_derivative(self.r, x, &self.cfg)?;
        if !(decoupling.abs() >= SINGULARITY_THRESHOLD) {
            return Err(Error::SingularDecoupling {
                value: decoupling.abs(),
                state: x.iter().cloned().collect(),
            });
        }
        let mut num = self.sys.drift_derivative(self.r, x, &self.cfg)?;
        for (i, b) in self.beta.iter().enumerate() {
            num += b * self.sys.drift_derivative(self.r - 1 - i, x, &self.cfg)?;
        }
        Ok((-num / decoupling, 1.0 / decoupling))
    }

    /// `u = p(x) + q(x)v`.
    pub fn control(&self, x: &State, v: f64) -> Result<f64> {
        let (p, q) = self.evaluate(x)?;
        Ok(p + q * v)
    }

    pub fn system(&self) -> &AffineSiso {
        &self.sys
    }

    /// `(y, ẏ, …, y⁽ʳ⁻¹⁾)` at `x` from drift Lie derivatives.
    pub fn output_derivatives(&self, x: &State) -> Result<DVector<f64>> {
        let vals = (0..self.r)
            .map(|k| self.sys.drift_derivative(k, x, &self.cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }
}

/// Build the linearizing controller for `beta` at the relative degree found at `x0`.
pub fn synthesize_controller(
    sys: &AffineSiso,
    beta: &[f64],
    x0: &State,
    cfg: &DiffConfig,
) -> Result<LinearizingController> {
    let r = relative_degree(sys, x0, cfg.depth_cap, cfg)?;
    check_dim("beta length", r, beta.len())?;
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid("beta", "coefficients must be finite"));
    }
    Ok(LinearizingController {
        r,
        beta: beta.to_vec(),
        sys: sys.clone(),
        cfg: *cfg,
    })
}

/// Integrate `ẋ = f + g·(p + q·v(t))` with RK4.
///
/// Outputs hold `(y, ẏ, …, y⁽ʳ⁻¹⁾)`; the input channel holds `u`.
pub fn closed_loop_simulate(
    ctrl: &LinearizingController,
    v: &InputSignal,
    x0: &State,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    let sys = &ctrl.sys;
    check_dim("state", sys.dim(), x0.len())?;
    check_dim("setpoint width", 1, v.width())?;
    let failure = RefCell::new(None);
    let rhs = |t: f64, x: &State| -> State {
        match ctrl.control(x, v.at(t)[0]) {
            Ok(u) => sys.f.eval(x) + sys.g.eval(x) * u,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                State::from_element(x.len(), f64::NAN)
            }
        }
    };
    let base = integrate(rhs, x0, 0.0, t_end, &IntegratorConfig::rk4(dt));
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let base = base?;
    let mut outputs = Vec::with_capacity(base.len());
    let mut inputs = Vec::with_capacity(base.len());
    for (t, x) in base.times().zip(&base.states) {
        outputs.push(ctrl.output_derivatives(x)?);
        inputs.push(DVector::from_element(1, ctrl.control(x, v.at(t)[0])?));
    }
    Trajectory::new(0.0, dt, base.states, outputs, inputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearityReport {
    pub max_deviation: f64,
    pub rms_deviation: f64,
}

/// Reference output of `y⁽ʳ⁾ + β₁y⁽ʳ⁻¹⁾ + … + β_r y = v` on the grid of
/// `traj`, started from its first recorded output derivatives.
pub fn reference_output(traj: &Trajectory, beta: &[f64], v: &InputSignal) -> Result<Vec<f64>> {
    let r = beta.len();
    let z0 = traj
        .outputs
        .first()
        .ok_or_else(|| Error::invalid("trajectory", "must be nonempty"))?;
    check_dim("recorded output derivatives", r, z0.len())?;
    let rhs = |t: f64, z: &State| -> State {
        let mut dz = State::zeros(r);
        for i in 0..r - 1 {
            dz[i] = z[i + 1];
        }
        dz[r - 1] = v.at(t)[0] - (0..r).map(|i| beta[i] * z[r - 1 - i]).sum::<f64>();
        dz
    };
    let mut z = z0.clone();
    let mut out = Vec::with_capacity(traj.len());
    out.push(z[0]);
    for i in 1..traj.len() {
        z = step(Method::Rk4, &rhs, traj.time(i - 1), &z, traj.dt);
        out.push(z[0]);
    }
    Ok(out)
}

/// Max and RMS of `y − y_ref` over the trajectory.
pub fn verify_linearity(
    traj: &Trajectory,
    beta: &[f64],
    v: &InputSignal,
) -> Result<LinearityReport> {
    let reference = reference_output(traj, beta, v)?;
    let mut max_deviation = 0.0f64;
    let mut sq = 0.0;
    for (y, yr) in traj.outputs.iter().zip(&reference) {
        let d = (y[0] - yr).abs();
        max_deviation = max_deviation.max(d);
        sq += d * d;
    }
    Ok(LinearityReport {
        max_deviation,
        rms_deviation: (sq / reference.len() as f64).sqrt(),
    })
}
