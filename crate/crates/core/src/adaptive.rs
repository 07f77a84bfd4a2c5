//! Adaptive tracking for relative-degree-one plants in quasilinear form
//! `ẋ = Σ γᵢ fᵢ(x) + Σ dⱼ gⱼ(x) u`, `y = h(x)`.
//!
//! The certainty-equivalence law replaces `L_f h`, `L_g h` by estimates
//! built from `γ̂ᵢ`, `d̂ⱼ`; estimates move as `d/dt est = +γ_upd·ε·W` with
//! `ε = y − y_R`, which is the update `ψ̇ = −γ_upd·ε·W` for `ψ = truth − est`.

use std::cell::Cell;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::feedback_lin::SINGULARITY_THRESHOLD;
use crate::field::{lie_derivative, DiffConfig, ScalarField, State, VectorField};
use crate::ode::{ensure_finite, step, Method};
use crate::trajectory::{fmt_num, Trajectory};

/// Sign-preserving floor on `|L̂_g h|`.
pub const DELTA_MIN: f64 = 1e-3;

/// A plant parameter: constant or a time profile.
#[derive(Clone)]
pub enum Parameter {
    Constant(f64),
    Profile(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Parameter {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Parameter::Constant(c) => *c,
            Parameter::Profile(p) => p(t),
        }
    }
}

impl From<f64> for Parameter {
    fn from(c: f64) -> Self {
        Parameter::Constant(c)
    }
}

#[derive(Clone)]
pub struct QuasiLinearSystem {
    pub f_list: Vec<VectorField>,
    pub g_list: Vec<VectorField>,
    pub h: ScalarField,
    pub true_gamma: Vec<Parameter>,
    pub true_d: Vec<Parameter>,
    pub diff: DiffConfig,
}

impl QuasiLinearSystem {
    pub fn new(
        f_list: Vec<VectorField>,
        g_list: Vec<VectorField>,
        h: ScalarField,
        true_gamma: Vec<Parameter>,
        true_d: Vec<Parameter>,
    ) -> Result<Self> {
        if g_list.is_empty() {
            return Err(Error::invalid("g_list", "needs at least one input field"));
        }
        let n = h.dim();
        for f in f_list.iter().chain(&g_list) {
            check_dim("field dimension", n, f.dim())?;
        }
        check_dim("true gamma count", f_list.len(), true_gamma.len())?;
        check_dim("true d count", g_list.len(), true_d.len())?;
        Ok(QuasiLinearSystem {
            f_list,
            g_list,
            h,
            true_gamma,
            true_d,
            diff: DiffConfig::default(),
        })
    }

    /// `ẋ = γ₁x + d₁u`, `y = x`.
    pub fn scalar(gamma: f64, d: f64) -> Self {
        QuasiLinearSystem::new(
            vec![VectorField::new(1, |x| x.clone())],
            vec![VectorField::constant(DVector::from_element(1, 1.0))],
            ScalarField::coordinate(1, 0),
            vec![gamma.into()],
            vec![d.into()],
        )
        .expect("scalar plant is well-formed")
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `(L_{fᵢ}h, L_{gⱼ}h)` at `x`.
    pub fn basis_derivatives(&self, x: &State) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim("state", self.dim(), x.len())?;
        let lf = self
            .f_list
            .iter()
            .map(|f| lie_derivative(&self.h, f, x, &self.diff))
            .collect::<Result<_>>()?;
        let lg = self
            .g_list
            .iter()
            .map(|g| lie_derivative(&self.h, g, x, &self.diff))
            .collect::<Result<_>>()?;
        Ok((lf, lg))
    }

    /// True `(L_f h, L_g h)` at time `t`.
    pub fn true_lie_derivatives(&self, x: &State, t: f64) -> Result<(f64, f64)> {
        let (lf, lg) = self.basis_derivatives(x)?;
        let a = lf
            .iter()
            .zip(&self.true_gamma)
            .map(|(l, p)| l * p.at(t))
            .sum();
        let b = lg.iter().zip(&self.true_d).map(|(l, p)| l * p.at(t)).sum();
        Ok((a, b))
    }

    /// Plant vector field with control `u` at time `t`.
    pub fn rhs(&self, t: f64, x: &State, u: f64) -> State {
        let mut dx = State::zeros(x.len());
        for (f, p) in self.f_list.iter().zip(&self.true_gamma) {
            dx += f.eval(x) * p.at(t);
        }
        for (g, p) in self.g_list.iter().zip(&self.true_d) {
            dx += g.eval(x) * (p.at(t) * u);
        }
        dx
    }

    pub fn truth_at(&self, t: f64) -> Vec<f64> {
        self.true_gamma
            .iter()
            .chain(&self.true_d)
            .map(|p| p.at(t))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEstimates {
    pub gamma_hat: Vec<f64>,
    pub d_hat: Vec<f64>,
    pub update_gain: f64,
    pub alpha: f64,
}

impl AdaptiveEstimates {
    /// Zero gain freezes the estimates.
    pub fn validate(&self) -> Result<()> {
        if !(self.update_gain >= 0.0 && self.update_gain.is_finite()) {
            return Err(Error::invalid(
                "update_gain",
                "must be finite and nonnegative",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        if self
            .gamma_hat
            .iter()
            .chain(&self.d_hat)
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("estimates", "must be finite"));
        }
        Ok(())
    }

    fn check_shape(&self, sys: &QuasiLinearSystem) -> Result<()> {
        check_dim("gamma_hat length", sys.f_list.len(), self.gamma_hat.len())?;
        check_dim("d_hat length", sys.g_list.len(), self.d_hat.len())
    }

    /// Estimates set to the plant's true parameters at `t`.
    pub fn at_truth(sys: &QuasiLinearSystem, t: f64, update_gain: f64, alpha: f64) -> Self {
        AdaptiveEstimates {
            gamma_hat: sys.true_gamma.iter().map(|p| p.at(t)).collect(),
            d_hat: sys.true_d.iter().map(|p| p.at(t)).collect(),
            update_gain,
            alpha,
        }
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.gamma_hat.iter().chain(&self.d_hat).copied().collect()
    }
}

#[derive(Clone)]
pub struct ReferenceSignal {
    y: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    y_dot: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ReferenceSignal {
    pub fn new(
        y: impl Fn(f64) -> f64 + Send + Sync + 'static,
        y_dot: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ReferenceSignal {
            y: Arc::new(y),
            y_dot: Arc::new(y_dot),
        }
    }

    pub fn constant(c: f64) -> Self {
        ReferenceSignal::new(move |_| c, |_| 0.0)
    }

    pub fn sine(amplitude: f64, omega: f64) -> Self {
        ReferenceSignal::new(
            move |t| amplitude * (omega * t).sin(),
            move |t| amplitude * omega * (omega * t).cos(),
        )
    }

    pub fn y(&self, t: f64) -> f64 {
        (self.y)(t)
    }

    pub fn y_dot(&self, t: f64) -> f64 {
        (self.y_dot)(t)
    }

    /// Compare `y_dot` with central differences of `y` on `samples` points
    /// of `[0, t_end]`; errors if the worst gap exceeds `tol`.
    pub fn check_consistency(&self, t_end: f64, samples: usize, tol: f64) -> Result<f64> {
        let h = 1e-5;
        let mut worst = 0.0f64;
        for i in 0..samples.max(2) {
            let t = t_end * i as f64 / (samples.max(2) - 1) as f64;
            let fd = (self.y(t + h) - self.y(t - h)) / (2.0 * h);
            worst = worst.max((fd - self.y_dot(t)).abs());
        }
        if worst > tol {
            return Err(Error::invalid(
                "reference",
                format!("derivative inconsistent by {worst:e}"),
            ));
        }
        Ok(worst)
    }
}

/// Known-parameter law `u = (−L_f h + ẏ_R + α(y_R − y)) / L_g h`.
pub fn tracking_control(
    sys: &QuasiLinearSystem,
    x: &State,
    reference: &ReferenceSignal,
    t: f64,
    alpha: f64,
) -> Result<f64> {
    let (lf, lg) = sys.true_lie_derivatives(x, t)?;
    if !(lg.abs() >= SINGULARITY_THRESHOLD) {
        return Err(Error::SingularDecoupling {
            value: lg.abs(),
            state: x.iter().cloned().collect(),
        });
    }
    let y = sys.h.eval(x);
    Ok((-lf + reference.y_dot(t) + alpha * (reference.y(t) - y)) / lg)
}

/// `(L̂_f h, L̂_g h) = (Σ γ̂ᵢ L_{fᵢ}h, Σ d̂ⱼ L_{gⱼ}h)`.
pub fn estimate_lie_derivatives(
    est: &AdaptiveEstimates,
    sys: &QuasiLinearSystem,
    x: &State,
) -> Result<(f64, f64)> {
    est.check_shape(sys)?;
    let (lf, lg) = sys.basis_derivatives(x)?;
    Ok(weighted(est, &lf, &lg))
}

fn weighted(est: &AdaptiveEstimates, lf: &[f64], lg: &[f64]) -> (f64, f64) {
    let a = lf.iter().zip(&est.gamma_hat).map(|(l, g)| l * g).sum();
    let b = lg.iter().zip(&est.d_hat).map(|(l, d)| l * d).sum();
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlValue {
    pub u: f64,
    pub clamped: bool,
}

fn clamp_denominator(v: f64) -> (f64, bool) {
    if v.abs() >= DELTA_MIN {
        (v, false)
    } else {
        (if v < 0.0 { -DELTA_MIN } else { DELTA_MIN }, true)
    }
}

fn control_from(
    est: &AdaptiveEstimates,
    y: f64,
    lf_hat: f64,
    lg_hat: f64,
    reference: &ReferenceSignal,
    t: f64,
) -> ControlValue {
    let (den, clamped) = clamp_denominator(lg_hat);
    let u = (-lf_hat + reference.y_dot(t) + est.alpha * (reference.y(t) - y)) / den;
    ControlValue { u, clamped }
}

/// Certainty-equivalence control `û`, with the denominator clamped at `±δ_min`.
pub fn adaptive_control(
    est: &AdaptiveEstimates,
    sys: &QuasiLinearSystem,
    x: &State,
    reference: &ReferenceSignal,
    t: f64,
) -> Result<ControlValue> {
    let (lf_hat, lg_hat) = estimate_lie_derivatives(est, sys, x)?;
    Ok(control_from(
        est,
        sys.h.eval(x),
        lf_hat,
        lg_hat,
        reference,
        t,
    ))
}

/// Regressor `W = (L_{f₁}h … L_{fₙ}h, L_{g₁}h·û … L_{gₘ}h·û)`, using the post-clamp `û`.
pub fn build_w(
    est: &AdaptiveEstimates,
    sys: &QuasiLinearSystem,
    x: &State,
    reference: &ReferenceSignal,
    t: f64,
) -> Result<DVector<f64>> {
    est.check_shape(sys)?;
    let (lf, lg) = sys.basis_derivatives(x)?;
    let (a, b) = weighted(est, &lf, &lg);
    let u = control_from(est, sys.h.eval(x), a, b, reference, t).u;
    Ok(DVector::from_iterator(
        lf.len() + lg.len(),
        lf.iter().copied().chain(lg.iter().map(|l| l * u)),
    ))
}

/// One Euler step `est ← est + dt·γ_upd·ε·W`.
pub fn parameter_update_step(
    est: &AdaptiveEstimates,
    epsilon: f64,
    w: &DVector<f64>,
    dt: f64,
) -> Result<AdaptiveEstimates> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let n = est.gamma_hat.len();
    check_dim("regressor length", n + est.d_hat.len(), w.len())?;
    let k = dt * est.update_gain * epsilon;
    let mut next = est.clone();
    for (i, g) in next.gamma_hat.iter_mut().enumerate() {
        *g += k * w[i];
    }
    for (j, d) in next.d_hat.iter_mut().enumerate() {
        *d += k * w[n + j];
    }
    Ok(next)
}

pub struct AdaptiveRun {
    /// States; outputs `[y, y_R, ε]`; input `[û]`.
    pub trajectory: Trajectory,
    /// Stacked `(γ̂, d̂)` per sample.
    pub estimates: Vec<Vec<f64>>,
    pub error: Vec<f64>,
    pub clamp_events: usize,
    pub update_gain: f64,
}

impl AdaptiveRun {
    /// RMS of `ε` over the trailing `fraction` of samples.
    pub fn tail_rms(&self, fraction: f64) -> f64 {
        let n = self.error.len();
        let start = ((1.0 - fraction.clamp(0.0, 1.0)) * n as f64).floor() as usize;
        let tail = &self.error[start.min(n - 1)..];
        (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt()
    }

    /// `ε²/2 + |ψ|²/(2γ_upd)` per sample against the plant's true parameters.
    pub fn lyapunov_trace(&self, sys: &QuasiLinearSystem) -> Result<Vec<f64>> {
        if !(self.update_gain > 0.0) {
            return Err(Error::invalid(
                "update_gain",
                "Lyapunov trace needs a positive gain",
            ));
        }
        Ok(self
            .estimates
            .iter()
            .zip(&self.error)
            .enumerate()
            .map(|(i, (est, e))| {
                let truth = sys.truth_at(self.trajectory.time(i));
                let psi2: f64 = truth.iter().zip(est).map(|(a, b)| (a - b).powi(2)).sum();
                0.5 * e * e + psi2 / (2.0 * self.update_gain)
            })
            .collect())
    }

    /// CSV `t,y,y_R,u,eps,gamma_hat1..,d_hat1..`.
    pub fn to_csv(&self, preamble: &[String], n_gamma: usize) -> String {
        let mut out = String::new();
        for line in preamble {
            out.push_str(line);
            out.push('\n');
        }
        let n_d = self.estimates.first().map_or(0, |e| e.len() - n_gamma);
        let mut header = vec![
            "t".to_string(),
            "y".into(),
            "y_R".into(),
            "u".into(),
            "eps".into(),
        ];
        header.extend((1..=n_gamma).map(|i| format!("gamma_hat{i}")));
        header.extend((1..=n_d).map(|j| format!("d_hat{j}")));
        out.push_str(&header.join(","));
        out.push('\n');
        let tr = &self.trajectory;
        for i in 0..tr.len() {
            let mut row = vec![
                fmt_num(tr.time(i)),
                fmt_num(tr.outputs[i][0]),
                fmt_num(tr.outputs[i][1]),
                fmt_num(tr.inputs[i][0]),
                fmt_num(tr.outputs[i][2]),
            ];
            row.extend(self.estimates[i].iter().map(|&v| fmt_num(v)));
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Closed-loop run on `[0, T]`.
///
/// Per sample the control is formed from the current estimates, the plant
/// is advanced by one RK4 step with the law re-evaluated at the stages
/// (estimates held), then the estimates take one Euler update.
pub fn run_adaptive_tracking(
    sys: &QuasiLinearSystem,
    est0: &AdaptiveEstimates,
    reference: &ReferenceSignal,
    x0: &State,
    t_end: f64,
    dt: f64,
) -> Result<AdaptiveRun> {
    est0.validate()?;
    est0.check_shape(sys)?;
    check_dim("state", sys.dim(), x0.len())?;
    let steps = crate::ode::IntegratorConfig::rk4(dt).steps(0.0, t_end)?;

    let mut est = est0.clone();
    let mut x = x0.clone();
    let mut states = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut estimates = Vec::with_capacity(steps + 1);
    let mut error = Vec::with_capacity(steps + 1);
    let mut clamp_events = 0;
    let failure = Cell::new(None::<Error>);

    for i in 0..=steps {
        let t = i as f64 * dt;
        ensure_finite(&x, t)?;
        let (lf, lg) = sys.basis_derivatives(&x)?;
        let (a, b) = weighted(&est, &lf, &lg);
        let y = sys.h.eval(&x);
        let cv = control_from(&est, y, a, b, reference, t);
        let eps = y - reference.y(t);
        let mut step_clamped = cv.clamped;

        states.push(x.clone());
        outputs.push(DVector::from_vec(vec![y, reference.y(t), eps]));
        inputs.push(DVector::from_element(1, cv.u));
        estimates.push(est.stacked());
        error.push(eps);
        if i == steps {
            clamp_events += step_clamped as usize;
            break;
        }

        let clamped_stage = Cell::new(false);
        let rhs = |ts: f64, xs: &State| -> State {
            match estimate_lie_derivatives(&est, sys, xs) {
                Ok((a, b)) => {
                    let c = control_from(&est, sys.h.eval(xs), a, b, reference, ts);
                    if c.clamped {
                        clamped_stage.set(true);
                    }
                    sys.rhs(ts, xs, c.u)
                }
                Err(e) => {
                    failure.set(Some(e));
                    State::from_element(xs.len(), f64::NAN)
                }
            }
        };
        x = step(Method::Rk4, &rhs, t, &x, dt);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        step_clamped |= clamped_stage.get();
        clamp_events += step_clamped as usize;

        let w = DVector::from_iterator(
            lf.len() + lg.len(),
            lf.iter().copied().chain(lg.iter().map(|l| l * cv.u)),
        );
        est = parameter_update_step(&est, eps, &w, dt)?;
        if est.stacked().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged { time: t + dt });
        }
    }

    Ok(AdaptiveRun {
        trajectory: Trajectory::new(0.0, dt, states, outputs, inputs)?,
        estimates,
        error,
        clamp_events,
        update_gain: est0.update_gain,
    })
}

/// Tuning of the scalar adaptive benchmark.
pub const BENCHMARK_ALPHA: f64 = 2.0;
pub const BENCHMARK_UPDATE_GAIN: f64 = 5.0;
pub const BENCHMARK_DURATION: f64 = 60.0;
pub const BENCHMARK_DT: f64 = 1e-3;

/// Scalar benchmark: truth `(γ₁, d₁) = (−1, 2)`, estimates start at `(0, 1)`,
/// `y_R = sin t`, `x0 = 0`.
pub fn scalar_benchmark(update_gain: f64, alpha: f64, t_end: f64, dt: f64) -> Result<AdaptiveRun> {
    let sys = QuasiLinearSystem::scalar(-1.0, 2.0);
    let est = AdaptiveEstimates {
        gamma_hat: vec![0.0],
        d_hat: vec![1.0],
        update_gain,
        alpha,
    };
    run_adaptive_tracking(
        &sys,
        &est,
        &ReferenceSignal::sine(1.0, 1.0),
        &DVector::zeros(1),
        t_end,
        dt,
    )
}
