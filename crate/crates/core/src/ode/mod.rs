//! Fixed-step integrators: smooth, delayed, impulsive and variable-structure
//! dynamics.
//!
//! Every integrator samples on the uniform grid `t0 + i·dt` with
//! `i = 0..=N`, `N = round((t_end − t0)/dt)`. There is no adaptive stepping,
//! so identical inputs give bit-identical trajectories.

mod delay;
mod impulse;
mod sliding;

pub use delay::{integrate_with_delay, DelaySpec};
pub use impulse::{
    green_first_order, green_second_order, integrate_with_impulses, ImpulseSchedule,
};
pub use sliding::{default_band, integrate_variable_structure, sliding_alpha, SwitchingSurface};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::{State, VectorField};
use crate::trajectory::Trajectory;

/// Single-step method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub dt: f64,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt,
        }
    }

    pub fn euler(dt: f64) -> Self {
        IntegratorConfig {
            method: Method::Euler,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dt > 0.0 && self.dt.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("dt", "must be positive and finite"))
        }
    }

    /// Number of steps covering `[t0, t_end]`.
    pub fn steps(&self, t0: f64, t_end: f64) -> Result<usize> {
        self.validate()?;
        if !(t_end > t0) {
            return Err(Error::invalid("T", "end time must exceed start time"));
        }
        Ok((((t_end - t0) / self.dt).round() as usize).max(1))
    }
}

/// Advance `x` from `t` by `h` with the configured method.
pub fn step<F>(method: Method, rhs: &F, t: f64, x: &State, h: f64) -> State
where
    F: Fn(f64, &State) -> State + ?Sized,
{
    match method {
        Method::Euler => x + rhs(t, x) * h,
        Method::Rk4 => {
            let k1 = rhs(t, x);
            let k2 = rhs(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
            let k3 = rhs(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
            let k4 = rhs(t + h, &(x + &k3 * h));
            x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
        }
    }
}

pub(crate) fn ensure_finite(x: &State, t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged { time: t })
    }
}

/// Integrate a time-dependent right-hand side `ẋ = rhs(t, x)`.
pub fn integrate<F>(
    rhs: F,
    x0: &State,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(f64, &State) -> State,
{
    let n = cfg.steps(t0, t_end)?;
    let dim = x0.len();
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    for i in 0..n {
        let t = t0 + i as f64 * cfg.dt;
        x = step(cfg.method, &rhs, t, &x, cfg.dt);
        check_dim("right-hand side length", dim, x.len())?;
        ensure_finite(&x, t + cfg.dt)?;
        states.push(x.clone());
    }
    Ok(Trajectory::from_states(t0, cfg.dt, states))
}

/// Integrate an autonomous vector field.
pub fn integrate_field(
    f: &VectorField,
    x0: &State,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    check_dim("initial state", f.dim(), x0.len())?;
    integrate(|_, x| f.eval(x), x0, t0, t_end, cfg)
}

/// Flow of `f` for time `t` (negative `t` runs the field backwards) using
/// `steps` fixed steps.
pub fn flow(f: &VectorField, x0: &State, t: f64, steps: usize, method: Method) -> State {
    if t == 0.0 {
        return x0.clone();
    }
    let steps = steps.max(1);
    let h = t / steps as f64;
    let rhs = |_: f64, x: &State| f.eval(x);
    (0..steps).fold(x0.clone(), |x, i| step(method, &rhs, i as f64 * h, &x, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn exponential_decay_to_1e8() {
        let f = VectorField::new(1, |x| -x);
        let traj =
            integrate_field(&f, &dvector![1.0], 0.0, 1.0, &IntegratorConfig::rk4(1e-3)).unwrap();
        assert_eq!(traj.len(), 1001);
        assert_abs_diff_eq!(traj.last_state()[0], (-1f64).exp(), epsilon = 1e-8);
    }

    #[test]
    fn zero_field_is_constant() {
        let f = VectorField::zero(2);
        let traj = integrate_field(
            &f,
            &dvector![0.3, -4.0],
            0.0,
            2.0,
            &IntegratorConfig::rk4(0.1),
        )
        .unwrap();
        assert!(traj.states.iter().all(|x| *x == dvector![0.3, -4.0]));
    }

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        let f = VectorField::new(2, |x| dvector![x[1], -x[0]]);
        let period = 2.0 * std::f64::consts::PI;
        let cfg = IntegratorConfig::rk4(period / 6283.0);
        let traj = integrate_field(&f, &dvector![1.0, 0.0], 0.0, period, &cfg).unwrap();
        assert_abs_diff_eq!(
            traj.last_state().clone(),
            dvector![1.0, 0.0],
            epsilon = 1e-6
        );
    }

    #[test]
    fn euler_is_first_order() {
        let f = VectorField::new(1, |x| -x);
        let err = |dt: f64| {
            let t = integrate_field(&f, &dvector![1.0], 0.0, 1.0, &IntegratorConfig::euler(dt))
                .unwrap();
            (t.last_state()[0] - (-1f64).exp()).abs()
        };
        let ratio = err(0.01) / err(0.005);
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn divergence_reports_time() {
        let f = VectorField::new(1, |x| dvector![x[0] * x[0]]);
        let err = integrate_field(&f, &dvector![1.0], 0.0, 2.0, &IntegratorConfig::rk4(0.01))
            .unwrap_err();
        match err {
            Error::Diverged { time } => assert!(time > 0.9 && time < 1.1, "{time}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_config_rejected() {
        let f = VectorField::zero(1);
        assert!(
            integrate_field(&f, &dvector![0.0], 0.0, 1.0, &IntegratorConfig::rk4(0.0)).is_err()
        );
        assert!(
            integrate_field(&f, &dvector![0.0], 1.0, 1.0, &IntegratorConfig::rk4(0.1)).is_err()
        );
        assert!(integrate_field(
            &f,
            &dvector![0.0, 1.0],
            0.0,
            1.0,
            &IntegratorConfig::rk4(0.1)
        )
        .is_err());
    }

    #[test]
    fn backward_flow_inverts_forward_flow() {
        let f = VectorField::new(2, |x| dvector![x[1].cos(), x[0]]);
        let x0 = dvector![0.2, 0.1];
        let fwd = flow(&f, &x0, 0.3, 100, Method::Rk4);
        let back = flow(&f, &fwd, -0.3, 100, Method::Rk4);
        assert_abs_diff_eq!(back, x0, epsilon = 1e-10);
    }
}
