use std::cell::RefCell;
use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use super::{ensure_finite, step, IntegratorConfig};
use crate::error::{check_dim, Error, Result};
use crate::field::State;
use crate::trajectory::Trajectory;

type History = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Dead time `tau` and the delayed signal's values before the start time.
#[derive(Clone)]
pub struct DelaySpec {
    pub tau: f64,
    history: Option<History>,
}

impl fmt::Debug for DelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelaySpec")
            .field("tau", &self.tau)
            .field("has_history", &self.history.is_some())
            .finish()
    }
}

impl DelaySpec {
    pub fn new(tau: f64, history: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        DelaySpec {
            tau,
            history: Some(Arc::new(history)),
        }
    }

    /// History held at a constant value.
    pub fn constant(tau: f64, value: DVector<f64>) -> Self {
        DelaySpec::new(tau, move |_| value.clone())
    }

    pub fn without_history(tau: f64) -> Self {
        DelaySpec { tau, history: None }
    }

    fn validate(&self) -> Result<()> {
        if self.tau >= 0.0 && self.tau.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("tau", "must be non-negative and finite"))
        }
    }
}

/// Past samples of the delayed signal, kept for `tau/dt + 3` grid points.
struct DelayLine {
    t0: f64,
    dt: f64,
    first_index: usize,
    samples: VecDeque<DVector<f64>>,
    capacity: usize,
}

impl DelayLine {
    fn new(t0: f64, dt: f64, tau: f64) -> Self {
        let capacity = (tau / dt).ceil() as usize + 3;
        DelayLine {
            t0,
            dt,
            first_index: 0,
            samples: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    fn push(&mut self, v: DVector<f64>) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
            self.first_index += 1;
        }
        self.samples.push_back(v);
    }

    fn last_index(&self) -> usize {
        self.first_index + self.samples.len() - 1
    }

    fn sample(&self, i: usize) -> &DVector<f64> {
        &self.samples[i - self.first_index]
    }

    /// Linear interpolation on the grid; times past the newest sample hold it.
    fn at(&self, s: f64, history: Option<&History>) -> Result<DVector<f64>> {
        let p = (s - self.t0) / self.dt;
        if p < -1e-9 {
            return match history {
                Some(h) => Ok(h(s)),
                None => Err(Error::MissingHistory { time: s }),
            };
        }
        let p = p.max(0.0);
        let i = p.floor() as usize;
        let last = self.last_index();
        if i >= last {
            return Ok(self.sample(last).clone());
        }
        let i = i.max(self.first_index);
        let frac = (p - i as f64).clamp(0.0, 1.0);
        if frac < 1e-12 {
            return Ok(self.sample(i).clone());
        }
        Ok(self.sample(i) * (1.0 - frac) + self.sample(i + 1) * frac)
    }
}

/// Integrate `ẋ = rhs(t, x, w(t − τ))` where `w(t) = signal(t, x(t))`.
///
/// The delayed value is read from stored grid samples of `signal` with
/// linear interpolation; before `t0` the spec's history is used. With
/// `τ = 0` the signal is evaluated at the current stage, which reduces to
/// [`integrate`](super::integrate) exactly.
pub fn integrate_with_delay<F, S>(
    rhs: F,
    signal: S,
    spec: &DelaySpec,
    x0: &State,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(f64, &State, &DVector<f64>) -> State,
    S: Fn(f64, &State) -> DVector<f64>,
{
    spec.validate()?;
    let n = cfg.steps(t0, t_end)?;
    let dim = x0.len();
    let tau = spec.tau;
    let mut line = DelayLine::new(t0, cfg.dt, tau);
    line.push(signal(t0, x0));

    let mut states = Vec::with_capacity(n + 1);
    let mut delayed_inputs = Vec::with_capacity(n + 1);
    states.push(x0.clone());
    let mut x = x0.clone();
    let failure = RefCell::new(None);
    for i in 0..n {
        let t = t0 + i as f64 * cfg.dt;
        let record = if tau == 0.0 {
            signal(t, &x)
        } else {
            line.at(t - tau, spec.history.as_ref())?
        };
        delayed_inputs.push(record);
        let stage = |ts: f64, xs: &State| -> State {
            if tau == 0.0 {
                return rhs(ts, xs, &signal(ts, xs));
            }
            match line.at(ts - tau, spec.history.as_ref()) {
                Ok(w) => rhs(ts, xs, &w),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    DVector::from_element(xs.len(), f64::NAN)
                }
            }
        };
        x = step(cfg.method, &stage, t, &x, cfg.dt);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        check_dim("right-hand side length", dim, x.len())?;
        ensure_finite(&x, t + cfg.dt)?;
        line.push(signal(t + cfg.dt, &x));
        states.push(x.clone());
    }
    let t_last = t0 + n as f64 * cfg.dt;
    delayed_inputs.push(if tau == 0.0 {
        signal(t_last, &x)
    } else {
        line.at(t_last - tau, spec.history.as_ref())?
    });
    let outputs = vec![DVector::zeros(0); states.len()];
    Trajectory::new(t0, cfg.dt, states, outputs, delayed_inputs)
}
