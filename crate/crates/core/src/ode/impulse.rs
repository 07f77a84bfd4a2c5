use super::{ensure_finite, step, IntegratorConfig};
use crate::error::{Error, Result};
use crate::field::State;
use crate::trajectory::{Event, Trajectory};

/// Dirac kicks `Σ s_k δ(t − σ_k)` applied to one state component.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSchedule {
    times: Vec<f64>,
    strengths: Vec<f64>,
    pub channel: usize,
}

impl ImpulseSchedule {
    /// Sorts by time and merges kicks at identical times by summing strengths.
    pub fn new(times: Vec<f64>, strengths: Vec<f64>, channel: usize) -> Result<Self> {
        if times.len() != strengths.len() {
            return Err(Error::DimensionMismatch {
                context: "impulse strengths",
                expected: times.len(),
                got: strengths.len(),
            });
        }
        if times.iter().chain(&strengths).any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "impulses",
                "times and strengths must be finite",
            ));
        }
        let mut pairs: Vec<(f64, f64)> = times.into_iter().zip(strengths).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (t, s) in pairs {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += s,
                _ => merged.push((t, s)),
            }
        }
        let (times, strengths) = merged.into_iter().unzip();
        Ok(ImpulseSchedule {
            times,
            strengths,
            channel,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }
}

/// Integrate `ẋ = rhs(t, x)` with state jumps `x[channel] += s_k`.
///
/// The kick at `σ_k` is applied right after the sample with index
/// `round((σ_k − t0)/dt)`, so the stored sample at that index is the
/// pre-kick state. Kicks landing on the same sample add up.
pub fn integrate_with_impulses<F>(
    rhs: F,
    schedule: &ImpulseSchedule,
    x0: &State,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(f64, &State) -> State,
{
    let n = cfg.steps(t0, t_end)?;
    if schedule.channel >= x0.len() {
        return Err(Error::invalid(
            "channel",
            format!(
                "index {} out of range for state of size {}",
                schedule.channel,
                x0.len()
            ),
        ));
    }
    let mut kicks = vec![0.0; n + 1];
    let mut events = Vec::new();
    for (&sigma, &s) in schedule.times.iter().zip(&schedule.strengths) {
        if sigma < t0 || sigma > t_end {
            return Err(Error::invalid(
                "impulse time",
                format!("{sigma} outside [{t0}, {t_end}]"),
            ));
        }
        let idx = (((sigma - t0) / cfg.dt).round() as usize).min(n);
        kicks[idx] += s;
        events.push(Event::new(sigma, "kick"));
    }

    let mut states = Vec::with_capacity(n + 1);
    let mut x = x0.clone();
    states.push(x.clone());
    for (i, &kick) in kicks.iter().enumerate().take(n) {
        let t = t0 + i as f64 * cfg.dt;
        if kick != 0.0 {
            x[schedule.channel] += kick;
        }
        x = step(cfg.method, &rhs, t, &x, cfg.dt);
        ensure_finite(&x, t + cfg.dt)?;
        states.push(x.clone());
    }
    if kicks[n] != 0.0 {
        // A kick at the final sample is visible in the last stored state.
        let last = states.last_mut().expect("at least one sample");
        last[schedule.channel] += kicks[n];
    }
    let mut traj = Trajectory::from_states(t0, cfg.dt, states);
    traj.events = events;
    Ok(traj)
}

/// Response of `ẋ = −γx + δ(t − σ)`.
pub fn green_first_order(t: f64, sigma: f64, gamma: f64) -> f64 {
    if t < sigma {
        0.0
    } else {
        (-gamma * (t - sigma)).exp()
    }
}

/// Response of `(d/dt + γ)² y = δ(t − σ)`.
pub fn green_second_order(t: f64, sigma: f64, gamma: f64) -> f64 {
    if t < sigma {
        0.0
    } else {
        (t - sigma) * (-gamma * (t - sigma)).exp()
    }
}
