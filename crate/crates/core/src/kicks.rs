//! Delta-function approximations and random-kick Langevin dynamics.
//!
//! The Langevin model is `m·v̇ = −γv + F(t)` with `F` a train of Dirac kicks
//! of strength `±s` arriving as a Poisson process with mean spacing `t0`.
//! Its fluctuation strength is `Q = s²/t0`, and the stationary velocity
//! variance is `Q/(2γm)`.
//!
//! Randomness comes from ChaCha8 seeded with the process seed; run `k` of an
//! ensemble uses stream `k` of that seed, so any run can be reproduced in
//! isolation and results do not depend on thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::stability::least_squares_slope;
use crate::trajectory::{Event, Trajectory};

/// `δ_α(t) = e^{−t²/α}/√(πα)`.
pub fn gaussian_pulse(t: f64, alpha: f64) -> f64 {
    (-t * t / alpha).exp() / (std::f64::consts::PI * alpha).sqrt()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("alpha", "must be positive and finite"))
    }
}

/// `∫_{−∞}^{T} δ_α(t) dt`, computed as `1/2 + ∫₀ᵀ δ_α` by quadrature.
pub fn heaviside_from_delta(t_upper: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let width = alpha.sqrt();
    // Beyond 40 widths the integrand is below f64 resolution.
    let t = t_upper.clamp(-40.0 * width, 40.0 * width);
    if t == 0.0 {
        return Ok(0.5);
    }
    let panels = ((t.abs() / width) * 4.0).ceil().clamp(8.0, 1.0e4) as usize;
    Ok(0.5 + gauss_legendre(|s| gaussian_pulse(s, alpha), 0.0, t, panels))
}

/// Result of integrating a delta function composed with a phase function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeIntegral {
    /// `∫ δ_α(φ(t)) φ̇(t) dt`, tends to 1 past the root.
    pub spike: f64,
    /// `∫ δ_α(φ(t)) dt`, tends to `1/φ̇(t_root)` past the root.
    pub plain: f64,
}

/// Integrate `δ_α(φ(t))` over `[lower, T]`, with and without the `φ̇` factor.
///
/// `lower` stands in for −∞ and must lie well before the root. The phase
/// needs a single simple root in the window; more than one is an error.
pub fn spike_integral(
    phase: impl Fn(f64) -> f64,
    lower: f64,
    t_upper: f64,
    alpha: f64,
) -> Result<SpikeIntegral> {
    check_alpha(alpha)?;
    if !(t_upper > lower) {
        return Err(Error::invalid("T", "must exceed the lower limit"));
    }
    let scan = 4000;
    let h = (t_upper - lower) / scan as f64;
    let mut brackets = Vec::new();
    let mut prev = phase(lower);
    for i in 1..=scan {
        let t = lower + i as f64 * h;
        let cur = phase(t);
        if prev == 0.0 || prev.signum() != cur.signum() && cur != 0.0 {
            brackets.push((t - h, t));
        }
        prev = cur;
    }
    if prev == 0.0 {
        brackets.push((t_upper - h, t_upper));
    }
    if brackets.len() > 1 {
        return Err(Error::MultipleRoots {
            count: brackets.len(),
        });
    }
    let dphase = |t: f64| {
        let e = 1e-6 * t.abs().max(1.0);
        (phase(t + e) - phase(t - e)) / (2.0 * e)
    };
    let spike = |t: f64| gaussian_pulse(phase(t), alpha) * dphase(t);
    let plain = |t: f64| gaussian_pulse(phase(t), alpha);

    let mut cuts = vec![lower];
    if let Some(&(a, b)) = brackets.first() {
        let root = bisect(&phase, a, b);
        let slope = dphase(root).abs().max(1e-12);
        let w = 40.0 * alpha.sqrt() / slope;
        for c in [root - w, root, root + w] {
            if c > lower && c < t_upper {
                cuts.push(c);
            }
        }
    }
    cuts.push(t_upper);
    let integrate = |g: &dyn Fn(f64) -> f64| {
        cuts.windows(2)
            .map(|p| gauss_legendre(g, p[0], p[1], 400))
            .sum::<f64>()
    };
    Ok(SpikeIntegral {
        spike: integrate(&spike),
        plain: integrate(&plain),
    })
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa0 = f(a);
    if fa0 == 0.0 {
        return a;
    }
    let mut sa = fa0.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() < 1e-15 * m.abs().max(1.0) {
            return m;
        }
        if fm.signum() == sa {
            a = m;
            sa = fm.signum();
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Poisson train of symmetric `±s` kicks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KickProcess {
    pub strength: f64,
    pub mean_free_time: f64,
    pub seed: u64,
}

impl KickProcess {
    pub fn new(strength: f64, mean_free_time: f64, seed: u64) -> Result<Self> {
        let p = KickProcess {
            strength,
            mean_free_time,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    /// Kick strength `s = √(Q·t0)` reproducing fluctuation strength `Q`.
    pub fn with_fluctuation(q: f64, mean_free_time: f64, seed: u64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return Err(Error::invalid("Q", "must be non-negative and finite"));
        }
        KickProcess::new((q * mean_free_time).sqrt(), mean_free_time, seed)
    }

    fn validate(&self) -> Result<()> {
        if !(self.mean_free_time > 0.0 && self.mean_free_time.is_finite()) {
            return Err(Error::invalid("t0", "mean free time must be positive"));
        }
        if !self.strength.is_finite() {
            return Err(Error::invalid("s", "kick strength must be finite"));
        }
        Ok(())
    }

    /// `Q = s²/t0`.
    pub fn fluctuation_strength(&self) -> f64 {
        self.strength * self.strength / self.mean_free_time
    }

    /// Generator for ensemble member `run`.
    pub fn rng_for_run(&self, run: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(run);
        rng
    }

    /// Kick times and signs in `(0, T)` drawn from `rng`.
    pub fn sample(&self, rng: &mut ChaCha8Rng, t_end: f64) -> Vec<(f64, f64)> {
        let exp = Exp::new(1.0 / self.mean_free_time).expect("rate is positive");
        let mut out = Vec::new();
        let mut t = 0.0;
        loop {
            t += exp.sample(rng);
            if t >= t_end {
                return out;
            }
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            out.push((t, sign));
        }
    }
}

/// Poisson arrival times over `(0, T)` for run 0 of the process seed.
pub fn sample_kick_times(proc: &KickProcess, t_end: f64) -> Result<Vec<f64>> {
    proc.validate()?;
    if !(t_end >= 0.0) {
        return Err(Error::invalid("T", "must be non-negative"));
    }
    let mut rng = proc.rng_for_run(0);
    Ok(proc
        .sample(&mut rng, t_end)
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LangevinParams {
    pub gamma: f64,
    pub m: f64,
    pub q: f64,
}

impl LangevinParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::invalid("m", "must be positive"));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(Error::invalid("Q", "must be non-negative"));
        }
        Ok(())
    }

    /// Stationary `⟨v²⟩ = Q/(2γm)`.
    pub fn stationary_variance(&self) -> f64 {
        self.q / (2.0 * self.gamma * self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    pub kb: f64,
    pub t_abs: f64,
}

/// Einstein relation `Q = 2γ k_B T`.
pub fn einstein_q(gamma: f64, thermal: &ThermalParams) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::invalid("gamma", "must be non-negative"));
    }
    if !(thermal.kb > 0.0 && thermal.t_abs > 0.0) {
        return Err(Error::invalid("thermal", "k_B and T must be positive"));
    }
    Ok(2.0 * gamma * thermal.kb * thermal.t_abs)
}

/// Advice when the step is not small against the mean free time.
pub fn dt_warning(dt: f64, proc: &KickProcess) -> Option<String> {
    (dt > 0.1 * proc.mean_free_time).then(|| {
        format!(
            "dt = {dt} is not small against the mean free time t0 = {}; sampled velocities are coarse",
            proc.mean_free_time
        )
    })
}

/// Velocity samples plus the `(time, strength)` kicks that produced them.
type Series = (Vec<f64>, Vec<(f64, f64)>);

/// Velocity samples `v(i·dt)` for one run.
///
/// Between kicks the velocity decays by the exact factor `e^{−(γ/m)Δt}`;
/// kicks add `±s/m` at their sampled times.
pub fn langevin_series(
    params: &LangevinParams,
    proc: &KickProcess,
    v0: f64,
    t_end: f64,
    dt: f64,
    run: u64,
) -> Result<Series> {
    params.validate()?;
    proc.validate()?;
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::invalid("dt", "dt and T must be positive"));
    }
    let n = (t_end / dt).round() as usize;
    let t_span = n as f64 * dt;
    let mut rng = proc.rng_for_run(run);
    let kicks = proc.sample(&mut rng, t_span);
    let rate = params.gamma / params.m;
    let jump = proc.strength / params.m;
    let step_decay = (-rate * dt).exp();

    let mut out = Vec::with_capacity(n + 1);
    let mut v = v0;
    out.push(v);
    let mut next = kicks.iter().peekable();
    for i in 0..n {
        let (t_a, t_b) = (i as f64 * dt, (i + 1) as f64 * dt);
        let mut t = t_a;
        let mut touched = false;
        while let Some(&&(tk, sign)) = next.peek() {
            if tk >= t_b {
                break;
            }
            v = v * (-rate * (tk - t)).exp() + sign * jump;
            t = tk;
            touched = true;
            next.next();
        }
        v *= if touched {
            (-rate * (t_b - t)).exp()
        } else {
            step_decay
        };
        out.push(v);
    }
    Ok((out, kicks))
}

/// One Langevin run as a trajectory with `kick` events, using stream `run`.
pub fn simulate_langevin(
    params: &LangevinParams,
    proc: &KickProcess,
    v0: f64,
    t_end: f64,
    dt: f64,
    run: u64,
) -> Result<Trajectory> {
    let (series, kicks) = langevin_series(params, proc, v0, t_end, dt, run)?;
    let states = series
        .into_iter()
        .map(|v| nalgebra::DVector::from_element(1, v))
        .collect();
    let mut traj = Trajectory::from_states(0.0, dt, states);
    traj.events = kicks.iter().map(|&(t, _)| Event::new(t, "kick")).collect();
    traj.seed = Some(proc.seed);
    Ok(traj)
}

/// Below this the pooled autocorrelation is dominated by sampling noise
/// and biases the log-linear fit.
pub const DECAY_FIT_FLOOR: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub runs: usize,
    /// Mean over runs and over sample times `t ≥ t_start`.
    pub mean: f64,
    pub var: f64,
    pub lags: Vec<f64>,
    /// Autocorrelation normalized by `var`, one value per lag.
    pub autocorr: Vec<f64>,
    /// Negated slope of `ln autocorr` against lag, fitted while the
    /// autocorrelation stays above [`DECAY_FIT_FLOOR`].
    pub decay_constant: Option<f64>,
    pub mean_by_time: Vec<f64>,
    pub var_by_time: Vec<f64>,
}

/// Statistics of equally sampled scalar series (first state component).
///
/// Lags are multiples of the sample spacing: `0, 1, …, max_lag_steps`.
pub fn ensemble_stats(
    ensemble: &[Trajectory],
    t_start: f64,
    max_lag_steps: usize,
) -> Result<EnsembleStats> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::invalid("ensemble", "must be nonempty"))?;
    let series: Vec<Vec<f64>> = ensemble.iter().map(|t| t.state_component(0)).collect();
    if series.iter().any(|s| s.len() != series[0].len()) {
        return Err(Error::invalid(
            "ensemble",
            "runs must share their sample grid",
        ));
    }
    let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
    series_stats(&refs, first.t0, first.dt, t_start, max_lag_steps)
}

pub fn series_stats(
    series: &[&[f64]],
    t0: f64,
    dt: f64,
    t_start: f64,
    max_lag_steps: usize,
) -> Result<EnsembleStats> {
    let runs = series.len();
    if runs == 0 {
        return Err(Error::invalid("ensemble", "must be nonempty"));
    }
    let len = series[0].len();
    let start = (((t_start - t0) / dt).ceil().max(0.0)) as usize;
    if start >= len {
        return Err(Error::invalid("t_start", "lies beyond the sampled window"));
    }
    let r = runs as f64;
    let mean_by_time: Vec<f64> = (0..len)
        .map(|i| series.iter().map(|s| s[i]).sum::<f64>() / r)
        .collect();
    let var_by_time: Vec<f64> = (0..len)
        .map(|i| {
            series
                .iter()
                .map(|s| (s[i] - mean_by_time[i]).powi(2))
                .sum::<f64>()
                / r
        })
        .collect();

    // Per-run partials are summed in run order so results do not depend on
    // thread scheduling.
    let pooled = |f: &(dyn Fn(&[f64]) -> (f64, usize) + Sync)| -> (f64, usize) {
        let parts: Vec<(f64, usize)> = series.par_iter().map(|s| f(s)).collect();
        parts.iter().fold((0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    };
    let (sum, count) = pooled(&|s| (s[start..].iter().sum(), len - start));
    let mean = sum / count as f64;
    let (sq, _) = pooled(&|s| (s[start..].iter().map(|v| (v - mean).powi(2)).sum(), 0));
    let var = sq / count as f64;

    let max_lag = max_lag_steps.min(len - start - 1);
    let mut lags = Vec::with_capacity(max_lag + 1);
    let mut autocorr = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let (c, n) = pooled(&|s| {
            let tail = &s[start..];
            let c = tail
                .iter()
                .zip(&tail[lag..])
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum();
            (c, tail.len() - lag)
        });
        lags.push(lag as f64 * dt);
        autocorr.push(if var > 0.0 { c / n as f64 / var } else { 0.0 });
    }
    let pts: Vec<(f64, f64)> = lags
        .iter()
        .zip(&autocorr)
        .skip(1)
        .take_while(|(_, &a)| a > DECAY_FIT_FLOOR)
        .map(|(&l, &a)| (l, a.ln()))
        .collect();
    let decay_constant = (pts.len() >= 2).then(|| -least_squares_slope(&pts));
    Ok(EnsembleStats {
        runs,
        mean,
        var,
        lags,
        autocorr,
        decay_constant,
        mean_by_time,
        var_by_time,
    })
}

/// Grid and sampling settings for [`langevin_ensemble`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub v0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub runs: usize,
    /// Start of the stationary window used for pooled statistics.
    pub t_start: f64,
    pub max_lag_steps: usize,
}

/// Run independent Langevin simulations in parallel and summarize them.
pub fn langevin_ensemble(
    params: &LangevinParams,
    proc: &KickProcess,
    spec: &EnsembleSpec,
) -> Result<EnsembleStats> {
    if spec.runs == 0 {
        return Err(Error::invalid("runs", "must be positive"));
    }
    let series = (0..spec.runs as u64)
        .into_par_iter()
        .map(|k| langevin_series(params, proc, spec.v0, spec.t_end, spec.dt, k).map(|(s, _)| s))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
    series_stats(&refs, 0.0, spec.dt, spec.t_start, spec.max_lag_steps)
}
