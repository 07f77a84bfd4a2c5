//! Describing-function (harmonic balance) analysis of limit cycles.
//!
//! A loop splits into a linear block `G(iω)` and a quasi-linear element
//! `N(A, ω)` fed by the negated output. A sinusoidal oscillation of
//! amplitude `A` and frequency `ω` balances when `1 + G(iω)N(A, ω) = 0`.
//! For the Van der Pol oscillator `ẍ + α(x² − 1)ẋ + x = 0` the split is
//! `G = α/(p² − αp + 1)` and `N = iωA²/4`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{dvector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{State, VectorField};
use crate::ode::{integrate_field, IntegratorConfig};
use crate::quad::gauss_legendre;
use crate::trajectory::Trajectory;

type LinearBlock = Arc<dyn Fn(f64) -> Result<Complex64> + Send + Sync>;
type QuasiLinear = Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>;

/// Residual magnitude accepted as a balance solution.
pub const BALANCE_TOL: f64 = 1e-10;

#[derive(Clone)]
pub struct QuasiLinearLoop {
    g: LinearBlock,
    n: QuasiLinear,
}

impl fmt::Debug for QuasiLinearLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("QuasiLinearLoop")
    }
}

impl QuasiLinearLoop {
    pub fn new(
        g: impl Fn(f64) -> Result<Complex64> + Send + Sync + 'static,
        n: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        QuasiLinearLoop {
            g: Arc::new(g),
            n: Arc::new(n),
        }
    }

    pub fn van_der_pol(alpha: f64) -> Self {
        QuasiLinearLoop::new(move |w| vdp_linear_block(alpha, w), vdp_describing_function)
    }

    /// Same loop with the linear block multiplied by `factor`.
    pub fn with_scaled_linear_block(&self, factor: f64) -> Self {
        let g = self.g.clone();
        QuasiLinearLoop {
            g: Arc::new(move |w| g(w).map(|v| v * factor)),
            n: self.n.clone(),
        }
    }

    pub fn linear_block(&self, omega: f64) -> Result<Complex64> {
        (self.g)(omega)
    }

    pub fn describing_function(&self, amplitude: f64, omega: f64) -> Complex64 {
        (self.n)(amplitude, omega)
    }

    /// `1 + G(iω)N(A, ω)`.
    pub fn balance(&self, amplitude: f64, omega: f64) -> Result<Complex64> {
        Ok(1.0 + self.linear_block(omega)? * self.describing_function(amplitude, omega))
    }
}

/// `N(A, ω) = iωA²/4`.
pub fn vdp_describing_function(amplitude: f64, omega: f64) -> Complex64 {
    Complex64::new(0.0, omega * amplitude * amplitude / 4.0)
}

/// `G(iω) = α/((iω)² − α(iω) + 1)`.
pub fn vdp_linear_block(alpha: f64, omega: f64) -> Result<Complex64> {
    let s = Complex64::new(0.0, omega);
    let den = s * s - alpha * s + 1.0;
    if den.norm() <= 1e-300 {
        return Err(Error::Singular(format!(
            "linear block resonates at omega = {omega}"
        )));
    }
    Ok(alpha / den)
}

/// Closed-loop eigenvalues `−α(A² − 4)/8 ± √(α²(A² − 4)²/64 − 1)`.
pub fn vdp_eigen_locus(amplitude: f64, alpha: f64) -> (Complex64, Complex64) {
    let d = amplitude * amplitude - 4.0;
    let centre = Complex64::new(-alpha * d / 8.0, 0.0);
    let root = Complex64::new(alpha * alpha * d * d / 64.0 - 1.0, 0.0).sqrt();
    (centre + root, centre - root)
}

/// First-harmonic describing function of a nonlinearity `f(x, ẋ)` driven by
/// `x = A sin ωt`: `N = (b₁ + i a₁)/A` with the Fourier coefficients of the
/// response.
pub fn first_harmonic(
    f: impl Fn(f64, f64) -> f64,
    amplitude: f64,
    omega: f64,
) -> Result<Complex64> {
    if !(amplitude > 0.0) {
        return Err(Error::invalid("A", "amplitude must be positive"));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let resp = |th: f64| f(amplitude * th.sin(), amplitude * omega * th.cos());
    let b1 = gauss_legendre(|th| resp(th) * th.sin(), 0.0, tau, 64) / std::f64::consts::PI;
    let a1 = gauss_legendre(|th| resp(th) * th.cos(), 0.0, tau, 64) / std::f64::consts::PI;
    Ok(Complex64::new(b1, a1) / amplitude)
}

/// [`first_harmonic`] for a static (memoryless) nonlinearity.
pub fn static_describing_function(f: impl Fn(f64) -> f64, amplitude: f64) -> Result<Complex64> {
    first_harmonic(|x, _| f(x), amplitude, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitCyclePrediction {
    #[serde(rename = "A")]
    pub amplitude: f64,
    pub omega: f64,
    pub residual: f64,
}

const MAX_NEWTON: usize = 100;

/// Solve `1 + G(iω)N(A, ω) = 0` for `(A, ω)` with `A, ω > 0`.
///
/// Damped Newton with a finite-difference Jacobian from the given guess;
/// if that fails, restarts from a grid of scaled seeds. Solutions must keep
/// both unknowns positive.
pub fn harmonic_balance_solve(
    lp: &QuasiLinearLoop,
    a0: f64,
    w0: f64,
) -> Result<LimitCyclePrediction> {
    if !(a0 > 0.0 && w0 > 0.0 && a0.is_finite() && w0.is_finite()) {
        return Err(Error::invalid(
            "initial guess",
            "A0 and omega0 must be positive",
        ));
    }
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    let scales = [1.0, 0.5, 2.0, 0.25, 4.0, 0.1, 10.0];
    for &sa in &scales {
        for &sw in &scales {
            match newton(lp, sa * a0, sw * w0) {
                Ok(p) => return Ok(p),
                Err((iters, res)) => {
                    iterations += iters;
                    best = best.min(res);
                }
            }
        }
    }
    Err(Error::NoConvergence {
        iterations,
        residual: best,
    })
}

fn residual_vec(lp: &QuasiLinearLoop, a: f64, w: f64) -> Option<Vector2<f64>> {
    let r = lp.balance(a, w).ok()?;
    (r.re.is_finite() && r.im.is_finite()).then(|| Vector2::new(r.re, r.im))
}

fn newton(
    lp: &QuasiLinearLoop,
    a0: f64,
    w0: f64,
) -> std::result::Result<LimitCyclePrediction, (usize, f64)> {
    let (mut a, mut w) = (a0, w0);
    let mut r = residual_vec(lp, a, w).ok_or((0, f64::INFINITY))?;
    for it in 0..=MAX_NEWTON {
        let norm = r.norm();
        if norm < BALANCE_TOL {
            // Polish: a couple more steps cost nothing and tighten (A, ω).
            let polished = polish(lp, a, w, r);
            return Ok(LimitCyclePrediction {
                amplitude: polished.0,
                omega: polished.1,
                residual: polished.2,
            });
        }
        if it == MAX_NEWTON {
            return Err((it, norm));
        }
        let step = newton_step(lp, a, w, &r).ok_or((it, norm))?;
        let mut lambda = 1.0;
        loop {
            let (na, nw) = (a - lambda * step[0], w - lambda * step[1]);
            if na > 0.0 && nw > 0.0 {
                if let Some(nr) = residual_vec(lp, na, nw) {
                    if nr.norm() < norm {
                        a = na;
                        w = nw;
                        r = nr;
                        break;
                    }
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err((it, norm));
            }
        }
    }
    Err((MAX_NEWTON, r.norm()))
}

fn newton_step(lp: &QuasiLinearLoop, a: f64, w: f64, r: &Vector2<f64>) -> Option<Vector2<f64>> {
    let ha = 1e-7 * a.abs().max(1.0);
    let hw = 1e-7 * w.abs().max(1.0);
    let col = |da: f64, dw: f64, h: f64| -> Option<Vector2<f64>> {
        let plus = residual_vec(lp, a + da, w + dw)?;
        // Stay inside the positive quadrant for small unknowns.
        let minus = if a - da > 0.0 && w - dw > 0.0 {
            residual_vec(lp, a - da, w - dw)?
        } else {
            *r
        };
        let span = if a - da > 0.0 && w - dw > 0.0 {
            2.0 * h
        } else {
            h
        };
        Some((plus - minus) / span)
    };
    let j = Matrix2::from_columns(&[col(ha, 0.0, ha)?, col(0.0, hw, hw)?]);
    j.try_inverse().map(|inv| inv * r)
}

fn polish(lp: &QuasiLinearLoop, mut a: f64, mut w: f64, mut r: Vector2<f64>) -> (f64, f64, f64) {
    for _ in 0..3 {
        let Some(step) = newton_step(lp, a, w, &r) else {
            break;
        };
        let (na, nw) = (a - step[0], w - step[1]);
        match residual_vec(lp, na, nw) {
            Some(nr) if na > 0.0 && nw > 0.0 && nr.norm() <= r.norm() => {
                a = na;
                w = nw;
                r = nr;
            }
            _ => break,
        }
    }
    (a, w, r.norm())
}

/// Van der Pol oscillator as a first-order field on `(x, ẋ)`.
pub fn van_der_pol_field(alpha: f64) -> VectorField {
    VectorField::new(2, move |z| {
        dvector![z[1], -alpha * (z[0] * z[0] - 1.0) * z[1] - z[0]]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycleMeasurement {
    pub amplitude: f64,
    pub period: f64,
    /// Refined extremum magnitudes used for the amplitude.
    pub peaks: Vec<f64>,
}

/// Simulate the Van der Pol oscillator and measure its settled cycle.
///
/// Amplitude is the mean magnitude of the last ten local extrema of `x`
/// (three-point detection with parabolic refinement); the period is the
/// mean spacing of upward zero crossings over the second half of the run.
pub fn vdp_simulate_amplitude(
    alpha: f64,
    x0: &State,
    t_end: f64,
    dt: f64,
) -> Result<(LimitCycleMeasurement, Trajectory)> {
    let traj = integrate_field(
        &van_der_pol_field(alpha),
        x0,
        0.0,
        t_end,
        &IntegratorConfig::rk4(dt),
    )?;
    let meas = measure_cycle(&traj.state_component(0), dt)?;
    Ok((meas, traj))
}

/// Cycle amplitude and period from a uniformly sampled signal.
pub fn measure_cycle(x: &[f64], dt: f64) -> Result<LimitCycleMeasurement> {
    let mut peaks = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        let (l, c, r) = (x[i - 1], x[i], x[i + 1]);
        let is_max = c > l && c >= r;
        let is_min = c < l && c <= r;
        if is_max || is_min {
            let curv = l - 2.0 * c + r;
            let refined = if curv != 0.0 {
                let off = 0.5 * (l - r) / curv;
                c - 0.25 * (l - r) * off
            } else {
                c
            };
            peaks.push(refined.abs());
        }
    }
    if peaks.len() < 10 {
        return Err(Error::invalid("T", "too short to observe ten extrema"));
    }
    let last: Vec<f64> = peaks[peaks.len() - 10..].to_vec();
    let amplitude = last.iter().sum::<f64>() / last.len() as f64;

    let half = x.len() / 2;
    let mut crossings = Vec::new();
    for i in half.max(1)..x.len() {
        if x[i - 1] < 0.0 && x[i] >= 0.0 {
            let frac = x[i - 1] / (x[i - 1] - x[i]);
            crossings.push((i as f64 - 1.0 + frac) * dt);
        }
    }
    if crossings.len() < 2 {
        return Err(Error::invalid("T", "too short to observe two periods"));
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Ok(LimitCycleMeasurement {
        amplitude,
        period,
        peaks: last,
    })
}
