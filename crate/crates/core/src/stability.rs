//! Numeric stability diagnostics: Lyapunov rates, linearized classification,
//! exponential-bound checks and decay/boundedness estimates on trajectories.
//!
//! These are falsifiable checks on sampled data, not proofs.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::field::{gradient, jacobian, DiffConfig, ScalarField, State, VectorField};
use crate::linalg::eigenvalues;
use crate::signal::differentiate;
use crate::trajectory::Trajectory;

/// Default tolerance on `|f(xe)|` for accepting an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;

type TimeScalar = Arc<dyn Fn(f64, &State) -> f64 + Send + Sync>;
type TimeGradient = Arc<dyn Fn(f64, &State) -> (f64, State) + Send + Sync>;

/// Candidate Lyapunov function `V(t, x)`.
#[derive(Clone)]
pub struct LyapunovCandidate {
    dim: usize,
    v: TimeScalar,
    /// `(∂V/∂t, ∂V/∂x)` when known in closed form.
    grad: Option<TimeGradient>,
    form: Option<DMatrix<f64>>,
}

impl fmt::Debug for LyapunovCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovCandidate")
            .field("dim", &self.dim)
            .field("exact_gradient", &self.grad.is_some())
            .field("form", &self.form)
            .finish()
    }
}

impl LyapunovCandidate {
    pub fn new(dim: usize, v: impl Fn(f64, &State) -> f64 + Send + Sync + 'static) -> Self {
        LyapunovCandidate {
            dim,
            v: Arc::new(v),
            grad: None,
            form: None,
        }
    }

    /// Time-independent candidate.
    pub fn autonomous(dim: usize, v: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        LyapunovCandidate::new(dim, move |_, x| v(x))
    }

    pub fn with_gradient(
        mut self,
        grad: impl Fn(f64, &State) -> (f64, State) + Send + Sync + 'static,
    ) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    /// `V(x) = xᵀPx` with symmetric `P`.
    pub fn quadratic(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::invalid("P", "must be square"));
        }
        let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if (&p - p.transpose()).iter().any(|v| v.abs() > 1e-12 * scale) {
            return Err(Error::invalid("P", "must be symmetric"));
        }
        let dim = p.nrows();
        let q = p.clone();
        Ok(LyapunovCandidate {
            dim,
            v: Arc::new(move |_, x| (x.transpose() * &q * x)[(0, 0)]),
            grad: None,
            form: Some(p),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn form(&self) -> Option<&DMatrix<f64>> {
        self.form.as_ref()
    }

    pub fn value(&self, t: f64, x: &State) -> f64 {
        (self.v)(t, x)
    }
}

/// `V̇ = ∂V/∂t + ∇V·f(x)`.
///
/// Quadratic forms use `2xᵀPf(x)` exactly; candidates with a supplied
/// gradient use it; otherwise both partials are central differences.
pub fn lyapunov_rate(
    cand: &LyapunovCandidate,
    f: &VectorField,
    t: f64,
    x: &State,
    cfg: &DiffConfig,
) -> Result<f64> {
    check_dim("candidate dimension", f.dim(), cand.dim)?;
    let fx = f.try_eval(x)?;
    if let Some(p) = &cand.form {
        return Ok(2.0 * (x.transpose() * p * &fx)[(0, 0)]);
    }
    if let Some(grad) = &cand.grad {
        let (dt, dx) = grad(t, x);
        check_dim("candidate gradient", x.len(), dx.len())?;
        return Ok(dt + dx.dot(&fx));
    }
    let frozen = {
        let v = cand.v.clone();
        ScalarField::new(cand.dim, move |y| v(t, y))
    };
    let dx = gradient(&frozen, x, cfg)?;
    let h = cfg.step * t.abs().max(1.0);
    let dt = (cand.value(t + h, x) - cand.value(t - h, x)) / (2.0 * h);
    Ok(dt + dx.dot(&fx))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    AsymptoticallyStable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub classification: Classification,
    pub eigenvalues: Vec<Complex64>,
    /// `−max Re λ` when asymptotically stable.
    pub decay_rate: Option<f64>,
}

impl StabilityVerdict {
    /// Verdict from a linearization's spectrum. Real parts within `zero_tol`
    /// of zero count as zero.
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>, zero_tol: f64) -> Self {
        let max_re = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        let (classification, decay_rate) = if eigenvalues.is_empty() {
            (Classification::Inconclusive, None)
        } else if max_re > zero_tol {
            (Classification::Unstable, None)
        } else if max_re < -zero_tol {
            (Classification::AsymptoticallyStable, Some(-max_re))
        } else {
            (Classification::Inconclusive, None)
        };
        StabilityVerdict {
            classification,
            eigenvalues,
            decay_rate,
        }
    }
}

/// Classify `xe` by the eigenvalues of the Jacobian of `f` there.
pub fn classify_equilibrium(
    f: &VectorField,
    xe: &State,
    cfg: &DiffConfig,
) -> Result<StabilityVerdict> {
    classify_equilibrium_with_tol(f, xe, cfg, EQUILIBRIUM_TOL)
}

pub fn classify_equilibrium_with_tol(
    f: &VectorField,
    xe: &State,
    cfg: &DiffConfig,
    tol: f64,
) -> Result<StabilityVerdict> {
    let residual = f.try_eval(xe)?.norm();
    if !(residual < tol) {
        return Err(Error::NotEquilibrium { residual });
    }
    let j = jacobian(f, xe, cfg)?;
    // Finite-difference Jacobians carry O(step²) noise; treat real parts
    // below that level as zero.
    let scale = j.norm().max(1.0);
    let zero_tol = if f.has_exact_jacobian() {
        1e-12 * scale
    } else {
        1e-7 * scale
    };
    Ok(StabilityVerdict::from_eigenvalues(
        eigenvalues(&j),
        zero_tol,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub holds: bool,
    pub first_violation: Option<f64>,
}

/// Exponential-stability constants `c1|x|ᶜ ≤ V ≤ c2|x|ᶜ`, `V̇ ≤ −c3|x|ᶜ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentialBounds {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl ExponentialBounds {
    fn validate(&self) -> Result<()> {
        if [self.c, self.c1, self.c2, self.c3]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::invalid(
                "bounds",
                "constants must be positive and finite",
            ));
        }
        if self.c1 > self.c2 {
            return Err(Error::invalid("c1", "must not exceed c2"));
        }
        Ok(())
    }
}

/// Check the exponential bounds at every sample of `traj`.
///
/// `V̇` along the trajectory is obtained by differencing the sampled
/// `V(t_i, x_i)`. Comparisons allow a relative slack of `1e-9` so that
/// bounds holding with equality are not flagged by rounding.
pub fn check_exponential_bounds(
    traj: &Trajectory,
    cand: &LyapunovCandidate,
    bounds: &ExponentialBounds,
) -> Result<BoundCheck> {
    bounds.validate()?;
    if let Some(x) = traj.states.first() {
        check_dim("candidate dimension", cand.dim, x.len())?;
    }
    let values: Vec<State> = traj
        .times()
        .zip(&traj.states)
        .map(|(t, x)| State::from_element(1, cand.value(t, x)))
        .collect();
    let rates = differentiate(&values, traj.dt);
    let slack = 1e-9;
    for (i, x) in traj.states.iter().enumerate() {
        let r = x.norm().powf(bounds.c);
        let v = values[i][0];
        let vdot = rates[i][0];
        let tol = slack * (r + v.abs());
        let ok = bounds.c1 * r <= v + tol
            && v <= bounds.c2 * r + tol
            && vdot <= -bounds.c3 * r + tol + slack * vdot.abs();
        if !ok {
            return Ok(BoundCheck {
                holds: false,
                first_violation: Some(traj.time(i)),
            });
        }
    }
    Ok(BoundCheck {
        holds: true,
        first_violation: None,
    })
}

/// Negated least-squares slope of `ln|x(t)|` over the last half of `traj`.
pub fn estimate_decay_rate(traj: &Trajectory) -> Result<f64> {
    estimate_decay_rate_over(traj, 0.5)
}

/// As [`estimate_decay_rate`], fitting the trailing `window` fraction.
pub fn estimate_decay_rate_over(traj: &Trajectory, window: f64) -> Result<f64> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::invalid("window", "must lie in (0, 1]"));
    }
    let n = traj.len();
    let start = ((1.0 - window) * (n.saturating_sub(1)) as f64).floor() as usize;
    if n < 2 || n - start < 2 {
        return Err(Error::invalid(
            "trajectory",
            "needs at least two samples in the fitting window",
        ));
    }
    let mut pts = Vec::with_capacity(n - start);
    for i in start..n {
        let norm = traj.states[i].norm();
        if norm == 0.0 {
            return Err(Error::ZeroTrajectory { time: traj.time(i) });
        }
        pts.push((traj.time(i), norm.ln()));
    }
    Ok(-least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    sxy / sxx
}

/// Largest `|x(t)|` over `t ≥ settle_fraction·T` across the ensemble.
pub fn ultimate_bound_estimate(ensemble: &[Trajectory], settle_fraction: f64) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::invalid("ensemble", "must be nonempty"));
    }
    if !(settle_fraction > 0.0 && settle_fraction < 1.0) {
        return Err(Error::invalid("settle_fraction", "must lie in (0, 1)"));
    }
    let mut bound = 0.0f64;
    for traj in ensemble {
        let t_settle = traj.t0 + settle_fraction * (traj.t_end() - traj.t0);
        for (t, x) in traj.times().zip(&traj.states) {
            if t >= t_settle - 1e-12 * traj.dt {
                bound = bound.max(x.norm());
            }
        }
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate, integrate_field, IntegratorConfig};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn decay() -> VectorField {
        VectorField::new(1, |x| -x)
    }

    fn rotation() -> VectorField {
        VectorField::new(2, |x| dvector![x[1], -x[0]])
    }

    #[test]
    fn rate_of_square_under_decay() {
        let cand = LyapunovCandidate::autonomous(1, |x| x[0] * x[0]);
        let cfg = DiffConfig::default();
        for x in [-2.0, -0.3, 0.0, 0.7, 1.5] {
            let r = lyapunov_rate(&cand, &decay(), 0.0, &dvector![x], &cfg).unwrap();
            assert_abs_diff_eq!(r, -2.0 * x * x, epsilon = 1e-8);
            assert!(r <= 1e-12);
        }
        let zero = lyapunov_rate(&cand, &VectorField::zero(1), 0.0, &dvector![0.4], &cfg).unwrap();
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rotation_conserves_norm() {
        let cand = LyapunovCandidate::quadratic(DMatrix::identity(2, 2)).unwrap();
        let r = lyapunov_rate(
            &cand,
            &rotation(),
            0.0,
            &dvector![0.3, -1.2],
            &DiffConfig::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(r, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn time_dependent_candidate() {
        let cand = LyapunovCandidate::new(1, |t, x| (1.0 + t * t) * x[0] * x[0]);
        let exact = cand
            .clone()
            .with_gradient(|t, x| (2.0 * t * x[0] * x[0], dvector![2.0 * (1.0 + t * t) * x[0]]));
        let cfg = DiffConfig::default();
        let (t, x) = (0.8, dvector![0.6]);
        let a = lyapunov_rate(&cand, &decay(), t, &x, &cfg).unwrap();
        let b = lyapunov_rate(&exact, &decay(), t, &x, &cfg).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-8);
    }

    #[test]
    fn asymmetric_form_rejected() {
        assert!(LyapunovCandidate::quadratic(dmatrix![1.0, 2.0; 0.0, 1.0]).is_err());
    }

    #[test]
    fn classification_examples() {
        let cfg = DiffConfig::default();
        let v = classify_equilibrium(&decay(), &dvector![0.0], &cfg).unwrap();
        assert_eq!(v.classification, Classification::AsymptoticallyStable);
        assert_abs_diff_eq!(v.decay_rate.unwrap(), 1.0, epsilon = 1e-8);
        let grow = VectorField::new(1, |x| x.clone());
        assert_eq!(
            classify_equilibrium(&grow, &dvector![0.0], &cfg)
                .unwrap()
                .classification,
            Classification::Unstable
        );
        assert_eq!(
            classify_equilibrium(&rotation(), &dvector![0.0, 0.0], &cfg)
                .unwrap()
                .classification,
            Classification::Inconclusive
        );
        assert!(matches!(
            classify_equilibrium(&decay(), &dvector![1.0], &cfg),
            Err(Error::NotEquilibrium { .. })
        ));
    }

    #[test]
    fn verdict_serializes() {
        let v = StabilityVerdict::from_eigenvalues(vec![Complex64::new(-1.0, 2.0)], 1e-12);
        let json = serde_json::to_string(&v).unwrap();
        assert!(json.contains("asymptotically-stable"), "{json}");
    }

    #[test]
    fn exponential_bounds_hold_for_decay() {
        let traj = integrate_field(
            &decay(),
            &dvector![1.5],
            0.0,
            5.0,
            &IntegratorConfig::rk4(1e-2),
        )
        .unwrap();
        let cand = LyapunovCandidate::autonomous(1, |x| x[0] * x[0]);
        let ok = ExponentialBounds {
            c: 2.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        };
        assert_eq!(
            check_exponential_bounds(&traj, &cand, &ok).unwrap(),
            BoundCheck {
                holds: true,
                first_violation: None
            }
        );
        let tight = ExponentialBounds {
            c2: 0.5,
            c1: 0.5,
            ..ok
        };
        let res = check_exponential_bounds(&traj, &cand, &tight).unwrap();
        assert_eq!(res.first_violation, Some(0.0));
        let zero = integrate_field(
            &decay(),
            &dvector![0.0],
            0.0,
            1.0,
            &IntegratorConfig::rk4(0.1),
        )
        .unwrap();
        assert!(check_exponential_bounds(&zero, &cand, &ok).unwrap().holds);
        let bad = ExponentialBounds { c1: 2.0, ..ok };
        assert!(check_exponential_bounds(&traj, &cand, &bad).is_err());
    }

    fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> Trajectory {
        let n = (t_end / dt).round() as usize;
        Trajectory::from_states(
            0.0,
            dt,
            (0..=n).map(|i| dvector![f(i as f64 * dt)]).collect(),
        )
    }

    #[test]
    fn decay_rate_examples() {
        let r = estimate_decay_rate(&synthetic(|t| (-2.0 * t).exp(), 5.0, 1e-2)).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-3);
        let c = estimate_decay_rate(&synthetic(|_| 3.0, 5.0, 1e-2)).unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-12);
        let wobble = estimate_decay_rate(&synthetic(
            |t| (-t).exp() * (1.0 + 0.1 * (10.0 * t).sin()),
            10.0,
            1e-3,
        ))
        .unwrap();
        assert_abs_diff_eq!(wobble, 1.0, epsilon = 5e-2);
        let dead = synthetic(|t| if t > 2.0 { 0.0 } else { 1.0 }, 5.0, 1e-2);
        assert!(matches!(
            estimate_decay_rate(&dead),
            Err(Error::ZeroTrajectory { .. })
        ));
    }

    #[test]
    fn forced_response_bound() {
        let cfg = IntegratorConfig::rk4(1e-2);
        let ensemble: Vec<_> = [-2.0, 0.0, 1.0, 3.0]
            .iter()
            .map(|&x0| {
                integrate(
                    |t, x| -x + dvector![t.sin()],
                    &dvector![x0],
                    0.0,
                    40.0,
                    &cfg,
                )
                .unwrap()
            })
            .collect();
        let b = ultimate_bound_estimate(&ensemble, 0.5).unwrap();
        assert!((b - 0.5f64.sqrt()).abs() < 0.1 * 0.5f64.sqrt(), "{b}");
        let constant = synthetic(|_| 0.7, 2.0, 0.1);
        assert_abs_diff_eq!(
            ultimate_bound_estimate(&[constant], 0.3).unwrap(),
            0.7,
            epsilon = 1e-15
        );
        assert!(ultimate_bound_estimate(&[], 0.5).is_err());
    }
}
