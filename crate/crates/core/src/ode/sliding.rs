use super::{ensure_finite, step, IntegratorConfig};
use crate::error::{check_dim, Error, Result};
use crate::field::{gradient, DiffConfig, ScalarField, State, VectorField};
use crate::trajectory::{Event, Trajectory};

/// Surface `s(x) = 0` separating the fields `f_plus` (for `s > 0`) and
/// `f_minus` (for `s < 0`).
#[derive(Clone)]
pub struct SwitchingSurface {
    pub s: ScalarField,
    pub f_plus: VectorField,
    pub f_minus: VectorField,
    pub diff: DiffConfig,
}

impl SwitchingSurface {
    pub fn new(s: ScalarField, f_plus: VectorField, f_minus: VectorField) -> Result<Self> {
        check_dim("f_plus dimension", s.dim(), f_plus.dim())?;
        check_dim("f_minus dimension", s.dim(), f_minus.dim())?;
        Ok(SwitchingSurface {
            s,
            f_plus,
            f_minus,
            diff: DiffConfig::default(),
        })
    }

    /// Normal components `(∇s·f⁺, ∇s·f⁻)`.
    fn normal_speeds(&self, x: &State) -> Result<(f64, f64)> {
        let n = gradient(&self.s, x, &self.diff)?;
        Ok((n.dot(&self.f_plus.eval(x)), n.dot(&self.f_minus.eval(x))))
    }

    fn attracting(&self, x: &State) -> Result<bool> {
        let (a, b) = self.normal_speeds(x)?;
        Ok(a < 0.0 && b > 0.0)
    }

    /// Convex combination `α f⁺ + (1 − α) f⁻` tangent to the surface.
    fn sliding_field(&self, x: &State) -> Result<State> {
        let alpha = sliding_alpha(self, x)?;
        Ok(self.f_plus.eval(x) * alpha + self.f_minus.eval(x) * (1.0 - alpha))
    }

    fn region_field(&self, x: &State) -> Result<&VectorField> {
        let s = self.s.eval(x);
        let plus = if s != 0.0 {
            s > 0.0
        } else {
            // On the surface but not sliding: follow whichever field leaves it.
            let (a, _) = self.normal_speeds(x)?;
            a > 0.0
        };
        Ok(if plus { &self.f_plus } else { &self.f_minus })
    }
}

/// Weight `α ∈ [0, 1]` of `f⁺` in the sliding field at `x`.
pub fn sliding_alpha(surface: &SwitchingSurface, x: &State) -> Result<f64> {
    check_dim("state", surface.s.dim(), x.len())?;
    let (a, b) = surface.normal_speeds(x)?;
    let denom = b - a;
    if denom == 0.0 || denom.abs() <= 1e-12 * (a.abs() + b.abs()) {
        return Err(Error::DegenerateSliding);
    }
    Ok((b / denom).clamp(0.0, 1.0))
}

/// Default band half-width: `1e-6 · max(1, |x0|)`.
pub fn default_band(x0: &State) -> f64 {
    1e-6 * x0.norm().max(1.0)
}

/// Fixed-step integration of Filippov dynamics across a switching surface.
///
/// Inside `|s| < band`, when both fields point into the surface, the state
/// follows the sliding field. A step that would cross the surface outside
/// the band is split at the crossing point, found by secant iteration on
/// the step fraction. Entering and leaving sliding is reported as
/// `sliding_enter` and `sliding_exit` events.
pub fn integrate_variable_structure(
    surface: &SwitchingSurface,
    x0: &State,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    band: f64,
) -> Result<Trajectory> {
    check_dim("initial state", surface.s.dim(), x0.len())?;
    if !(band > 0.0 && band.is_finite()) {
        return Err(Error::invalid("band", "must be positive and finite"));
    }
    let n = cfg.steps(t0, t_end)?;
    let mut states = Vec::with_capacity(n + 1);
    let mut events = Vec::new();
    let mut sliding = false;
    let mut x = x0.clone();
    states.push(x.clone());

    for i in 0..n {
        let t = t0 + i as f64 * cfg.dt;
        let s_now = surface.s.eval(&x);
        let slide_now = s_now.abs() < band && surface.attracting(&x)?;
        if slide_now != sliding {
            events.push(Event::new(
                t,
                if slide_now {
                    "sliding_enter"
                } else {
                    "sliding_exit"
                },
            ));
            sliding = slide_now;
        }
        if sliding {
            x = sliding_step(surface, cfg, t, &x, cfg.dt)?;
        } else {
            let field = surface.region_field(&x)?;
            let rhs = |_: f64, y: &State| field.eval(y);
            let trial = step(cfg.method, &rhs, t, &x, cfg.dt);
            let s_trial = surface.s.eval(&trial);
            let crossed =
                s_trial.abs() >= band && s_now != 0.0 && s_trial.signum() != s_now.signum();
            x = if crossed {
                let theta = crossing_fraction(surface, cfg, field, t, &x, s_now, s_trial);
                let xc = step(cfg.method, &rhs, t, &x, theta * cfg.dt);
                let rest = (1.0 - theta) * cfg.dt;
                if surface.attracting(&xc)? {
                    events.push(Event::new(t + theta * cfg.dt, "sliding_enter"));
                    sliding = true;
                    sliding_step(surface, cfg, t + theta * cfg.dt, &xc, rest)?
                } else {
                    let other = if std::ptr::eq(field, &surface.f_plus) {
                        &surface.f_minus
                    } else {
                        &surface.f_plus
                    };
                    let rhs2 = |_: f64, y: &State| other.eval(y);
                    step(cfg.method, &rhs2, t + theta * cfg.dt, &xc, rest)
                }
            } else {
                trial
            };
        }
        ensure_finite(&x, t + cfg.dt)?;
        states.push(x.clone());
    }
    let mut traj = Trajectory::from_states(t0, cfg.dt, states);
    traj.events = events;
    Ok(traj)
}

fn sliding_step(
    surface: &SwitchingSurface,
    cfg: &IntegratorConfig,
    t: f64,
    x: &State,
    h: f64,
) -> Result<State> {
    if h <= 0.0 {
        return Ok(x.clone());
    }
    // Propagate a degenerate-sliding error out of the stage evaluations.
    let failure = std::cell::RefCell::new(None);
    let rhs = |_: f64, y: &State| match surface.sliding_field(y) {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            State::from_element(y.len(), f64::NAN)
        }
    };
    let next = step(cfg.method, &rhs, t, x, h);
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(next),
    }
}

/// Fraction of the step at which `s` changes sign, by safeguarded secant.
fn crossing_fraction(
    surface: &SwitchingSurface,
    cfg: &IntegratorConfig,
    field: &VectorField,
    t: f64,
    x: &State,
    s0: f64,
    s1: f64,
) -> f64 {
    let rhs = |_: f64, y: &State| field.eval(y);
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut s_lo, mut s_hi) = (s0, s1);
    for _ in 0..60 {
        let mut theta = lo - s_lo * (hi - lo) / (s_hi - s_lo);
        if !(theta > lo && theta < hi) {
            theta = 0.5 * (lo + hi);
        }
        let s = surface
            .s
            .eval(&step(cfg.method, &rhs, t, x, theta * cfg.dt));
        if s == 0.0 || (hi - lo) < 1e-14 {
            return theta;
        }
        if s.signum() == s_lo.signum() {
            lo = theta;
            s_lo = s;
        } else {
            hi = theta;
            s_hi = s;
        }
        if s.abs() < 1e-15 {
            return theta;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn relay() -> SwitchingSurface {
        SwitchingSurface::new(
            ScalarField::coordinate(1, 0),
            VectorField::constant(dvector![-1.0]),
            VectorField::constant(dvector![1.0]),
        )
        .unwrap()
    }

    fn planar() -> SwitchingSurface {
        SwitchingSurface::new(
            ScalarField::coordinate(2, 1),
            VectorField::constant(dvector![1.0, -1.0]),
            VectorField::constant(dvector![1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_fields_give_half() {
        assert_abs_diff_eq!(
            sliding_alpha(&planar(), &dvector![0.0, 0.0]).unwrap(),
            0.5,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            sliding_alpha(&relay(), &dvector![0.0]).unwrap(),
            0.5,
            epsilon = 1e-9
        );
    }

    #[test]
    fn sliding_field_is_tangent() {
        let surf = SwitchingSurface::new(
            ScalarField::new(2, |x| x[0] + x[1]),
            VectorField::constant(dvector![-3.0, 1.0]),
            VectorField::constant(dvector![0.5, 2.0]),
        )
        .unwrap();
        let x = dvector![0.3, -0.3];
        let v = surf.sliding_field(&x).unwrap();
        assert_abs_diff_eq!(v[0] + v[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_when_fields_agree_on_normal() {
        let surf = SwitchingSurface::new(
            ScalarField::coordinate(2, 1),
            VectorField::constant(dvector![1.0, 1.0]),
            VectorField::constant(dvector![-1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(
            sliding_alpha(&surf, &dvector![0.0, 0.0]),
            Err(Error::DegenerateSliding)
        );
    }

    #[test]
    fn relay_reaches_surface_at_unit_time() {
        let dt = 1e-3;
        let x0 = dvector![1.0];
        let band = default_band(&x0);
        let traj =
            integrate_variable_structure(&relay(), &x0, 0.0, 2.0, &IntegratorConfig::rk4(dt), band)
                .unwrap();
        let inside: Vec<bool> = traj.states.iter().map(|x| x[0].abs() < band).collect();
        let first = inside.iter().position(|&b| b).unwrap();
        assert!(inside[first..].iter().all(|&b| b));
        assert!((traj.time(first) - 1.0).abs() <= 2.0 * dt);
        assert_eq!(
            traj.events
                .iter()
                .filter(|e| e.kind == "sliding_enter")
                .count(),
            1
        );
    }

    #[test]
    fn planar_slides_along_axis() {
        let dt = 1e-3;
        let x0 = dvector![0.0, 0.5];
        let traj = integrate_variable_structure(
            &planar(),
            &x0,
            0.0,
            2.0,
            &IntegratorConfig::rk4(dt),
            1e-6,
        )
        .unwrap();
        let end = traj.last_state();
        assert!(end[1].abs() < 1e-6);
        assert_abs_diff_eq!(end[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn off_grid_crossing_is_located() {
        // Starting at x2 = 0.5004 the surface is reached between grid points.
        let dt = 1e-3;
        let x0 = dvector![0.0, 0.5004];
        let traj = integrate_variable_structure(
            &planar(),
            &x0,
            0.0,
            1.0,
            &IntegratorConfig::rk4(dt),
            1e-6,
        )
        .unwrap();
        let enter = traj
            .events
            .iter()
            .find(|e| e.kind == "sliding_enter")
            .unwrap();
        assert_abs_diff_eq!(enter.t, 0.5004, epsilon = 1e-9);
        assert!(traj.last_state()[1].abs() < 1e-9);
    }

    #[test]
    fn transversal_crossing_does_not_slide() {
        let surf = SwitchingSurface::new(
            ScalarField::coordinate(1, 0),
            VectorField::constant(dvector![-1.0]),
            VectorField::constant(dvector![-2.0]),
        )
        .unwrap();
        let traj = integrate_variable_structure(
            &surf,
            &dvector![0.5004],
            0.0,
            1.0,
            &IntegratorConfig::rk4(1e-3),
            1e-6,
        )
        .unwrap();
        assert!(traj.events.is_empty());
        // 0.5004 s at speed 1 then 0.4996 s at speed 2.
        assert_abs_diff_eq!(traj.last_state()[0], -0.9992, epsilon = 1e-9);
    }

    #[test]
    fn bad_band_rejected() {
        let err = integrate_variable_structure(
            &relay(),
            &dvector![1.0],
            0.0,
            1.0,
            &IntegratorConfig::rk4(0.01),
            0.0,
        );
        assert!(err.unwrap_err().is_validation());
    }
}
