//! Named example systems addressable by string identifier.

use nalgebra::dvector;

use crate::controllability::{car_system, unicycle_system, ControlAffineSystem};
use crate::describing::van_der_pol_field;
use crate::error::{Error, Result};
use crate::feedback_lin::AffineSiso;
use crate::field::{ScalarField, VectorField};
use crate::ode::SwitchingSurface;

pub const FIELDS: &[&str] = &[
    "van-der-pol",
    "rotation",
    "bracket-example-f",
    "bracket-example-g",
];
pub const CONTROL_SYSTEMS: &[&str] = &["car", "unicycle"];
pub const SISO_SYSTEMS: &[&str] = &["cubic", "pendulum", "chain3"];
pub const SWITCHING_SYSTEMS: &[&str] = &["relay", "planar"];

fn unknown(kind: &'static str, name: &str, known: &[&str]) -> Error {
    Error::invalid(
        kind,
        format!(
            "unknown name {name:?}; expected one of {}",
            known.join(", ")
        ),
    )
}

/// Autonomous vector fields. `alpha` parameterizes the Van der Pol field.
pub fn field(name: &str, alpha: f64) -> Result<VectorField> {
    match name {
        "van-der-pol" | "vdp" => Ok(van_der_pol_field(alpha)),
        "rotation" => Ok(VectorField::new(2, |x| dvector![-x[1], x[0]])),
        "bracket-example-f" => Ok(VectorField::new(2, |x| dvector![x[1].cos(), x[0]])),
        "bracket-example-g" => Ok(VectorField::new(2, |x| dvector![x[0], 1.0])),
        _ => Err(unknown("field", name, FIELDS)),
    }
}

/// Driftless kinematic systems; `wheelbase` applies to the car.
pub fn control_system(name: &str, wheelbase: f64) -> Result<ControlAffineSystem> {
    match name {
        "car" => car_system(wheelbase),
        "unicycle" => Ok(unicycle_system()),
        _ => Err(unknown("system", name, CONTROL_SYSTEMS)),
    }
}

/// SISO plants for feedback linearization, all with output `h = x₁`.
///
/// - `cubic`: `ẋ₁ = x₂`, `ẋ₂ = −x₁³ + u` (relative degree 2)
/// - `pendulum`: `ẋ₁ = x₂`, `ẋ₂ = −sin x₁ + (2 + cos x₁)u` (relative degree 2)
/// - `chain3`: `ẋ₁ = x₂`, `ẋ₂ = x₃ + sin x₁`, `ẋ₃ = −x₂³ + u` (relative degree 3)
pub fn siso_system(name: &str) -> Result<AffineSiso> {
    match name {
        "cubic" => AffineSiso::new(
            VectorField::new(2, |x| dvector![x[1], -x[0].powi(3)]),
            VectorField::constant(dvector![0.0, 1.0]),
            ScalarField::coordinate(2, 0),
        ),
        "pendulum" => AffineSiso::new(
            VectorField::new(2, |x| dvector![x[1], -x[0].sin()]),
            VectorField::new(2, |x| dvector![0.0, 2.0 + x[0].cos()]),
            ScalarField::coordinate(2, 0),
        ),
        "chain3" => AffineSiso::new(
            VectorField::new(3, |x| dvector![x[1], x[2] + x[0].sin(), -x[1].powi(3)]),
            VectorField::constant(dvector![0.0, 0.0, 1.0]),
            ScalarField::coordinate(3, 0),
        ),
        _ => Err(unknown("system", name, SISO_SYSTEMS)),
    }
}

/// Variable-structure systems.
///
/// - `relay`: `ẋ = −sign x` on ℝ
/// - `planar`: `ẋ = (1, −sign x₂)`, sliding along the `x₁` axis
pub fn switching_system(name: &str) -> Result<SwitchingSurface> {
    match name {
        "relay" => SwitchingSurface::new(
            ScalarField::coordinate(1, 0),
            VectorField::constant(dvector![-1.0]),
            VectorField::constant(dvector![1.0]),
        ),
        "planar" => SwitchingSurface::new(
            ScalarField::coordinate(2, 1),
            VectorField::constant(dvector![1.0, -1.0]),
            VectorField::constant(dvector![1.0, 1.0]),
        ),
        _ => Err(unknown("system", name, SWITCHING_SYSTEMS)),
    }
}
