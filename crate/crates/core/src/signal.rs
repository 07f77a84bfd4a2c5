//! Input signals for simulators.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Uniform samples `values[i]` at `t0 + i·dt`.
///
/// Between samples the signal is evaluated by four-point cubic Lagrange
/// interpolation (fourth-order accurate for smooth data); outside the
/// sampled window the end values are held.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<DVector<f64>>,
}

impl SampledSignal {
    pub fn new(t0: f64, dt: f64, values: Vec<DVector<f64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if values.is_empty() {
            return Err(Error::invalid("values", "at least one sample required"));
        }
        let width = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != width) {
            return Err(Error::DimensionMismatch {
                context: "sample width",
                expected: width,
                got: v.len(),
            });
        }
        Ok(SampledSignal { t0, dt, values })
    }

    pub fn width(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        let n = self.values.len();
        let p = (t - self.t0) / self.dt;
        if n == 1 || p <= 0.0 {
            return self.values[0].clone();
        }
        if p >= (n - 1) as f64 {
            return self.values[n - 1].clone();
        }
        let i = p.floor() as usize;
        let frac = p - i as f64;
        if frac == 0.0 {
            return self.values[i].clone();
        }
        if n < 4 {
            return &self.values[i] * (1.0 - frac) + &self.values[i + 1] * frac;
        }
        // Window of four nodes containing [i, i+1], shifted inward at the ends.
        let start = i.saturating_sub(1).min(n - 4);
        let x = p - start as f64;
        let mut out = DVector::zeros(self.width());
        for j in 0..4 {
            let mut w = 1.0;
            for k in 0..4 {
                if k != j {
                    w *= (x - k as f64) / (j as f64 - k as f64);
                }
            }
            out += &self.values[start + j] * w;
        }
        out
    }
}

/// Time-dependent input `u(t)`.
#[derive(Clone)]
pub enum InputSignal {
    Constant(DVector<f64>),
    Sampled(SampledSignal),
    Function {
        width: usize,
        f: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
    },
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSignal::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InputSignal::Sampled(s) => f.debug_tuple("Sampled").field(s).finish(),
            InputSignal::Function { width, .. } => {
                f.debug_struct("Function").field("width", width).finish()
            }
        }
    }
}

impl InputSignal {
    pub fn zero(width: usize) -> Self {
        InputSignal::Constant(DVector::zeros(width))
    }

    pub fn function(width: usize, f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        InputSignal::Function {
            width,
            f: Arc::new(f),
        }
    }

    pub fn width(&self) -> usize {
        match self {
            InputSignal::Constant(v) => v.len(),
            InputSignal::Sampled(s) => s.width(),
            InputSignal::Function { width, .. } => *width,
        }
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        match self {
            InputSignal::Constant(v) => v.clone(),
            InputSignal::Sampled(s) => s.at(t),
            InputSignal::Function { f, .. } => f(t),
        }
    }
}

/// Derivative of uniformly sampled data: central differences inside,
/// second-order one-sided differences at the ends.
pub fn differentiate(values: &[DVector<f64>], dt: f64) -> Vec<DVector<f64>> {
    let n = values.len();
    match n {
        0 => Vec::new(),
        1 => vec![DVector::zeros(values[0].len())],
        2 => {
            let d = (&values[1] - &values[0]) / dt;
            vec![d.clone(), d]
        }
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (&values[0] * -3.0 + &values[1] * 4.0 - &values[2]) / (2.0 * dt)
                } else if i == n - 1 {
                    (&values[n - 1] * 3.0 - &values[n - 2] * 4.0 + &values[n - 3]) / (2.0 * dt)
                } else {
                    (&values[i + 1] - &values[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    #[test]
    fn cubic_interpolation_is_exact_for_cubics() {
        let f = |t: f64| t * t * t - 2.0 * t + 1.0;
        let values = (0..10).map(|i| dvector![f(i as f64 * 0.1)]).collect();
        let s = SampledSignal::new(0.0, 0.1, values).unwrap();
        for t in [0.05, 0.33, 0.71, 0.88] {
            assert_abs_diff_eq!(s.at(t)[0], f(t), epsilon = 1e-12);
        }
        assert_eq!(s.at(-1.0)[0], f(0.0));
        assert_eq!(s.at(5.0)[0], s.values[9][0]);
    }

    #[test]
    fn derivative_of_quadratic_is_exact() {
        let values: Vec<_> = (0..6).map(|i| dvector![(i as f64 * 0.5).powi(2)]).collect();
        let d = differentiate(&values, 0.5);
        for (i, v) in d.iter().enumerate() {
            assert_abs_diff_eq!(v[0], 2.0 * i as f64 * 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn ragged_samples_rejected() {
        assert!(SampledSignal::new(0.0, 0.1, vec![dvector![1.0], dvector![1.0, 2.0]]).is_err());
    }
}
