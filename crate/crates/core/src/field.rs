//! Scalar and vector fields over ℝⁿ with Lie derivatives and Lie brackets.
//!
//! Derivatives come from an exact Jacobian callback when a field carries one,
//! otherwise from finite differences controlled by [`DiffConfig`]. Nested
//! operators (iterated Lie derivatives, brackets of brackets) difference the
//! inner result again, so each level costs roughly half the significant
//! digits; the config widens its step once the nesting reaches
//! [`DiffConfig::widen_at_depth`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Point in state space.
pub type State = DVector<f64>;

type VectorMap = Arc<dyn Fn(&State) -> State + Send + Sync>;
type MatrixMap = Arc<dyn Fn(&State) -> DMatrix<f64> + Send + Sync>;
type ScalarMap = Arc<dyn Fn(&State) -> f64 + Send + Sync>;

/// Finite-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Central,
    Forward,
}

/// Numeric differentiation settings shared by every Lie operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffConfig {
    /// Finite-difference (half-)step on unit-scaled states.
    pub step: f64,
    pub scheme: Scheme,
    /// Maximum nesting accepted by iterated operators.
    pub depth_cap: usize,
    /// Step used once nesting reaches `widen_at_depth`.
    pub wide_step: f64,
    pub widen_at_depth: usize,
}

impl Default for DiffConfig {
    fn default() -> Self {
        DiffConfig {
            step: 1e-5,
            scheme: Scheme::Central,
            depth_cap: 4,
            wide_step: 1e-3,
            widen_at_depth: 3,
        }
    }
}

impl DiffConfig {
    pub fn with_step(step: f64) -> Result<Self> {
        let cfg = DiffConfig {
            step,
            ..DiffConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step", "must be positive and finite"));
        }
        if !(self.wide_step > 0.0 && self.wide_step.is_finite()) {
            return Err(Error::invalid("wide_step", "must be positive and finite"));
        }
        Ok(())
    }

    /// Step to use for an operator nested `depth` levels deep.
    pub fn step_for_depth(&self, depth: usize) -> f64 {
        if depth >= self.widen_at_depth {
            self.step.max(self.wide_step)
        } else {
            self.step
        }
    }

    fn check_depth(&self, depth: usize) -> Result<()> {
        if depth > self.depth_cap {
            Err(Error::DepthExceeded {
                requested: depth,
                cap: self.depth_cap,
            })
        } else {
            Ok(())
        }
    }
}

/// A real-valued map on ℝⁿ.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    eval: ScalarMap,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .finish()
    }
}

impl ScalarField {
    pub fn new(dim: usize, eval: impl Fn(&State) -> f64 + Send + Sync + 'static) -> Self {
        assert!(dim >= 1, "scalar field dimension must be at least 1");
        ScalarField {
            dim,
            eval: Arc::new(eval),
        }
    }

    /// h(x) = cᵀx.
    pub fn linear(c: DVector<f64>) -> Self {
        let dim = c.len();
        ScalarField::new(dim, move |x| c.dot(x))
    }

    /// h(x) = x_i.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        assert!(i < dim);
        ScalarField::new(dim, move |x| x[i])
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        ScalarField::new(dim, move |_| value)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &State) -> f64 {
        (self.eval)(x)
    }

    pub fn try_eval(&self, x: &State) -> Result<f64> {
        check_dim("scalar field argument", self.dim, x.len())?;
        Ok(self.eval(x))
    }
}

/// A tangent-vector map on ℝⁿ, optionally with its exact Jacobian.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: VectorMap,
    jac: Option<MatrixMap>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("exact_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(dim: usize, eval: impl Fn(&State) -> State + Send + Sync + 'static) -> Self {
        assert!(dim >= 1, "vector field dimension must be at least 1");
        VectorField {
            dim,
            eval: Arc::new(eval),
            jac: None,
        }
    }

    /// Attach an exact Jacobian; [`jacobian`] will prefer it over differencing.
    pub fn with_jacobian(
        mut self,
        jac: impl Fn(&State) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.jac = Some(Arc::new(jac));
        self
    }

    /// f(x) = Ax, carrying A as its exact Jacobian.
    pub fn linear(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "linear field needs a square matrix");
        let dim = a.nrows();
        let a_eval = a.clone();
        VectorField::new(dim, move |x| &a_eval * x).with_jacobian(move |_| a.clone())
    }

    /// f(x) = c with a zero Jacobian.
    pub fn constant(c: DVector<f64>) -> Self {
        let dim = c.len();
        VectorField::new(dim, move |_| c.clone()).with_jacobian(move |_| DMatrix::zeros(dim, dim))
    }

    pub fn zero(dim: usize) -> Self {
        VectorField::constant(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_exact_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn eval(&self, x: &State) -> State {
        (self.eval)(x)
    }

    /// Evaluate with argument and result length checks.
    pub fn try_eval(&self, x: &State) -> Result<State> {
        check_dim("vector field argument", self.dim, x.len())?;
        let v = self.eval(x);
        check_dim("vector field value", self.dim, v.len())?;
        Ok(v)
    }

    /// The field a·f.
    pub fn scaled(&self, a: f64) -> VectorField {
        let f = self.clone();
        let mut out = VectorField::new(self.dim, move |x| f.eval(x) * a);
        if let Some(j) = self.jac.clone() {
            out.jac = Some(Arc::new(move |x| j(x) * a));
        }
        out
    }

    /// The field f + g.
    pub fn add(&self, other: &VectorField) -> VectorField {
        assert_eq!(self.dim, other.dim, "field dimensions differ");
        let (f, g) = (self.clone(), other.clone());
        let mut out = VectorField::new(self.dim, move |x| f.eval(x) + g.eval(x));
        if let (Some(jf), Some(jg)) = (self.jac.clone(), other.jac.clone()) {
            out.jac = Some(Arc::new(move |x| jf(x) + jg(x)));
        }
        out
    }
}

/// Finite-difference Jacobian of an arbitrary map, ignoring any exact callback.
pub fn fd_jacobian(f: &VectorField, x: &State, step: f64, scheme: Scheme) -> DMatrix<f64> {
    let n = x.len();
    let mut jac = DMatrix::zeros(f.dim, n);
    let base = match scheme {
        Scheme::Forward => Some(f.eval(x)),
        Scheme::Central => None,
    };
    let mut probe = x.clone();
    for j in 0..n {
        let xj = x[j];
        let column = match &base {
            None => {
                probe[j] = xj + step;
                let plus = f.eval(&probe);
                probe[j] = xj - step;
                let minus = f.eval(&probe);
                (plus - minus) / (2.0 * step)
            }
            Some(f0) => {
                probe[j] = xj + step;
                (f.eval(&probe) - f0) / step
            }
        };
        probe[j] = xj;
        jac.set_column(j, &column);
    }
    jac
}

fn fd_gradient(h: &dyn Fn(&State) -> f64, x: &State, step: f64, scheme: Scheme) -> State {
    let mut probe = x.clone();
    let base = match scheme {
        Scheme::Forward => Some(h(x)),
        Scheme::Central => None,
    };
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|j| {
            let xj = x[j];
            let d = match base {
                None => {
                    probe[j] = xj + step;
                    let plus = h(&probe);
                    probe[j] = xj - step;
                    let minus = h(&probe);
                    (plus - minus) / (2.0 * step)
                }
                Some(h0) => {
                    probe[j] = xj + step;
                    (h(&probe) - h0) / step
                }
            };
            probe[j] = xj;
            d
        }),
    )
}

/// Gradient of a scalar field by finite differences.
pub fn gradient(h: &ScalarField, x: &State, cfg: &DiffConfig) -> Result<State> {
    check_dim("gradient argument", h.dim, x.len())?;
    Ok(fd_gradient(&|y| h.eval(y), x, cfg.step, cfg.scheme))
}

/// ∂f/∂x at `x`: the exact callback when present, else finite differences.
pub fn jacobian(f: &VectorField, x: &State, cfg: &DiffConfig) -> Result<DMatrix<f64>> {
    check_dim("jacobian argument", f.dim, x.len())?;
    match &f.jac {
        Some(j) => {
            let m = j(x);
            if m.nrows() != f.dim || m.ncols() != f.dim {
                return Err(Error::DimensionMismatch {
                    context: "exact jacobian shape",
                    expected: f.dim,
                    got: m.nrows().max(m.ncols()),
                });
            }
            Ok(m)
        }
        None => Ok(fd_jacobian(f, x, cfg.step, cfg.scheme)),
    }
}

fn check_fields(h: &ScalarField, fields: &[&VectorField], x: &State) -> Result<()> {
    check_dim("state", h.dim, x.len())?;
    for f in fields {
        check_dim("field dimension", h.dim, f.dim)?;
    }
    Ok(())
}

fn chain_eval(
    h: &ScalarField,
    fields: &[&VectorField],
    x: &State,
    step: f64,
    scheme: Scheme,
) -> f64 {
    match fields.split_last() {
        None => h.eval(x),
        Some((last, inner)) => {
            let grad = fd_gradient(&|y| chain_eval(h, inner, y, step, scheme), x, step, scheme);
            grad.dot(&last.eval(x))
        }
    }
}

/// L_{f_k} ⋯ L_{f_1} h at `x`, with `fields = [f_1, …, f_k]`.
///
/// Every level differences the level below it; the step is chosen once from
/// the total depth.
pub fn lie_chain(
    h: &ScalarField,
    fields: &[&VectorField],
    x: &State,
    cfg: &DiffConfig,
) -> Result<f64> {
    cfg.validate()?;
    cfg.check_depth(fields.len())?;
    check_fields(h, fields, x)?;
    let step = cfg.step_for_depth(fields.len());
    Ok(chain_eval(h, fields, x, step, cfg.scheme))
}

/// L_f h(x) = ∇h(x)·f(x).
pub fn lie_derivative(
    h: &ScalarField,
    f: &VectorField,
    x: &State,
    cfg: &DiffConfig,
) -> Result<f64> {
    lie_chain(h, &[f], x, cfg)
}

/// L_f^k h(x); `k = 0` returns h(x).
pub fn lie_derivative_iterated(
    h: &ScalarField,
    f: &VectorField,
    k: usize,
    x: &State,
    cfg: &DiffConfig,
) -> Result<f64> {
    let fields = vec![f; k];
    lie_chain(h, &fields, x, cfg)
}

/// L_g L_f h(x) = ∇(L_f h)(x)·g(x).
pub fn lie_derivative_mixed(
    h: &ScalarField,
    f: &VectorField,
    g: &VectorField,
    x: &State,
    cfg: &DiffConfig,
) -> Result<f64> {
    lie_chain(h, &[f, g], x, cfg)
}

/// [f, g](x) = ∇g(x) f(x) − ∇f(x) g(x).
pub fn lie_bracket(f: &VectorField, g: &VectorField, x: &State, cfg: &DiffConfig) -> Result<State> {
    cfg.validate()?;
    check_dim("bracket fields", f.dim, g.dim)?;
    check_dim("state", f.dim, x.len())?;
    Ok(bracket_value(f, g, x, cfg))
}

fn bracket_value(f: &VectorField, g: &VectorField, x: &State, cfg: &DiffConfig) -> State {
    let jg = match &g.jac {
        Some(j) => j(x),
        None => fd_jacobian(g, x, cfg.step, cfg.scheme),
    };
    let jf = match &f.jac {
        Some(j) => j(x),
        None => fd_jacobian(f, x, cfg.step, cfg.scheme),
    };
    jg * f.eval(x) - jf * g.eval(x)
}

/// The field x ↦ [f, g](x), evaluated lazily with the given settings.
///
/// Differentiating the result (for nested brackets) differences the
/// bracket itself.
pub fn bracket_field(f: &VectorField, g: &VectorField, cfg: &DiffConfig) -> VectorField {
    assert_eq!(f.dim, g.dim, "bracket fields must share dimension");
    let (f, g, cfg) = (f.clone(), g.clone(), *cfg);
    VectorField::new(f.dim, move |x| bracket_value(&f, &g, x, &cfg))
}

/// ad_f^i g(x); `i = 0` returns g(x).
pub fn ad_iterated(
    f: &VectorField,
    g: &VectorField,
    i: usize,
    x: &State,
    cfg: &DiffConfig,
) -> Result<State> {
    cfg.validate()?;
    cfg.check_depth(i)?;
    check_dim("bracket fields", f.dim, g.dim)?;
    check_dim("state", f.dim, x.len())?;
    Ok(ad_field(f, g, i, cfg).eval(x))
}

/// The field ad_f^i g, with the step widened for deep nesting.
pub fn ad_field(f: &VectorField, g: &VectorField, i: usize, cfg: &DiffConfig) -> VectorField {
    let inner_cfg = DiffConfig {
        step: cfg.step_for_depth(i),
        ..*cfg
    };
    (0..i).fold(g.clone(), |acc, _| bracket_field(f, &acc, &inner_cfg))
}
