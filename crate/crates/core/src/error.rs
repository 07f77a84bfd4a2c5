use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants split into two families: input validation (bad dimensions,
/// out-of-range parameters) and numeric failure (singular matrices,
/// divergence, non-convergence). [`Error::is_validation`] tells them apart,
/// which the CLI maps onto its exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("nesting depth {requested} exceeds cap {cap}")]
    DepthExceeded { requested: usize, cap: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error(
        "system is not controllable over the horizon (Gramian condition number {condition:e})"
    )]
    Uncontrollable { condition: f64 },

    #[error("state diverged at t = {time}")]
    Diverged { time: f64 },

    #[error("point is not an equilibrium (|f(x)| = {residual:e})")]
    NotEquilibrium { residual: f64 },

    #[error("decay rate unbounded: trajectory reaches zero at t = {time}")]
    ZeroTrajectory { time: f64 },

    #[error("sliding direction undefined at the surface: fields are equally transversal")]
    DegenerateSliding,

    #[error("missing delay history for t = {time}")]
    MissingHistory { time: f64 },

    #[error("phase function has {count} roots in the integration window")]
    MultipleRoots { count: usize },

    #[error("relative degree undefined up to order {r_max}")]
    UndefinedRelativeDegree { r_max: usize },

    #[error("decoupling term vanishes (|L_g L_f^(r-1) h| = {value:e}) at x = {state:?}")]
    SingularDecoupling { value: f64, state: Vec<f64> },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("domain guard violated: {0}")]
    Domain(String),
}

impl Error {
    /// True for errors caused by rejected inputs rather than numeric breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidParameter { .. }
                | Error::DepthExceeded { .. }
                | Error::MissingHistory { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}
