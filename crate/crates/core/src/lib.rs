// `!(x > 0.0)` is how validation rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod catalog;
pub mod controllability;
pub mod describing;
pub mod error;
pub mod feedback_lin;
pub mod field;
pub mod kicks;
pub mod linalg;
pub mod linear;
pub mod ode;
pub mod operator;
pub mod quad;
pub mod signal;
pub mod stability;
pub mod trajectory;

pub use error::{Error, Result};
