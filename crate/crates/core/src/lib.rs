//! Heat-flow transport maps between the standard Gaussian and
//! a target measure, closed-form Lipschitz bounds along the flow, and a
//! numerical verification suite for the functional inequalities those
//! bounds imply.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod error;
pub mod measures;
pub mod ou_flow;
mod par;
pub mod quadrature;
pub mod spectrum;
pub mod suite;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use measures::{build_builtin, chebyshev_radius, relative_density, Measure, MeasureDoc, MixtureSpec};
