//! Numerical quaternionic fractional calculus on 4-D rectangles.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod error;
pub mod field;
pub mod frac_fueter;
pub mod fueter;
pub mod gamma;
pub mod iterated;
pub mod poly;
pub mod quadrature;
pub mod quaternion;
pub mod residual;
pub mod rl;

pub use error::{Error, Result};
pub use quadrature::{Box4, QuadratureSpec};
pub use quaternion::{CQuaternion, Quaternion, StructuralSet};
