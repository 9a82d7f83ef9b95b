//! Elastic graph curves over an obstacle with adhesion, discretized on
//! periodic polygons and minimized with BFGS.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod experiments;
pub mod error;
pub mod gradient;
pub mod grid;
pub mod obstacles;
pub mod optimizer;
pub mod quadrature;

pub use error::{Error, Result};
