//! Numerical toolkit for lens data, circle-front families and Jacobi frames
//! on surfaces with convex boundary, written in Gaussian-polar coordinates.

// `!(v > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod foliation;
pub mod front;
pub mod geodesic;
pub mod jacobi;
pub mod metric;
pub mod pair;
pub mod report;
pub mod suite;
pub mod thermostat;

pub use error::{Error, Result};
