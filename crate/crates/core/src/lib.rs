//! Numerical tools for Strichartz estimates on the hyperboloids `H^1` and
//! `H^2`: convolution measures, Lorentz geometry and caps, extension
//! operator norms, sharp constants and extremizer search.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capanalysis;
pub mod convolution;
pub mod error;
pub mod geometry;
pub mod quad;
pub mod search;
pub mod specfun;
pub mod strichartz;
pub mod trial;

pub use error::{Error, Result};
pub use quad::QuadConfig;
