//! Numerical laboratory for partially hyperbolic surface endomorphisms:
//! curve and jet transport, measure transport and seminorms, Lyapunov and
//! Pesin-block diagnostics, an exact transfer operator for a piecewise affine
//! skew product, and random Fourier perturbations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod critical;
pub mod curves;
pub mod error;
pub mod experiment;
pub mod fields;
pub mod lyapunov;
pub mod measures;
pub mod models;
pub mod series;
pub mod skewprod;
pub mod torus;

pub use error::{Error, Result};
