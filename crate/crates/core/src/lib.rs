//! Numerical laboratory for sinks born near quadratic homoclinic tangencies of
//! a strongly dissipative model horseshoe.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor;
pub mod cascade;
pub mod cli;
pub mod error;
pub mod io;
pub mod model;
pub mod numeric;
pub mod orbits;
pub mod quadratic;
pub mod renorm;

pub use error::{Error, Result};
