//! Numerical experiments on the natural parametrization of SLE and the
//! quantum zipper.
//!
//! The crate is organised bottom-up:
//! [`loewner`] builds chains and traces, [`field`] evaluates log-correlated
//! Gaussian fields on probe sets, [`chaos`] turns probe pairings into
//! multiplicative chaos, [`natural`] compares curve measures, and
//! [`zipper`] runs the coupled experiments.

pub mod chaos;
pub mod error;
pub mod field;
pub mod loewner;
pub mod natural;
pub mod quad;
pub mod seed;
pub mod stats;
pub mod zipper;

pub use error::{Error, Result};
pub use num_complex::Complex64;
