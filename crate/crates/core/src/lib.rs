//! Numerical toolkit for simultaneous homogenization and linearization of
//! magnetoelastic energies: periodic cell problems, stray-field solves,
//! energy functionals and recovery-sequence experiments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cell;
pub mod cli;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod fields;
pub mod linalg;
pub mod material;
pub mod strayfield;

pub use error::{Error, Result};
