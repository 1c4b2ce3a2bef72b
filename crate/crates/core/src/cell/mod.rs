//! Periodic cell problems for the homogenized exchange and elastic densities.

mod cg;
pub mod elastic;
pub mod exchange;

use crate::fields::Field;

pub use elastic::{
    nearest_design_direction, solve_elastic_cell, spherical_design_162, tabulate_elastic_tensor,
    ElasticCell, HomogenizedElastic, NuKey,
};
pub use exchange::{solve_exchange_cell, ExchangeCorrectors, HomogenizedExchange};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Minimizer of a discrete cell functional.
#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    /// Zero-mean periodic corrector.
    pub phi: Field,
    /// Homogenized density at the queried argument.
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
}

/// Ten iterations per sample along the longest axis.
pub fn default_max_iter(dims: [usize; 3]) -> usize {
    10 * dims.iter().copied().max().unwrap_or(1).max(2)
}
