//! Grids, sampled fields, differential operators and sphere-valued utilities.

pub mod field;
pub mod grid;
pub mod io;
pub mod ops;
pub mod sphere;

pub use field::{extend_by_zero, DomainMask, Field, Magnetization, Rank, TOL_UNIT};
pub use grid::{ravel, unravel, BoxGrid, CellGrid, Grid};
pub use io::{load_field, read_field, save_field, write_field};
pub use ops::{gradient, interpolate, GradientScheme};
pub use sphere::{project_sphere, projection_jacobian, DEFAULT_DELTA_FLOOR};
