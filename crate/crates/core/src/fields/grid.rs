use crate::error::{Error, Result};

/// Uniform periodic grid on the unit cell `Y = [0,1)^3`.
///
/// Samples sit at cell centers `y_j = (j + 1/2) / n`. An axis with a single
/// sample represents a direction along which nothing varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellGrid {
    dims: [usize; 3],
}

impl CellGrid {
    /// Cubic grid with `n` samples per axis.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!(
                "cell grid needs n >= 2, got {n}"
            )));
        }
        Ok(Self { dims: [n; 3] })
    }

    /// Anisotropic grid; an axis of size 1 is treated as invariant.
    pub fn with_dims(dims: [usize; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("zero-sized axis in {dims:?}")));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_points(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        1.0 / self.dims[axis] as f64
    }

    pub fn point(&self, index: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|d| (index[d] as f64 + 0.5) / self.dims[d] as f64)
    }
}

/// Uniform grid on an axis-aligned box, samples at cell centers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxGrid {
    origin: [f64; 3],
    side_lengths: [f64; 3],
    dims: [usize; 3],
}

impl BoxGrid {
    pub fn new(origin: [f64; 3], side_lengths: [f64; 3], dims: [usize; 3]) -> Result<Self> {
        if side_lengths.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "side lengths must be positive, got {side_lengths:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::NonFinite("box origin"));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("zero-sized axis in {dims:?}")));
        }
        Ok(Self {
            origin,
            side_lengths,
            dims,
        })
    }

    /// Unit cube `[0,1]^3` with the given resolution.
    pub fn unit(dims: [usize; 3]) -> Result<Self> {
        Self::new([0.0; 3], [1.0; 3], dims)
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn side_lengths(&self) -> [f64; 3] {
        self.side_lengths
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_points(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.side_lengths[axis] / self.dims[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..3).map(|d| self.spacing(d)).product()
    }

    pub fn point(&self, index: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|d| self.origin[d] + (index[d] as f64 + 0.5) * self.spacing(d))
    }

    pub fn contains(&self, x: [f64; 3]) -> bool {
        (0..3).all(|d| x[d] >= self.origin[d] && x[d] <= self.origin[d] + self.side_lengths[d])
    }
}

/// Either kind of grid a field may live on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grid {
    Cell(CellGrid),
    Box(BoxGrid),
}

impl Grid {
    pub fn dims(&self) -> [usize; 3] {
        match self {
            Grid::Cell(g) => g.dims(),
            Grid::Box(g) => g.dims(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        match self {
            Grid::Cell(g) => g.spacing(axis),
            Grid::Box(g) => g.spacing(axis),
        }
    }

    pub fn lengths(&self) -> [f64; 3] {
        match self {
            Grid::Cell(_) => [1.0; 3],
            Grid::Box(g) => g.side_lengths(),
        }
    }

    /// Quadrature weight of one sample.
    pub fn cell_volume(&self) -> f64 {
        (0..3).map(|d| self.spacing(d)).product::<f64>()
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, Grid::Cell(_))
    }

    pub fn point(&self, index: [usize; 3]) -> [f64; 3] {
        match self {
            Grid::Cell(g) => g.point(index),
            Grid::Box(g) => g.point(index),
        }
    }

    pub fn point_at(&self, linear: usize) -> [f64; 3] {
        self.point(unravel(linear, self.dims()))
    }
}

#[inline]
pub fn ravel(index: [usize; 3], dims: [usize; 3]) -> usize {
    index[0] + dims[0] * (index[1] + dims[1] * index[2])
}

#[inline]
pub fn unravel(linear: usize, dims: [usize; 3]) -> [usize; 3] {
    let i = linear % dims[0];
    let rest = linear / dims[0];
    [i, rest % dims[1], rest / dims[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_grid_rejects_single_sample() {
        assert!(CellGrid::new(1).is_err());
        let g = CellGrid::new(4).unwrap();
        assert!((g.spacing(0) * 4.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn box_grid_rejects_nonpositive_sides() {
        assert!(BoxGrid::new([0.0; 3], [1.0, 0.0, 1.0], [2, 2, 2]).is_err());
    }

    #[test]
    fn ravel_round_trips() {
        let dims = [3, 5, 7];
        for l in 0..105 {
            assert_eq!(ravel(unravel(l, dims), dims), l);
        }
    }
}
