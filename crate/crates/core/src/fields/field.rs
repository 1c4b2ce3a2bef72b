use super::grid::{BoxGrid, Grid};
use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};

/// Tolerance on `|m| = 1` accepted for a magnetization sample.
pub const TOL_UNIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector3,
    Matrix3,
}

impl Rank {
    pub fn components(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector3 => 3,
            Rank::Matrix3 => 9,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector3 => 1,
            Rank::Matrix3 => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector3),
            2 => Some(Rank::Matrix3),
            _ => None,
        }
    }
}

/// Samples of a scalar, vector or matrix quantity on a grid.
///
/// Storage is component-major, then x-fastest row-major. Matrix component
/// `(i, j)` is component `3 i + j`, so a gradient stores `∂_j u_i` there.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    rank: Rank,
    samples: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, rank: Rank, samples: Vec<f64>) -> Result<Self> {
        let expected = grid.n_points() * rank.components();
        if samples.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "field expects {expected} samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples"));
        }
        Ok(Self {
            grid,
            rank,
            samples,
        })
    }

    pub fn zeros(grid: Grid, rank: Rank) -> Self {
        Self {
            grid,
            rank,
            samples: vec![0.0; grid.n_points() * rank.components()],
        }
    }

    pub fn from_scalar_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let samples = (0..grid.n_points()).map(|p| f(grid.point_at(p))).collect();
        Self::new(grid, Rank::Scalar, samples)
    }

    pub fn from_vector_fn(grid: Grid, f: impl Fn([f64; 3]) -> Vec3) -> Result<Self> {
        let n = grid.n_points();
        let mut samples = vec![0.0; 3 * n];
        for p in 0..n {
            let v = f(grid.point_at(p));
            for c in 0..3 {
                samples[c * n + p] = v[c];
            }
        }
        Self::new(grid, Rank::Vector3, samples)
    }

    pub fn from_matrix_fn(grid: Grid, f: impl Fn([f64; 3]) -> Mat3) -> Result<Self> {
        let n = grid.n_points();
        let mut samples = vec![0.0; 9 * n];
        for p in 0..n {
            let m = f(grid.point_at(p));
            for i in 0..3 {
                for j in 0..3 {
                    samples[(3 * i + j) * n + p] = m[(i, j)];
                }
            }
        }
        Self::new(grid, Rank::Matrix3, samples)
    }

    /// Assemble from per-component arrays.
    pub fn from_components(grid: Grid, rank: Rank, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.len() != rank.components() {
            return Err(Error::InvalidArgument(
                "component count does not match rank".into(),
            ));
        }
        Self::new(grid, rank, components.concat())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn n_points(&self) -> usize {
        self.grid.n_points()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.n_points();
        &self.samples[c * n..(c + 1) * n]
    }

    pub fn scalar_at(&self, p: usize) -> f64 {
        self.samples[p]
    }

    pub fn vector_at(&self, p: usize) -> Vec3 {
        let n = self.n_points();
        Vec3::new(
            self.samples[p],
            self.samples[n + p],
            self.samples[2 * n + p],
        )
    }

    pub fn matrix_at(&self, p: usize) -> Mat3 {
        let n = self.n_points();
        Mat3::from_fn(|i, j| self.samples[(3 * i + j) * n + p])
    }

    /// All components at one point.
    pub fn values_at(&self, p: usize) -> Vec<f64> {
        let n = self.n_points();
        (0..self.rank.components())
            .map(|c| self.samples[c * n + p])
            .collect()
    }

    /// Discrete `∫ |f|^2` with midpoint weights.
    pub fn l2_norm_sq(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    /// Mean of every component over the grid.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_points() as f64;
        (0..self.rank.components())
            .map(|c| self.component(c).iter().sum::<f64>() / n)
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            rank: self.rank,
            samples: self.samples.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Unit-length vector field (Heisenberg constraint).
#[derive(Debug, Clone, PartialEq)]
pub struct Magnetization(Field);

impl Magnetization {
    /// Accepts a vector field whose samples already have unit length.
    pub fn new(field: Field) -> Result<Self> {
        if field.rank() != Rank::Vector3 {
            return Err(Error::InvalidArgument(
                "magnetization must be a vector field".into(),
            ));
        }
        for p in 0..field.n_points() {
            let norm = field.vector_at(p).norm();
            if (norm - 1.0).abs() > TOL_UNIT {
                return Err(Error::InvalidArgument(format!(
                    "magnetization sample {p} has norm {norm}"
                )));
            }
        }
        Ok(Self(field))
    }

    /// Radially projects every sample onto the sphere.
    pub fn project(field: &Field, delta_floor: f64) -> Result<Self> {
        if field.rank() != Rank::Vector3 {
            return Err(Error::InvalidArgument(
                "magnetization must be a vector field".into(),
            ));
        }
        let n = field.n_points();
        let mut samples = vec![0.0; 3 * n];
        for p in 0..n {
            let v = super::sphere::project_sphere(&field.vector_at(p), delta_floor)?;
            for c in 0..3 {
                samples[c * n + p] = v[c];
            }
        }
        Ok(Self(Field::new(*field.grid(), Rank::Vector3, samples)?))
    }

    pub fn field(&self) -> &Field {
        &self.0
    }

    pub fn into_field(self) -> Field {
        self.0
    }
}

/// Boolean indicator of the body inside a box grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    grid: BoxGrid,
    inside: Vec<bool>,
}

impl DomainMask {
    pub fn new(grid: BoxGrid, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.n_points() {
            return Err(Error::InvalidArgument(
                "mask length does not match grid".into(),
            ));
        }
        if !inside.iter().any(|&b| b) {
            return Err(Error::InvalidArgument("mask has no inside point".into()));
        }
        Ok(Self { grid, inside })
    }

    pub fn from_fn(grid: BoxGrid, f: impl Fn([f64; 3]) -> bool) -> Result<Self> {
        let g = Grid::Box(grid);
        let inside = (0..grid.n_points()).map(|p| f(g.point_at(p))).collect();
        Self::new(grid, inside)
    }

    pub fn full(grid: BoxGrid) -> Self {
        Self {
            grid,
            inside: vec![true; grid.n_points()],
        }
    }

    pub fn ball(grid: BoxGrid, center: [f64; 3], radius: f64) -> Result<Self> {
        Self::from_fn(grid, |x| {
            (0..3).map(|d| (x[d] - center[d]).powi(2)).sum::<f64>() <= radius * radius
        })
    }

    /// Axis-aligned sub-box `[lo, hi]`.
    pub fn aabb(grid: BoxGrid, lo: [f64; 3], hi: [f64; 3]) -> Result<Self> {
        Self::from_fn(grid, |x| (0..3).all(|d| x[d] >= lo[d] && x[d] <= hi[d]))
    }

    /// Reads a mask from a scalar field: nonzero samples are inside.
    pub fn from_field(field: &Field) -> Result<Self> {
        let Grid::Box(grid) = *field.grid() else {
            return Err(Error::InvalidArgument(
                "mask field must live on a box grid".into(),
            ));
        };
        if field.rank() != Rank::Scalar {
            return Err(Error::InvalidArgument("mask field must be scalar".into()));
        }
        Self::new(grid, field.samples().iter().map(|&v| v != 0.0).collect())
    }

    pub fn to_field(&self) -> Field {
        let samples = self
            .inside
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        Field::new(Grid::Box(self.grid), Rank::Scalar, samples).expect("mask samples are finite")
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn is_inside(&self, p: usize) -> bool {
        self.inside[p]
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }
}

/// Extension by zero of a field outside the mask.
pub fn extend_by_zero(field: &Field, mask: &DomainMask) -> Result<Field> {
    match field.grid() {
        Grid::Box(g) if g == mask.grid() => {}
        _ => {
            return Err(Error::InvalidArgument(
                "mask grid differs from field grid".into(),
            ))
        }
    }
    let n = field.n_points();
    let mut samples = field.samples().to_vec();
    for c in 0..field.rank().components() {
        for p in 0..n {
            if !mask.is_inside(p) {
                samples[c * n + p] = 0.0;
            }
        }
    }
    Field::new(*field.grid(), field.rank(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> BoxGrid {
        BoxGrid::unit([n, n, n]).unwrap()
    }

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Grid::Box(unit_box(2));
        assert!(Field::new(g, Rank::Scalar, vec![0.0; 7]).is_err());
        let mut s = vec![0.0; 8];
        s[3] = f64::NAN;
        assert!(matches!(
            Field::new(g, Rank::Scalar, s),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn extend_by_zero_all_inside_is_identity() {
        let g = unit_box(4);
        let f = Field::from_vector_fn(Grid::Box(g), |x| Vec3::new(x[0], 1.0, x[2])).unwrap();
        let e = extend_by_zero(&f, &DomainMask::full(g)).unwrap();
        assert_eq!(e, f);
    }

    #[test]
    fn extend_by_zero_all_outside_is_zero() {
        let g = unit_box(4);
        let f = Field::from_vector_fn(Grid::Box(g), |_| Vec3::new(0.0, 0.0, 1.0)).unwrap();
        // build a mask with a single inside point, then flip it manually
        let mut inside = vec![false; g.n_points()];
        inside[0] = true;
        let mask = DomainMask::new(g, inside).unwrap();
        let e = extend_by_zero(&f, &mask).unwrap();
        assert!((e.l2_norm_sq() - g.cell_volume()).abs() < 1e-15);
        assert!(DomainMask::new(g, vec![false; g.n_points()]).is_err());
    }

    #[test]
    fn half_space_norm_matches_inside_volume() {
        let g = unit_box(8);
        let mask = DomainMask::from_fn(g, |x| x[0] < 0.5).unwrap();
        let m = Vec3::new(0.6, 0.0, 0.8);
        let f = Field::from_vector_fn(Grid::Box(g), |_| m).unwrap();
        let e = extend_by_zero(&f, &mask).unwrap();
        // counting oracle: 4 of 8 slabs are inside
        let inside_volume = (4 * 8 * 8) as f64 / 512.0;
        assert!((e.l2_norm_sq() - m.norm_squared() * inside_volume).abs() < 1e-14);
        assert!((mask.volume() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn magnetization_requires_unit_samples() {
        let g = Grid::Box(unit_box(2));
        let f = Field::from_vector_fn(g, |_| Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert!(Magnetization::new(f.clone()).is_err());
        let m = Magnetization::project(&f, 0.5).unwrap();
        assert!((m.field().vector_at(3) - Vec3::z()).norm() < 1e-15);
    }
}
