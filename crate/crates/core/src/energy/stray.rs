use crate::error::{Error, Result};
use crate::fields::{ravel, BoxGrid, DomainMask, Field, Grid, Rank};
use crate::strayfield::stray_energy_of_field;

/// Coarse three-dimensional box around `Ω` on which the stray field of a
/// material-grid magnetization is solved. Samples are transferred by
/// overlap-weighted cell averages of `χ_Ω m`.
#[derive(Debug, Clone)]
pub struct StrayModel {
    grid: BoxGrid,
    pad_factor: f64,
    /// Per axis and stray index: `(material index, weight)` pairs.
    weights: [Vec<Vec<(usize, f64)>>; 3],
    material: BoxGrid,
}

impl StrayModel {
    /// `cells` samples across `Ω` per axis plus `margin` empty cells on each side.
    pub fn new(material: BoxGrid, cells: usize, margin: usize, pad_factor: f64) -> Result<Self> {
        if cells == 0 || margin == 0 {
            return Err(Error::InvalidArgument(
                "stray grid needs cells > 0 and a margin of at least one cell".into(),
            ));
        }
        let o = material.origin();
        let l = material.side_lengths();
        let h: [f64; 3] = std::array::from_fn(|d| l[d] / cells as f64);
        let grid = BoxGrid::new(
            std::array::from_fn(|d| o[d] - margin as f64 * h[d]),
            std::array::from_fn(|d| l[d] + 2.0 * margin as f64 * h[d]),
            [cells + 2 * margin; 3],
        )?;
        let md = material.dims();
        let weights = std::array::from_fn(|d| {
            (0..cells + 2 * margin)
                .map(|s| {
                    if s < margin || s >= margin + cells {
                        return Vec::new();
                    }
                    let a = (s - margin) as f64 * h[d];
                    let b = a + h[d];
                    let hm = l[d] / md[d] as f64;
                    (0..md[d])
                        .filter_map(|i| {
                            let lo = a.max(i as f64 * hm);
                            let hi = b.min((i + 1) as f64 * hm);
                            (hi > lo).then(|| (i, (hi - lo) / h[d]))
                        })
                        .collect()
                })
                .collect()
        });
        Ok(Self {
            grid,
            pad_factor,
            weights,
            material,
        })
    }

    pub fn grid(&self) -> BoxGrid {
        self.grid
    }

    pub fn pad_factor(&self) -> f64 {
        self.pad_factor
    }

    /// Cell averages of `χ_Ω m` on the stray grid.
    pub fn transfer(&self, m: &Field, mask: &DomainMask) -> Result<Field> {
        if m.grid() != &Grid::Box(self.material)
            || mask.grid() != &self.material
            || m.rank() != Rank::Vector3
        {
            return Err(Error::InvalidArgument(
                "magnetization must be a vector field on the material grid".into(),
            ));
        }
        let dims = self.grid.dims();
        let md = self.material.dims();
        let n = self.grid.n_points();
        let mut out = vec![0.0; 3 * n];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = ravel([i, j, k], dims);
                    for &(a, wa) in &self.weights[0][i] {
                        for &(b, wb) in &self.weights[1][j] {
                            for &(c, wc) in &self.weights[2][k] {
                                let q = ravel([a, b, c], md);
                                if !mask.is_inside(q) {
                                    continue;
                                }
                                let w = wa * wb * wc;
                                let v = m.vector_at(q);
                                for comp in 0..3 {
                                    out[comp * n + p] += w * v[comp];
                                }
                            }
                        }
                    }
                }
            }
        }
        Field::new(Grid::Box(self.grid), Rank::Vector3, out)
    }

    pub fn energy(&self, m: &Field, mask: &DomainMask, mu0: f64) -> Result<f64> {
        stray_energy_of_field(&self.transfer(m, mask)?, mu0, self.pad_factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vec3;

    #[test]
    fn extruded_transfer_matches_direct_sampling() {
        let material = BoxGrid::unit([32, 1, 1]).unwrap();
        let m = Field::from_vector_fn(Grid::Box(material), |x| {
            let t = 2.0 * x[0];
            Vec3::new(t.cos(), t.sin(), 0.0)
        })
        .unwrap();
        let model = StrayModel::new(material, 8, 2, 2.0).unwrap();
        let f = model.transfer(&m, &DomainMask::full(material)).unwrap();
        let g = Grid::Box(model.grid());
        for p in 0..g.n_points() {
            let x = g.point_at(p);
            let inside = (0..3).all(|d| x[d] > 0.0 && x[d] < 1.0);
            let v = f.vector_at(p);
            if inside {
                // average of four material samples around the stray cell center
                let i = ((x[0] * 8.0).floor() as usize) * 4;
                let mean: Vec3 = (i..i + 4).map(|q| m.vector_at(q)).sum::<Vec3>() / 4.0;
                assert!((v - mean).norm() < 1e-14);
            } else {
                assert_eq!(v, Vec3::zeros());
            }
        }
        let e = model.energy(&m, &DomainMask::full(material), 1.0).unwrap();
        assert!(e > 0.0 && e < 0.5);
    }

    #[test]
    fn uniform_cube_energy_is_near_one_sixth() {
        // the demagnetizing factor of a cube is 1/3 along each edge
        let material = BoxGrid::unit([16, 1, 1]).unwrap();
        let m = Field::from_vector_fn(Grid::Box(material), |_| Vec3::x()).unwrap();
        let model = StrayModel::new(material, 16, 4, 2.0).unwrap();
        let e = model.energy(&m, &DomainMask::full(material), 1.0).unwrap();
        assert!((e - 1.0 / 6.0).abs() < 0.02, "{e}");
    }
}
