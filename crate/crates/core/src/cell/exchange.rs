use super::cg::pcg;
use super::{default_max_iter, CorrectorSolution};
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::fields::{CellGrid, Field, Grid, Rank};
use crate::linalg::{sum_compensated, Mat3, Mat9, Vec3};
use rayon::prelude::*;

/// Scalar periodic problem `min mean a |d + ∇φ|²` on a cell grid.
pub(crate) struct ScalarCell {
    spectral: Spectral,
    coeff: Vec<f64>,
    reference: f64,
}

impl ScalarCell {
    pub fn new(a_field: &Field) -> Result<(Self, CellGrid)> {
        let grid = match a_field.grid() {
            Grid::Cell(g) if a_field.rank() == Rank::Scalar => *g,
            _ => {
                return Err(Error::InvalidArgument(
                    "exchange coefficient must be a scalar field on a cell grid".into(),
                ))
            }
        };
        let coeff = a_field.samples().to_vec();
        let min = coeff.iter().copied().fold(f64::INFINITY, f64::min);
        let max = coeff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(min > 0.0 && max.is_finite()) {
            return Err(Error::CoefficientBounds { min, max });
        }
        let reference = coeff.iter().sum::<f64>() / coeff.len() as f64;
        Ok((
            Self {
                spectral: Spectral::new(grid.dims(), [1.0; 3]),
                coeff,
                reference,
            },
            grid,
        ))
    }

    fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let mut g = self.spectral.gradient(phi);
        for comp in g.iter_mut() {
            for (v, a) in comp.iter_mut().zip(&self.coeff) {
                *v *= a;
            }
        }
        let mut div = self.spectral.divergence([&g[0], &g[1], &g[2]]);
        div.iter_mut().for_each(|v| *v = -*v);
        div
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let mut hat = self.spectral.forward_real(r);
        let a = self.reference;
        self.spectral.for_each_k(|p, k| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            hat[p] = if k2 > 0.0 {
                hat[p] / (a * k2)
            } else {
                0.0.into()
            };
        });
        self.spectral.inverse_real(hat)
    }

    /// Corrector for the constant gradient `d`; returns `(φ, residual, iterations)`.
    pub fn solve(&self, d: &Vec3, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64, usize)> {
        let flux: [Vec<f64>; 3] =
            std::array::from_fn(|j| self.coeff.iter().map(|a| a * d[j]).collect());
        let b = self.spectral.divergence([&flux[0], &flux[1], &flux[2]]);
        let out = pcg(
            |x| self.apply(x),
            |r| self.precondition(r),
            &b,
            tol,
            max_iter,
        )?;
        let mut phi = out.x;
        let mean = phi.iter().sum::<f64>() / phi.len() as f64;
        phi.iter_mut().for_each(|v| *v -= mean);
        Ok((phi, out.residual, out.iterations))
    }

    pub fn gradient(&self, phi: &[f64]) -> [Vec<f64>; 3] {
        self.spectral.gradient(phi)
    }

    pub fn coeff(&self) -> &[f64] {
        &self.coeff
    }
}

/// Solves `T_hom(A) = min mean a |A + ∇φ|²`, one scalar problem per row of `A`.
pub fn solve_exchange_cell(
    a_field: &Field,
    a: &Mat3,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<CorrectorSolution> {
    check_tol(tol)?;
    let (cell, grid) = ScalarCell::new(a_field)?;
    let max_iter = max_iter.unwrap_or_else(|| default_max_iter(grid.dims()));
    let rows: Vec<(Vec<f64>, f64, usize)> = (0..3)
        .into_par_iter()
        .map(|r| cell.solve(&a.row(r).transpose(), tol, max_iter))
        .collect::<Result<_>>()?;
    let n = grid.n_points();
    let grads: Vec<_> = rows.iter().map(|(phi, _, _)| cell.gradient(phi)).collect();
    let value = sum_compensated((0..3).flat_map(|r| {
        let g = &grads[r];
        let coeff = &cell.coeff;
        (0..n).map(move |p| {
            let v = Vec3::new(
                a[(r, 0)] + g[0][p],
                a[(r, 1)] + g[1][p],
                a[(r, 2)] + g[2][p],
            );
            coeff[p] * v.norm_squared()
        })
    })) / n as f64;
    let residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let iterations = rows.iter().map(|r| r.2).sum();
    let phi = Field::from_components(
        Grid::Cell(grid),
        Rank::Vector3,
        rows.into_iter().map(|r| r.0).collect(),
    )?;
    Ok(CorrectorSolution {
        phi,
        value,
        residual,
        iterations,
    })
}

pub(crate) fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "solver tolerance must be positive, got {tol}"
        )))
    }
}

/// Homogenized exchange density `T_hom(A) = Σ_r A_r K A_rᵀ` for an effective tensor `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogenizedExchange {
    tensor: Mat3,
}

impl HomogenizedExchange {
    pub fn from_tensor(tensor: Mat3) -> Self {
        Self {
            tensor: (tensor + tensor.transpose()) * 0.5,
        }
    }

    pub fn isotropic(a0: f64) -> Self {
        Self::from_tensor(Mat3::identity() * a0)
    }

    pub fn tensor(&self) -> Mat3 {
        self.tensor
    }

    pub fn value(&self, a: &Mat3) -> f64 {
        (a * self.tensor * a.transpose()).trace()
    }

    /// Block-diagonal matrix on row-major flattened gradients.
    pub fn matrix(&self) -> Mat9 {
        let mut m = Mat9::zeros();
        for r in 0..3 {
            m.fixed_view_mut::<3, 3>(3 * r, 3 * r)
                .copy_from(&self.tensor);
        }
        m
    }
}

/// Unit-direction correctors `χ_j` with their gradients; the corrector for a
/// general gradient `A` is `φ_r = Σ_j A_rj χ_j`.
#[derive(Debug, Clone)]
pub struct ExchangeCorrectors {
    grid: CellGrid,
    chi: [Vec<f64>; 3],
    grad_chi: [[Vec<f64>; 3]; 3],
    homogenized: HomogenizedExchange,
    pub residual: f64,
    pub iterations: usize,
}

impl ExchangeCorrectors {
    pub fn solve(a_field: &Field, tol: f64, max_iter: Option<usize>) -> Result<Self> {
        check_tol(tol)?;
        let (cell, grid) = ScalarCell::new(a_field)?;
        let max_iter = max_iter.unwrap_or_else(|| default_max_iter(grid.dims()));
        let sols: Vec<(Vec<f64>, f64, usize)> = (0..3)
            .into_par_iter()
            .map(|j| cell.solve(&Vec3::ith(j, 1.0), tol, max_iter))
            .collect::<Result<_>>()?;
        let residual = sols.iter().map(|s| s.1).fold(0.0, f64::max);
        let iterations = sols.iter().map(|s| s.2).sum();
        let chi: [Vec<f64>; 3] = std::array::from_fn(|j| sols[j].0.clone());
        let grad_chi: [[Vec<f64>; 3]; 3] = std::array::from_fn(|j| cell.gradient(&chi[j]));
        let n = grid.n_points();
        let mut k = Mat3::zeros();
        for p in 0..n {
            let v: [Vec3; 3] = std::array::from_fn(|j| {
                Vec3::ith(j, 1.0)
                    + Vec3::new(grad_chi[j][0][p], grad_chi[j][1][p], grad_chi[j][2][p])
            });
            for j in 0..3 {
                for l in 0..3 {
                    k[(j, l)] += cell.coeff()[p] * v[j].dot(&v[l]);
                }
            }
        }
        Ok(Self {
            grid,
            chi,
            grad_chi,
            homogenized: HomogenizedExchange::from_tensor(k / n as f64),
            residual,
            iterations,
        })
    }

    pub fn grid(&self) -> CellGrid {
        self.grid
    }

    pub fn homogenized(&self) -> HomogenizedExchange {
        self.homogenized
    }

    /// `φ(y_p)` for macroscopic gradient `A`.
    pub fn phi_at(&self, a: &Mat3, p: usize) -> Vec3 {
        let chi = Vec3::new(self.chi[0][p], self.chi[1][p], self.chi[2][p]);
        a * chi
    }

    /// `∇_y φ(y_p)` for macroscopic gradient `A`.
    pub fn grad_phi_at(&self, a: &Mat3, p: usize) -> Mat3 {
        // column l of D: ∂_l χ_j arranged as D[(j, l)]
        let d = Mat3::from_fn(|j, l| self.grad_chi[j][l][p]);
        a * d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::PhaseLayout;

    fn laminate_field(dims: [usize; 3], values: [f64; 2]) -> Field {
        let layout = PhaseLayout::laminate(0, 0.5, values).unwrap();
        let grid = Grid::Cell(CellGrid::with_dims(dims).unwrap());
        Field::from_scalar_fn(grid, |y| layout.value(y)).unwrap()
    }

    #[test]
    fn constant_coefficient_has_zero_corrector() {
        let grid = Grid::Cell(CellGrid::new(8).unwrap());
        let a = Field::from_scalar_fn(grid, |_| 1.0).unwrap();
        let sol = solve_exchange_cell(&a, &Mat3::identity(), 1e-10, None).unwrap();
        assert!((sol.value - 3.0).abs() < 1e-12);
        assert!(sol.phi.max_abs() < 1e-12);
    }

    #[test]
    fn laminate_means() {
        let a = laminate_field([64, 1, 1], [1.0, 4.0]);
        let long = solve_exchange_cell(
            &a,
            &Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            1e-10,
            None,
        )
        .unwrap();
        assert!((long.value - 1.6).abs() < 1e-9, "{}", long.value);
        let trans = solve_exchange_cell(
            &a,
            &Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            1e-10,
            None,
        )
        .unwrap();
        assert!((trans.value - 2.5).abs() < 1e-12);
        let mean = long.phi.mean();
        assert!(mean.iter().all(|m| m.abs() < 1e-12));
    }

    #[test]
    fn full_3d_grid_matches_extruded_cell() {
        let thin = ExchangeCorrectors::solve(&laminate_field([16, 1, 1], [1.0, 4.0]), 1e-11, None)
            .unwrap();
        let full = ExchangeCorrectors::solve(&laminate_field([16, 4, 4], [1.0, 4.0]), 1e-11, None)
            .unwrap();
        assert!((thin.homogenized().tensor() - full.homogenized().tensor()).norm() < 1e-9);
    }

    #[test]
    fn tensor_reproduces_direct_solves() {
        let a = laminate_field([32, 1, 1], [2.0, 5.0]);
        let corr = ExchangeCorrectors::solve(&a, 1e-11, None).unwrap();
        let g = Mat3::new(0.3, -1.0, 0.2, 0.7, 0.1, 0.0, -0.4, 0.5, 1.1);
        let direct = solve_exchange_cell(&a, &g, 1e-11, None).unwrap();
        let t = corr.homogenized().value(&g);
        assert!((t - direct.value).abs() < 1e-9 * t);
        let m = corr.homogenized().matrix();
        assert!((crate::linalg::quad9(&m, &g) - t).abs() < 1e-12 * t);
        let p = 5;
        let phi = corr.phi_at(&g, p);
        for r in 0..3 {
            assert!((phi[r] - direct.phi.component(r)[p]).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_nonpositive_coefficient() {
        let a = laminate_field([8, 1, 1], [0.0, 1.0]);
        assert!(matches!(
            solve_exchange_cell(&a, &Mat3::identity(), 1e-10, None),
            Err(Error::CoefficientBounds { .. })
        ));
    }
}
