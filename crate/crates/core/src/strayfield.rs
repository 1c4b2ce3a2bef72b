//! Magnetostatic potential `div(χ m) = μ₀ Δψ` on a zero-padded periodic box.

use crate::error::{Error, Result};
use crate::fft::{wavenumbers, Fft3};
use crate::fields::{extend_by_zero, ravel, BoxGrid, DomainMask, Field, Grid, Magnetization, Rank};
use rustfft::num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct StrayFieldSolution {
    /// Potential on the unpadded box, shifted to zero mean there.
    pub psi: Field,
    /// `∇ψ` on the unpadded box.
    pub grad_psi: Field,
    /// `(μ₀/2) ∫ |∇ψ|²` over the padded box, summed in real space.
    pub energy: f64,
    /// The same energy summed over Fourier modes.
    pub energy_fourier: f64,
    pub pad_factor: f64,
    pub padded_dims: [usize; 3],
}

impl StrayFieldSolution {
    /// Demagnetizing field `H = -∇ψ` at sample `p` of the unpadded box.
    pub fn field_at(&self, p: usize) -> [f64; 3] {
        let g = self.grad_psi.vector_at(p);
        [-g.x, -g.y, -g.z]
    }
}

struct Padded {
    base: BoxGrid,
    dims: [usize; 3],
    fft: Fft3,
    k: [Vec<f64>; 3],
}

impl Padded {
    fn new(base: BoxGrid, pad_factor: f64) -> Result<Self> {
        if !(pad_factor >= 2.0) || !pad_factor.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "pad factor must be >= 2, got {pad_factor}"
            )));
        }
        let n = base.dims();
        let dims: [usize; 3] = std::array::from_fn(|d| (pad_factor * n[d] as f64).ceil() as usize);
        let k = std::array::from_fn(|d| wavenumbers(dims[d], base.spacing(d) * dims[d] as f64));
        Ok(Self {
            base,
            dims,
            fft: Fft3::new(dims),
            k,
        })
    }

    fn len(&self) -> usize {
        self.dims.iter().product()
    }

    fn cell_volume(&self) -> f64 {
        self.base.cell_volume()
    }

    /// Zero-padded transform of one magnetization component.
    fn transform(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.base.dims();
        let mut data = vec![Complex64::default(); self.len()];
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    data[ravel([i, j, k], self.dims)] = values[ravel([i, j, k], n)].into();
                }
            }
        }
        self.fft.forward_supported(&mut data, n);
        data
    }

    fn for_each_k(&self, mut f: impl FnMut(usize, [f64; 3])) {
        let mut p = 0;
        for i2 in 0..self.dims[2] {
            for i1 in 0..self.dims[1] {
                for i0 in 0..self.dims[0] {
                    f(p, [self.k[0][i0], self.k[1][i1], self.k[2][i2]]);
                    p += 1;
                }
            }
        }
    }

    /// Accumulates `k·m̂` over components.
    fn charge(&self, m: &Field) -> Vec<Complex64> {
        let mut acc = vec![Complex64::default(); self.len()];
        for c in 0..3 {
            let hat = self.transform(m.component(c));
            self.for_each_k(|p, k| acc[p] += hat[p] * k[c]);
        }
        acc
    }

    fn restrict(&self, data: &[Complex64]) -> Vec<f64> {
        let n = self.base.dims();
        let mut out = Vec::with_capacity(self.base.n_points());
        for k in 0..n[2] {
            for j in 0..n[1] {
                for i in 0..n[0] {
                    out.push(data[ravel([i, j, k], self.dims)].re);
                }
            }
        }
        out
    }
}

fn check_source(m: &Field) -> Result<BoxGrid> {
    let Grid::Box(base) = *m.grid() else {
        return Err(Error::InvalidArgument(
            "stray field source must live on a box grid".into(),
        ));
    };
    if m.rank() != Rank::Vector3 {
        return Err(Error::InvalidArgument(
            "stray field source must be a vector field".into(),
        ));
    }
    let n = base.dims();
    for p in 0..base.n_points() {
        let idx = crate::fields::unravel(p, n);
        let on_face = (0..3).any(|d| idx[d] == 0 || idx[d] + 1 == n[d]);
        if on_face && m.vector_at(p).norm_squared() > 0.0 {
            return Err(Error::SupportTouchesBoundary);
        }
    }
    Ok(base)
}

fn check_mu0(mu0: f64) -> Result<()> {
    if mu0 > 0.0 && mu0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "mu0 must be positive, got {mu0}"
        )))
    }
}

/// Solves `ψ̂(k) = -i k·m̂(k) / (μ₀ |k|²)`, `ψ̂(0) = 0`, on the padded grid.
pub fn solve_stray_field(m_ext: &Field, mu0: f64, pad_factor: f64) -> Result<StrayFieldSolution> {
    check_mu0(mu0)?;
    let base = check_source(m_ext)?;
    let padded = Padded::new(base, pad_factor)?;
    let n_total = padded.len() as f64;
    let dv = padded.cell_volume();

    // ψ̂ in place of the charge
    let mut psi_hat = padded.charge(m_ext);
    let mut grad_energy_hat = 0.0;
    padded.for_each_k(|p, k| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        psi_hat[p] = if k2 > 0.0 {
            Complex64::new(0.0, -1.0) * psi_hat[p] / (mu0 * k2)
        } else {
            Complex64::default()
        };
        grad_energy_hat += k2 * psi_hat[p].norm_sqr();
    });
    let energy_fourier = 0.5 * mu0 * dv * grad_energy_hat / n_total;

    let mut grad = Vec::with_capacity(3);
    let mut grad_sq = 0.0;
    for d in 0..3 {
        let mut work = psi_hat.clone();
        padded.for_each_k(|p, k| work[p] *= Complex64::new(0.0, k[d]));
        padded.fft.inverse(&mut work);
        grad_sq += work.iter().map(|z| z.re * z.re).sum::<f64>();
        grad.push(padded.restrict(&work));
    }
    let energy = 0.5 * mu0 * dv * grad_sq;

    // stability: |∇ψ| <= |χ m| / μ₀ in L²
    let m_sq = m_ext.l2_norm_sq();
    let grad_norm = (grad_sq * dv).sqrt();
    let bound = m_sq.sqrt() / mu0;
    if grad_norm > bound * (1.0 + 1e-10) {
        return Err(Error::StabilityBound {
            grad: grad_norm,
            bound,
        });
    }

    padded.fft.inverse(&mut psi_hat);
    let mut psi = padded.restrict(&psi_hat);
    drop(psi_hat);
    let mean = psi.iter().sum::<f64>() / psi.len() as f64;
    psi.iter_mut().for_each(|v| *v -= mean);

    let grid = Grid::Box(base);
    Ok(StrayFieldSolution {
        psi: Field::new(grid, Rank::Scalar, psi)?,
        grad_psi: Field::from_components(grid, Rank::Vector3, grad)?,
        energy,
        energy_fourier,
        pad_factor,
        padded_dims: padded.dims,
    })
}

/// Self-energy of `χ_Ω m` computed from Fourier modes only.
pub fn stray_energy_of(
    m: &Magnetization,
    mask: &DomainMask,
    mu0: f64,
    pad_factor: f64,
) -> Result<f64> {
    check_mu0(mu0)?;
    let source = extend_by_zero(m.field(), mask)?;
    stray_energy_of_field(&source, mu0, pad_factor)
}

/// Energy-only solve for an arbitrary (not necessarily unit) source field.
pub fn stray_energy_of_field(source: &Field, mu0: f64, pad_factor: f64) -> Result<f64> {
    check_mu0(mu0)?;
    let base = check_source(source)?;
    let padded = Padded::new(base, pad_factor)?;
    let charge = padded.charge(source);
    let mut acc = 0.0;
    padded.for_each_k(|p, k| {
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if k2 > 0.0 {
            acc += charge[p].norm_sqr() / k2;
        }
    });
    Ok(0.5 * padded.cell_volume() * acc / (mu0 * padded.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vec3;
    use std::f64::consts::PI;

    fn ball_field(n: usize, radius: f64, m: Vec3) -> (Field, DomainMask) {
        let grid = BoxGrid::unit([n; 3]).unwrap();
        let mask = DomainMask::ball(grid, [0.5; 3], radius).unwrap();
        let f = Field::from_vector_fn(Grid::Box(grid), |_| m).unwrap();
        (extend_by_zero(&f, &mask).unwrap(), mask)
    }

    /// `∇ψ(x) = (1/(4π μ₀)) ∮ (m·n)(y) (y - x)/|y - x|³ dS` over a sphere.
    fn surface_gradient(x: Vec3, radius: f64, m: Vec3, n_theta: usize, n_phi: usize) -> Vec3 {
        let mut acc = Vec3::zeros();
        let du = 2.0 / n_theta as f64;
        let dphi = 2.0 * PI / n_phi as f64;
        for a in 0..n_theta {
            let u = -1.0 + (a as f64 + 0.5) * du;
            let s = (1.0 - u * u).sqrt();
            for b in 0..n_phi {
                let phi = (b as f64 + 0.5) * dphi;
                let normal = Vec3::new(s * phi.cos(), s * phi.sin(), u);
                let r = normal * radius - x;
                acc += r * (m.dot(&normal) / r.norm().powi(3));
            }
        }
        acc * (radius * radius * du * dphi / (4.0 * PI))
    }

    #[test]
    fn green_function_gives_one_third() {
        let m = Vec3::new(0.0, 0.0, 1.0);
        for x in [
            Vec3::zeros(),
            Vec3::new(0.1, -0.05, 0.2),
            Vec3::new(-0.3, 0.1, 0.0),
        ] {
            let g = surface_gradient(x, 1.0, m, 400, 400);
            assert!((g - m / 3.0).norm() < 1e-4, "{g:?}");
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let grid = BoxGrid::unit([8; 3]).unwrap();
        let f = Field::zeros(Grid::Box(grid), Rank::Vector3);
        let sol = solve_stray_field(&f, 1.0, 2.0).unwrap();
        assert_eq!(sol.energy, 0.0);
        assert!(sol.psi.max_abs() == 0.0);
    }

    #[test]
    fn small_ball_is_close_to_closed_form() {
        let r = 0.25;
        let (f, mask) = ball_field(32, r, Vec3::z());
        let sol = solve_stray_field(&f, 1.0, 2.0).unwrap();
        assert!((sol.energy - sol.energy_fourier).abs() <= 1e-10 * sol.energy);
        let exact = mask.volume() / 6.0;
        assert!(
            (sol.energy - exact).abs() < 0.05 * exact,
            "{} vs {exact}",
            sol.energy
        );
        let quick = stray_energy_of_field(&f, 1.0, 2.0).unwrap();
        assert!((quick - sol.energy).abs() <= 1e-10 * quick);
    }

    #[test]
    fn quadratic_and_bounded() {
        let (f, mask) = ball_field(16, 0.3, Vec3::new(0.6, 0.0, 0.8));
        let e1 = stray_energy_of_field(&f, 2.0, 2.0).unwrap();
        let e2 = stray_energy_of_field(&f.scaled(2.0), 2.0, 2.0).unwrap();
        assert!((e2 - 4.0 * e1).abs() <= 1e-10 * e2);
        assert!(e1 <= mask.volume() / (2.0 * 2.0));
        let sol = solve_stray_field(&f, 2.0, 2.5).unwrap();
        assert_eq!(sol.padded_dims, [40; 3]);
        assert!(sol.psi.mean()[0].abs() < 1e-14);
    }

    #[test]
    fn rejects_support_on_boundary() {
        let grid = BoxGrid::unit([8; 3]).unwrap();
        let f = Field::from_vector_fn(Grid::Box(grid), |_| Vec3::z()).unwrap();
        assert!(matches!(
            solve_stray_field(&f, 1.0, 2.0),
            Err(Error::SupportTouchesBoundary)
        ));
        let inner = Field::from_vector_fn(Grid::Box(grid), |x| {
            if (0..3).all(|d| (x[d] - 0.5).abs() < 0.3) {
                Vec3::z()
            } else {
                Vec3::zeros()
            }
        })
        .unwrap();
        assert!(solve_stray_field(&inner, 1.0, 1.5).is_err());
        assert!(solve_stray_field(&inner, 1.0, 2.0).is_ok());
    }
}
