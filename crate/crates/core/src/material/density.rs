use super::layout::PhaseLayout;
use crate::error::{Error, Result};
use crate::linalg::{basis, sym, Mat3, Mat9, Vec3};

/// A magnetoelastic material law: stored energy `W`, its quadratic form `Q`
/// at the identity and the exchange coefficient `a`.
pub trait MaterialLaw: Send + Sync {
    fn w(&self, y: [f64; 3], f: &Mat3, nu: &Vec3) -> f64;
    fn q(&self, y: [f64; 3], g: &Mat3, nu: &Vec3) -> f64;
    fn a(&self, y: [f64; 3]) -> f64;
    fn params(&self) -> LawParams;

    /// Declared bounds `C1 <= a <= C2`.
    fn exchange_bounds(&self) -> (f64, f64);

    /// Whether `W` or `Q` change with the magnetization direction.
    fn depends_on_nu(&self) -> bool {
        true
    }

    /// Whether any coefficient (elastic or exchange) varies along `axis` of the cell.
    fn varies_along(&self, _axis: usize) -> bool {
        true
    }

    /// Whether the elastic coefficients vary at all over the cell.
    fn elastic_is_homogeneous(&self) -> bool {
        false
    }

    fn exchange_is_homogeneous(&self) -> bool {
        false
    }

    /// Matrix of `G ↦ Q(y, G, ν)` on row-major flattened matrices, by polarization.
    fn q_matrix(&self, y: [f64; 3], nu: &Vec3) -> Mat9 {
        let mut m = Mat9::zeros();
        let diag: [f64; 9] = std::array::from_fn(|a| self.q(y, &basis(a), nu));
        for a in 0..9 {
            m[(a, a)] = diag[a];
            for b in 0..a {
                let v = 0.5 * (self.q(y, &(basis(a) + basis(b)), nu) - diag[a] - diag[b]);
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LawParams {
    /// Growth exponent, `p > 3`.
    pub p: f64,
    /// Compression barrier exponent, `s > p/(p-2)`.
    pub s: f64,
    /// Vacuum permeability.
    pub mu0: f64,
}

impl Default for LawParams {
    fn default() -> Self {
        Self {
            p: 4.0,
            s: 3.0,
            mu0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    D1,
    D2,
}

/// The two shipped reference densities.
///
/// `D1`: `W = c(y) [dist² + dist^p](F, SO(3)) + (det F^{-s} - 1)²`.
/// `D2`: `D1` plus a frame-indifferent magnetostrictive coupling through
/// `FᵀF` and `Fᵀν`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub kind: DensityKind,
    pub stiffness: PhaseLayout,
    pub kappa: PhaseLayout,
    pub exchange: PhaseLayout,
    pub params: LawParams,
}

pub fn reference_density_d1(stiffness: PhaseLayout, p: f64, s: f64) -> Result<DensitySpec> {
    check_exponents(p, s)?;
    check_positive(&stiffness, "stiffness")?;
    Ok(DensitySpec {
        kind: DensityKind::D1,
        stiffness,
        kappa: PhaseLayout::Constant(0.0),
        exchange: PhaseLayout::Constant(1.0),
        params: LawParams { p, s, mu0: 1.0 },
    })
}

pub fn reference_density_d2(
    stiffness: PhaseLayout,
    kappa: PhaseLayout,
    p: f64,
    s: f64,
) -> Result<DensitySpec> {
    check_exponents(p, s)?;
    check_positive(&stiffness, "stiffness")?;
    if kappa.min() < 0.0 {
        return Err(Error::InvalidArgument(
            "coupling modulus must be nonnegative".into(),
        ));
    }
    Ok(DensitySpec {
        kind: DensityKind::D2,
        stiffness,
        kappa,
        exchange: PhaseLayout::Constant(1.0),
        params: LawParams { p, s, mu0: 1.0 },
    })
}

fn check_exponents(p: f64, s: f64) -> Result<()> {
    if !(p > 3.0) {
        return Err(Error::InvalidArgument(format!("p must exceed 3, got {p}")));
    }
    if !(s > p / (p - 2.0)) {
        return Err(Error::InvalidArgument(format!(
            "s must exceed p/(p-2) = {}, got {s}",
            p / (p - 2.0)
        )));
    }
    Ok(())
}

fn check_positive(layout: &PhaseLayout, what: &str) -> Result<()> {
    if !(layout.min() > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "{what} values must be positive"
        )));
    }
    Ok(())
}

impl DensitySpec {
    pub fn with_exchange(mut self, exchange: PhaseLayout) -> Self {
        self.exchange = exchange;
        self
    }

    pub fn with_mu0(mut self, mu0: f64) -> Self {
        self.params.mu0 = mu0;
        self
    }

    /// `h̃(t) = (t^{-s} - 1)²` for `t > 0`, `+∞` otherwise.
    pub fn barrier(&self, det: f64) -> f64 {
        compression_barrier(det, self.params.s)
    }

    /// True where the coupling is set to zero because `Fᵀν` vanishes.
    pub fn coupling_degenerate(f: &Mat3, nu: &Vec3) -> bool {
        (f.transpose() * nu).norm_squared() == 0.0
    }

    fn coupling(&self, y: [f64; 3], f: &Mat3, nu: &Vec3) -> f64 {
        if self.kind == DensityKind::D1 {
            return 0.0;
        }
        let kappa = self.kappa.value(y);
        if kappa == 0.0 {
            return 0.0;
        }
        let b = f.transpose() * nu;
        let bb = b.norm_squared();
        if bb == 0.0 {
            return 0.0;
        }
        let strain = f.transpose() * f - Mat3::identity();
        let proj = b.dot(&(strain * b)) / (2.0 * bb);
        kappa * proj * proj
    }
}

/// Compression barrier `(t^{-s} - 1)²`, infinite for `t <= 0`.
pub fn compression_barrier(det: f64, s: f64) -> f64 {
    if det > 0.0 {
        let v = det.powf(-s) - 1.0;
        v * v
    } else {
        f64::INFINITY
    }
}

/// Distance to `SO(3)` from the singular values; on `det F < 0` the smallest
/// singular value enters as `σ + 1`.
pub fn dist_so3(f: &Mat3) -> Result<f64> {
    if !f.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("dist_so3 input"));
    }
    Ok(dist_so3_sq(f).sqrt())
}

/// Works with the eigenvalues `μ` of `FᵀF - Id` so that `σ - 1 = μ/(√(1+μ) + 1)`
/// keeps full relative accuracy near the identity.
pub(crate) fn dist_so3_sq(f: &Mat3) -> f64 {
    let strain = f.transpose() * f - Mat3::identity();
    let mut mu: Vec<f64> = strain
        .symmetric_eigenvalues()
        .iter()
        .map(|&m| m.max(-1.0))
        .collect();
    mu.sort_by(|a, b| a.total_cmp(b));
    let mut acc = 0.0;
    for (i, &m) in mu.iter().enumerate() {
        let s = (1.0 + m).sqrt();
        let dev = if i == 0 && f.determinant() < 0.0 {
            s + 1.0
        } else {
            m / (s + 1.0)
        };
        acc += dev * dev;
    }
    acc
}

impl MaterialLaw for DensitySpec {
    fn w(&self, y: [f64; 3], f: &Mat3, nu: &Vec3) -> f64 {
        if !f.iter().all(|v| v.is_finite()) {
            return f64::NAN;
        }
        let det = f.determinant();
        if det <= 0.0 {
            return f64::INFINITY;
        }
        let d2 = dist_so3_sq(f);
        let c = self.stiffness.value(y);
        c * (d2 + d2.powf(0.5 * self.params.p)) + self.barrier(det) + self.coupling(y, f, nu)
    }

    fn q(&self, y: [f64; 3], g: &Mat3, nu: &Vec3) -> f64 {
        let sg = sym(g);
        let tr = g.trace();
        let s = self.params.s;
        let mut q = 2.0 * self.stiffness.value(y) * sg.norm_squared() + 2.0 * s * s * tr * tr;
        if self.kind == DensityKind::D2 {
            let n2 = nu.norm_squared();
            if n2 > 0.0 {
                let proj = nu.dot(&(sg * nu)) / n2;
                q += 2.0 * self.kappa.value(y) * proj * proj;
            }
        }
        q
    }

    fn a(&self, y: [f64; 3]) -> f64 {
        self.exchange.value(y)
    }

    fn params(&self) -> LawParams {
        self.params
    }

    fn exchange_bounds(&self) -> (f64, f64) {
        (self.exchange.min(), self.exchange.max())
    }

    fn depends_on_nu(&self) -> bool {
        self.kind == DensityKind::D2 && self.kappa.max() != 0.0
    }

    fn varies_along(&self, axis: usize) -> bool {
        self.stiffness.varies_along(axis)
            || self.exchange.varies_along(axis)
            || (self.kind == DensityKind::D2 && self.kappa.varies_along(axis))
    }

    fn elastic_is_homogeneous(&self) -> bool {
        self.stiffness.is_constant() && (self.kind == DensityKind::D1 || self.kappa.is_constant())
    }

    fn exchange_is_homogeneous(&self) -> bool {
        self.exchange.is_constant()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{quad9, random_matrix, random_rotation, random_unit};
    use rand::SeedableRng;

    fn d1() -> DensitySpec {
        reference_density_d1(
            PhaseLayout::laminate(0, 0.5, [1.0, 10.0]).unwrap(),
            4.0,
            3.0,
        )
        .unwrap()
    }

    fn d2() -> DensitySpec {
        reference_density_d2(
            PhaseLayout::laminate(0, 0.5, [1.0, 10.0]).unwrap(),
            PhaseLayout::laminate(1, 0.5, [2.0, 0.5]).unwrap(),
            4.0,
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn dist_examples() {
        assert!(dist_so3(&Mat3::identity()).unwrap() < 1e-15);
        assert!((dist_so3(&(Mat3::identity() * 2.0)).unwrap() - 3f64.sqrt()).abs() < 1e-14);
        let f = Mat3::from_diagonal(&Vec3::new(0.5, 1.0, 1.0));
        assert!((dist_so3(&f).unwrap() - 0.5).abs() < 1e-14);
        let refl = Mat3::from_diagonal(&Vec3::new(-1.0, 1.0, 1.0));
        assert!((dist_so3(&refl).unwrap() - 2.0).abs() < 1e-14);
        let mut bad = Mat3::identity();
        bad[(0, 1)] = f64::NAN;
        assert!(dist_so3(&bad).is_err());
    }

    #[test]
    fn dist_matches_polar_rotation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let f = Mat3::identity() + random_matrix(&mut rng, 0.3);
            if f.determinant() <= 0.0 {
                continue;
            }
            let svd = f.svd(true, true);
            let r = svd.u.unwrap() * svd.v_t.unwrap();
            let r = if r.determinant() < 0.0 { continue } else { r };
            assert!(((f - r).norm() - dist_so3(&f).unwrap()).abs() < 1e-12);
            let rot = random_rotation(&mut rng);
            assert!((dist_so3(&(rot * f)).unwrap() - dist_so3(&f).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishes_at_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for spec in [d1(), d2()] {
            for _ in 0..20 {
                let y = [rand::Rng::random::<f64>(&mut rng), 0.3, 0.8];
                let nu = random_unit(&mut rng);
                assert_eq!(spec.w(y, &Mat3::identity(), &nu), 0.0);
            }
        }
    }

    #[test]
    fn skew_matrix_has_zero_form() {
        let spec = reference_density_d1(PhaseLayout::Constant(1.0), 4.0, 3.0).unwrap();
        let g = Mat3::new(0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0);
        assert_eq!(spec.q([0.1; 3], &g, &Vec3::z()), 0.0);
    }

    #[test]
    fn analytic_d2_value() {
        let spec = reference_density_d2(
            PhaseLayout::Constant(1.0),
            PhaseLayout::Constant(1.0),
            4.0,
            3.0,
        )
        .unwrap();
        let g = basis(8);
        assert!((spec.q([0.0; 3], &g, &Vec3::z()) - 22.0).abs() < 1e-12);
    }

    #[test]
    fn frame_indifference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for spec in [d1(), d2()] {
            for _ in 0..200 {
                let f = Mat3::identity() + random_matrix(&mut rng, 0.4);
                let nu = random_unit(&mut rng);
                let r = random_rotation(&mut rng);
                let y = [0.37, 0.61, 0.2];
                let w0 = spec.w(y, &f, &nu);
                let w1 = spec.w(y, &(r * f), &(r * nu));
                if w0.is_infinite() {
                    assert!(w1.is_infinite());
                } else {
                    assert!((w0 - w1).abs() <= 1e-12 * w0.abs().max(1.0), "{w0} {w1}");
                }
            }
        }
    }

    #[test]
    fn barrier_blocks_orientation_reversal() {
        let spec = d1();
        let f = Mat3::from_diagonal(&Vec3::new(-0.5, 1.0, 1.0));
        assert!(spec.w([0.0; 3], &f, &Vec3::z()).is_infinite());
        assert!(spec.barrier(1.0) == 0.0);
        assert!(spec.barrier(1e-3) * 1e-3 > 1e10);
    }

    #[test]
    fn polarization_matrix_reproduces_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let spec = d2();
        let nu = random_unit(&mut rng);
        let m = spec.q_matrix([0.2, 0.7, 0.1], &nu);
        for _ in 0..20 {
            let g = random_matrix(&mut rng, 1.0);
            let q = spec.q([0.2, 0.7, 0.1], &g, &nu);
            assert!((quad9(&m, &g) - q).abs() < 1e-10 * q.max(1.0));
        }
        assert!((m - m.transpose()).norm() < 1e-14);
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(reference_density_d1(PhaseLayout::Constant(1.0), 3.0, 3.0).is_err());
        assert!(reference_density_d1(PhaseLayout::Constant(1.0), 4.0, 2.0).is_err());
        assert!(reference_density_d1(PhaseLayout::Constant(0.0), 4.0, 3.0).is_err());
    }
}
