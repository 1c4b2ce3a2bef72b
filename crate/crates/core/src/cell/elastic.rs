use super::cg::pcg;
use super::exchange::check_tol;
use super::{default_max_iter, CorrectorSolution};
use crate::error::{Error, Result};
use crate::fft::Spectral;
use crate::fields::{CellGrid, Field, Grid, Rank};
use crate::linalg::{basis, sum_compensated, Mat3, Mat9, Vec3};
use crate::material::MaterialLaw;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

/// Discretized elastic cell functional `φ ↦ mean Q(y, A + ∇φ, ν)` at fixed `ν`.
pub struct ElasticCell {
    grid: CellGrid,
    spectral: Spectral,
    forms: Vec<Mat9>,
    form_of: Vec<usize>,
    /// Inverse of the mean-coefficient acoustic tensor per wavevector.
    green: Vec<Mat3>,
}

impl ElasticCell {
    pub fn new(law: &dyn MaterialLaw, grid: CellGrid, nu: &Vec3) -> Result<Self> {
        if !nu.iter().all(|v| v.is_finite()) || (nu.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "ν must be a unit vector, got {nu:?}"
            )));
        }
        let n = grid.n_points();
        let mut forms: Vec<Mat9> = Vec::new();
        let mut form_of = Vec::with_capacity(n);
        for p in 0..n {
            let m = law.q_matrix(Grid::Cell(grid).point_at(p), nu);
            let id = match forms.iter().position(|f| *f == m) {
                Some(id) => id,
                None => {
                    let eig = m.symmetric_eigen().eigenvalues.min();
                    if eig < -1e-10 * m.norm().max(1.0) {
                        return Err(Error::IndefiniteForm {
                            value: eig,
                            point: p,
                        });
                    }
                    forms.push(m);
                    forms.len() - 1
                }
            };
            form_of.push(id);
        }
        let mut mean = Mat9::zeros();
        for &id in &form_of {
            mean += forms[id];
        }
        mean /= n as f64;
        let spectral = Spectral::new(grid.dims(), [1.0; 3]);
        let mut green = vec![Mat3::zeros(); n];
        spectral.for_each_k(|p, k| {
            if k.iter().all(|&v| v == 0.0) {
                return;
            }
            let gamma = Mat3::from_fn(|i, l| {
                let mut acc = 0.0;
                for j in 0..3 {
                    for m in 0..3 {
                        acc += mean[(3 * i + j, 3 * l + m)] * k[j] * k[m];
                    }
                }
                acc
            });
            green[p] = gamma.try_inverse().unwrap_or_else(|| {
                gamma
                    .pseudo_inverse(1e-14)
                    .unwrap_or_else(|_| Mat3::zeros())
            });
        });
        Ok(Self {
            grid,
            spectral,
            forms,
            form_of,
            green,
        })
    }

    pub fn grid(&self) -> CellGrid {
        self.grid
    }

    fn n(&self) -> usize {
        self.grid.n_points()
    }

    /// Nine gradient components `∂_j φ_i` at `3 i + j`.
    pub(crate) fn gradient(&self, phi: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n();
        (0..3)
            .flat_map(|i| self.spectral.gradient(&phi[i * n..(i + 1) * n]))
            .collect()
    }

    fn stress(&self, grad: &[Vec<f64>], offset: Option<&Mat3>) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut out = vec![vec![0.0; n]; 9];
        let a = offset.map(crate::linalg::flatten).unwrap_or([0.0; 9]);
        for p in 0..n {
            let m = &self.forms[self.form_of[p]];
            let g: [f64; 9] = std::array::from_fn(|c| a[c] + grad.get(c).map_or(0.0, |v| v[p]));
            for r in 0..9 {
                let mut acc = 0.0;
                for c in 0..9 {
                    acc += m[(r, c)] * g[c];
                }
                out[r][p] = acc;
            }
        }
        out
    }

    fn divergence(&self, stress: &[Vec<f64>], sign: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.n());
        for i in 0..3 {
            let d =
                self.spectral
                    .divergence([&stress[3 * i], &stress[3 * i + 1], &stress[3 * i + 2]]);
            out.extend(d.into_iter().map(|v| sign * v));
        }
        out
    }

    fn apply(&self, phi: &[f64]) -> Vec<f64> {
        let grad = self.gradient(phi);
        self.divergence(&self.stress(&grad, None), -1.0)
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let n = self.n();
        let hats: Vec<Vec<Complex64>> = (0..3)
            .map(|i| self.spectral.forward_real(&r[i * n..(i + 1) * n]))
            .collect();
        let mut out: Vec<Vec<Complex64>> = vec![vec![Complex64::default(); n]; 3];
        for p in 0..n {
            let g = &self.green[p];
            for i in 0..3 {
                out[i][p] =
                    hats[0][p] * g[(i, 0)] + hats[1][p] * g[(i, 1)] + hats[2][p] * g[(i, 2)];
            }
        }
        out.into_iter()
            .flat_map(|h| self.spectral.inverse_real(h))
            .collect()
    }

    /// Mean of `Q(y, A + ∇φ, ν)` over the cell.
    pub fn energy(&self, a: &Mat3, phi: &[f64]) -> f64 {
        let grad = self.gradient(phi);
        let stress = self.stress(&grad, Some(a));
        let flat = crate::linalg::flatten(a);
        sum_compensated((0..self.n()).flat_map(|p| {
            let (stress, grad) = (&stress, &grad);
            (0..9).map(move |c| stress[c][p] * (flat[c] + grad[c][p]))
        })) / self.n() as f64
    }

    pub fn solve(&self, a: &Mat3, tol: f64, max_iter: Option<usize>) -> Result<CorrectorSolution> {
        check_tol(tol)?;
        let max_iter = max_iter.unwrap_or_else(|| default_max_iter(self.grid.dims()));
        let b = self.divergence(&self.stress(&[], Some(a)), 1.0);
        let out = pcg(
            |x| self.apply(x),
            |r| self.precondition(r),
            &b,
            tol,
            max_iter,
        )?;
        let n = self.n();
        let mut phi = out.x;
        for i in 0..3 {
            let mean = phi[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64;
            phi[i * n..(i + 1) * n].iter_mut().for_each(|v| *v -= mean);
        }
        let value = self.energy(a, &phi);
        if value < -1e-12 * a.norm_squared().max(1.0) {
            return Err(Error::IndefiniteForm { value, point: 0 });
        }
        Ok(CorrectorSolution {
            phi: Field::new(Grid::Cell(self.grid), Rank::Vector3, phi)?,
            value: value.max(0.0),
            residual: out.residual,
            iterations: out.iterations,
        })
    }

    /// Matrix of `A ↦ Q_hom(A, ν)` from nine basis solves. Pair values follow
    /// from superposing basis correctors, since the corrector is linear in `A`.
    pub fn tabulate(&self, tol: f64, max_iter: Option<usize>) -> Result<Mat9> {
        let sols: Vec<CorrectorSolution> = (0..9)
            .into_par_iter()
            .map(|a| self.solve(&basis(a), tol, max_iter))
            .collect::<Result<_>>()?;
        let mut m = Mat9::zeros();
        for a in 0..9 {
            m[(a, a)] = sols[a].value;
            for b in 0..a {
                let phi: Vec<f64> = sols[a]
                    .phi
                    .samples()
                    .iter()
                    .zip(sols[b].phi.samples())
                    .map(|(x, y)| x + y)
                    .collect();
                let pair = self.energy(&(basis(a) + basis(b)), &phi);
                let v = 0.5 * (pair - sols[a].value - sols[b].value);
                m[(a, b)] = v;
                m[(b, a)] = v;
            }
        }
        Ok(m)
    }
}

/// Solves `Q_hom(A, ν) = min mean Q(y, A + ∇φ, ν)` on `grid`.
pub fn solve_elastic_cell(
    law: &dyn MaterialLaw,
    grid: CellGrid,
    a: &Mat3,
    nu: &Vec3,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<CorrectorSolution> {
    ElasticCell::new(law, grid, nu)?.solve(a, tol, max_iter)
}

pub fn tabulate_elastic_tensor(
    law: &dyn MaterialLaw,
    grid: CellGrid,
    nu: &Vec3,
    tol: f64,
) -> Result<Mat9> {
    ElasticCell::new(law, grid, nu)?.tabulate(tol, None)
}

/// How directions are keyed when caching per-`ν` tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuKey {
    /// Cache on the exact bit pattern of `ν`.
    Exact,
    /// Snap `ν` to the nearest of 162 near-uniform directions first.
    Design162,
}

/// `(A, ν) ↦ Q_hom(A, ν)` with per-direction tensors tabulated on demand.
pub struct HomogenizedElastic {
    law: Arc<dyn MaterialLaw>,
    grid: CellGrid,
    tol: f64,
    key: NuKey,
    resolve: bool,
    memo: Mutex<BTreeMap<[u64; 3], Mat9>>,
}

impl HomogenizedElastic {
    pub fn new(law: Arc<dyn MaterialLaw>, grid: CellGrid, tol: f64, key: NuKey) -> Self {
        Self {
            law,
            grid,
            tol,
            key,
            resolve: true,
            memo: Mutex::new(BTreeMap::new()),
        }
    }

    /// Disallow solving for directions not already tabulated.
    pub fn without_resolve(mut self) -> Self {
        self.resolve = false;
        self
    }

    pub fn insert(&self, nu: &Vec3, tensor: Mat9) {
        let nu = self.canonical(nu);
        self.memo.lock().unwrap().insert(bits(&nu), tensor);
    }

    fn canonical(&self, nu: &Vec3) -> Vec3 {
        if !self.law.depends_on_nu() {
            return Vec3::z();
        }
        match self.key {
            NuKey::Exact => *nu,
            NuKey::Design162 => nearest_design_direction(nu),
        }
    }

    pub fn tensor(&self, nu: &Vec3) -> Result<Mat9> {
        let nu = self.canonical(nu);
        let key = bits(&nu);
        if let Some(m) = self.memo.lock().unwrap().get(&key) {
            return Ok(*m);
        }
        if !self.resolve {
            return Err(Error::MissingTensor {
                nu: [nu.x, nu.y, nu.z],
            });
        }
        let m = tabulate_elastic_tensor(self.law.as_ref(), self.grid, &nu, self.tol)?;
        self.memo.lock().unwrap().insert(key, m);
        Ok(m)
    }

    pub fn value(&self, a: &Mat3, nu: &Vec3) -> Result<f64> {
        Ok(crate::linalg::quad9(&self.tensor(nu)?, a))
    }

    pub fn cached(&self) -> usize {
        self.memo.lock().unwrap().len()
    }
}

fn bits(v: &Vec3) -> [u64; 3] {
    [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()]
}

/// Vertices of the twice-subdivided icosahedron.
pub fn spherical_design_162() -> Vec<Vec3> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..2 {
        let mut mids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    verts
}

pub fn nearest_design_direction(nu: &Vec3) -> Vec3 {
    use std::sync::OnceLock;
    static DESIGN: OnceLock<Vec<Vec3>> = OnceLock::new();
    let design = DESIGN.get_or_init(spherical_design_162);
    *design
        .iter()
        .max_by(|a, b| a.dot(nu).total_cmp(&b.dot(nu)))
        .expect("design is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{quad9, sym};
    use crate::material::{reference_density_d1, reference_density_d2, PhaseLayout};

    fn laminate_d1() -> crate::material::DensitySpec {
        reference_density_d1(
            PhaseLayout::laminate(0, 0.5, [1.0, 10.0]).unwrap(),
            4.0,
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn constant_coefficients_need_no_corrector() {
        let spec = reference_density_d2(
            PhaseLayout::Constant(2.0),
            PhaseLayout::Constant(0.5),
            4.0,
            3.0,
        )
        .unwrap();
        let nu = Vec3::new(0.0, 0.6, 0.8);
        let g = Mat3::new(0.1, 0.2, 0.0, -0.3, 0.4, 0.1, 0.0, 0.2, -0.1);
        let sol =
            solve_elastic_cell(&spec, CellGrid::new(8).unwrap(), &g, &nu, 1e-10, None).unwrap();
        assert!(sol.phi.max_abs() < 1e-12);
        let q = spec.q([0.0; 3], &g, &nu);
        assert!((sol.value - q).abs() <= 1e-12 * q);
        let m = tabulate_elastic_tensor(&spec, CellGrid::new(4).unwrap(), &nu, 1e-10).unwrap();
        assert!((m - spec.q_matrix([0.0; 3], &nu)).norm() < 1e-8);
    }

    #[test]
    fn skew_argument_has_zero_value() {
        let spec = reference_density_d1(PhaseLayout::Constant(1.0), 4.0, 3.0).unwrap();
        let g = Mat3::new(0.0, 1.0, -2.0, -1.0, 0.0, 0.5, 2.0, -0.5, 0.0);
        let sol = solve_elastic_cell(
            &spec,
            CellGrid::new(4).unwrap(),
            &g,
            &Vec3::z(),
            1e-10,
            None,
        )
        .unwrap();
        assert!(sol.value.abs() < 1e-14);
        assert!(sol.phi.max_abs() < 1e-14);
    }

    #[test]
    fn laminate_lies_between_bounds_and_tabulation_is_consistent() {
        let spec = laminate_d1();
        let grid = CellGrid::with_dims([32, 1, 1]).unwrap();
        let a = sym(&Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        let sol = solve_elastic_cell(&spec, grid, &a, &Vec3::z(), 1e-11, None).unwrap();
        let upper = 0.5
            * (spec.q([0.1, 0.0, 0.0], &a, &Vec3::z()) + spec.q([0.9, 0.0, 0.0], &a, &Vec3::z()));
        assert!(sol.value < upper - 1e-3 && sol.value > 0.0);

        let m = tabulate_elastic_tensor(&spec, grid, &Vec3::z(), 1e-11).unwrap();
        assert!((m - m.transpose()).norm() < 1e-10);
        assert!(m.symmetric_eigen().eigenvalues.min() > -1e-9);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
        for _ in 0..10 {
            let g = crate::linalg::random_matrix(&mut rng, 1.0);
            let direct = solve_elastic_cell(&spec, grid, &g, &Vec3::z(), 1e-11, None).unwrap();
            assert!((quad9(&m, &g) - direct.value).abs() <= 1e-6 * direct.value);
        }
    }

    #[test]
    fn memo_reuses_tensors() {
        let spec = reference_density_d2(
            PhaseLayout::laminate(0, 0.5, [1.0, 2.0]).unwrap(),
            PhaseLayout::Constant(1.0),
            4.0,
            3.0,
        )
        .unwrap();
        let h = HomogenizedElastic::new(
            Arc::new(spec),
            CellGrid::with_dims([8, 1, 1]).unwrap(),
            1e-10,
            NuKey::Design162,
        );
        let nu = Vec3::new(0.1, 0.2, 1.0).normalize();
        let a = h.value(&Mat3::identity(), &nu).unwrap();
        let b = h
            .value(
                &Mat3::identity(),
                &(nu + Vec3::new(1e-4, 0.0, 0.0)).normalize(),
            )
            .unwrap();
        assert_eq!(a, b);
        assert_eq!(h.cached(), 1);
        let strict = HomogenizedElastic::new(
            Arc::new(laminate_d2()),
            CellGrid::with_dims([8, 1, 1]).unwrap(),
            1e-10,
            NuKey::Exact,
        )
        .without_resolve();
        assert!(matches!(
            strict.tensor(&nu),
            Err(Error::MissingTensor { .. })
        ));
    }

    fn laminate_d2() -> crate::material::DensitySpec {
        reference_density_d2(
            PhaseLayout::Constant(1.0),
            PhaseLayout::laminate(0, 0.5, [0.0, 1.0]).unwrap(),
            4.0,
            3.0,
        )
        .unwrap()
    }

    #[test]
    fn design_has_162_unit_directions() {
        let d = spherical_design_162();
        assert_eq!(d.len(), 162);
        assert!(d.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        let min_sep = d
            .iter()
            .enumerate()
            .flat_map(|(i, a)| d[i + 1..].iter().map(move |b| (a - b).norm()))
            .fold(f64::INFINITY, f64::min);
        assert!(min_sep > 0.15);
    }
}
