use super::scenario::MacroFields;
use crate::cell::{ElasticCell, ExchangeCorrectors};
use crate::error::{Error, Result};
use crate::fields::{
    projection_jacobian, ravel, unravel, BoxGrid, CellGrid, Field, Grid, Magnetization, Rank,
};
use crate::linalg::{Mat3, Vec3};
use crate::material::MaterialLaw;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Elastic corrector `ψ` and its cell gradient for one `(A, ν)`.
#[derive(Debug)]
struct ElasticCorrector {
    phi: Vec<f64>,
    grad: Vec<Vec<f64>>,
}

impl ElasticCorrector {
    fn value(&self, q: usize, n: usize) -> Vec3 {
        Vec3::new(self.phi[q], self.phi[n + q], self.phi[2 * n + q])
    }

    fn gradient(&self, q: usize) -> Mat3 {
        Mat3::from_fn(|i, j| self.grad[3 * i + j][q])
    }
}

type ElasticKey = ([usize; 3], [u64; 9], [u64; 3]);

/// Cell correctors keyed by cell resolution and argument, solved on demand.
pub struct CorrectorBank {
    law: Arc<dyn MaterialLaw>,
    tol: f64,
    elastic: Mutex<HashMap<ElasticKey, Arc<ElasticCorrector>>>,
    exchange: Mutex<HashMap<[usize; 3], Arc<ExchangeCorrectors>>>,
}

impl CorrectorBank {
    pub fn new(law: Arc<dyn MaterialLaw>, tol: f64) -> Self {
        Self {
            law,
            tol,
            elastic: Mutex::new(HashMap::new()),
            exchange: Mutex::new(HashMap::new()),
        }
    }

    pub fn law(&self) -> &dyn MaterialLaw {
        self.law.as_ref()
    }

    /// Number of distinct elastic cell problems solved so far.
    pub fn elastic_solves(&self) -> usize {
        self.elastic.lock().unwrap().len()
    }

    fn elastic(&self, grid: CellGrid, a: &Mat3, nu: &Vec3) -> Result<Arc<ElasticCorrector>> {
        let nu = if self.law.depends_on_nu() {
            *nu
        } else {
            Vec3::z()
        };
        let key = (
            grid.dims(),
            std::array::from_fn(|c| a[(c / 3, c % 3)].to_bits()),
            [nu.x.to_bits(), nu.y.to_bits(), nu.z.to_bits()],
        );
        if let Some(c) = self.elastic.lock().unwrap().get(&key) {
            return Ok(c.clone());
        }
        let cell = ElasticCell::new(self.law.as_ref(), grid, &nu)?;
        let sol = cell.solve(a, self.tol, None)?;
        let phi = sol.phi.into_samples();
        let grad = cell.gradient(&phi);
        let c = Arc::new(ElasticCorrector { phi, grad });
        self.elastic.lock().unwrap().insert(key, c.clone());
        Ok(c)
    }

    pub fn exchange(&self, grid: CellGrid) -> Result<Arc<ExchangeCorrectors>> {
        if let Some(c) = self.exchange.lock().unwrap().get(&grid.dims()) {
            return Ok(c.clone());
        }
        let law = self.law.clone();
        let a = Field::from_scalar_fn(Grid::Cell(grid), |y| law.a(y))?;
        let c = Arc::new(ExchangeCorrectors::solve(&a, self.tol, None)?);
        self.exchange.lock().unwrap().insert(grid.dims(), c.clone());
        Ok(c)
    }
}

/// Fewest samples per period on an oscillating axis. Below four the only
/// nonzero mode is the Nyquist mode, which spectral derivatives drop.
pub const MIN_CELL_SAMPLES: usize = 4;

/// Cell grid on which `x/ε` of every material sample is a node.
pub fn commensurate_cell(law: &dyn MaterialLaw, material: BoxGrid, eps: f64) -> Result<CellGrid> {
    let k = (1.0 / eps).round();
    if (k * eps - 1.0).abs() > 1e-12 || k < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "eps = {eps} is not the reciprocal of an integer"
        )));
    }
    let k = k as usize;
    let md = material.dims();
    let lengths = material.side_lengths();
    let mut dims = [1; 3];
    for d in 0..3 {
        if !law.varies_along(d) {
            continue;
        }
        if (lengths[d] - 1.0).abs() > 1e-12
            || !md[d].is_multiple_of(k)
            || md[d] / k < MIN_CELL_SAMPLES
        {
            return Err(Error::InvalidArgument(format!(
                "axis {}: {} samples do not resolve {} periods on a unit side",
                d + 1,
                md[d],
                k
            )));
        }
        dims[d] = md[d] / k;
    }
    CellGrid::with_dims(dims)
}

/// Options controlling which correctors dress the recovery pair.
#[derive(Debug, Clone, Copy)]
pub struct RecoveryOptions {
    pub elastic_corrector: bool,
    pub exchange_corrector: bool,
    pub delta_floor: f64,
    /// Step for differentiating the elastic corrector in the slow variable.
    pub slow_step: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            elastic_corrector: true,
            exchange_corrector: true,
            delta_floor: crate::fields::DEFAULT_DELTA_FLOOR,
            slow_step: 1e-4,
        }
    }
}

/// `u_ε = u + εψ(x, x/ε)` and `m_ε∘w_ε = π[m + εφ(x, x/ε)]` sampled at material points.
#[derive(Debug, Clone)]
pub struct RecoveryPair {
    pub eps: f64,
    pub alpha: f64,
    pub cell: CellGrid,
    pub u_eps: Field,
    pub grad_u_eps: Field,
    /// `ψ(x, x/ε)` at material points.
    pub psi: Field,
    /// `φ(x, x/ε)` at material points.
    pub phi: Field,
    /// `m + εφ` before projection.
    pub m_hat: Field,
    pub m_comp: Magnetization,
    pub grad_m_comp: Field,
    /// Smallest `|m̂|` seen.
    pub min_norm: f64,
}

struct PointData {
    u: Vec3,
    grad_u: Mat3,
    psi: Vec3,
    phi: Vec3,
    m_hat: Vec3,
    m: Vec3,
    grad_m: Mat3,
}

pub fn build_recovery_pair(
    fields: &dyn MacroFields,
    material: BoxGrid,
    bank: &CorrectorBank,
    eps: f64,
    alpha: f64,
    options: RecoveryOptions,
) -> Result<RecoveryPair> {
    let law = bank.law();
    let cell = commensurate_cell(law, material, eps)?;
    let exchange = if options.exchange_corrector {
        Some(bank.exchange(cell)?)
    } else {
        None
    };
    let md = material.dims();
    let cd = cell.dims();
    let g = Grid::Box(material);
    let nc = cell.n_points();
    let h = options.slow_step;

    let points: Vec<PointData> = (0..material.n_points())
        .into_par_iter()
        .map(|p| -> Result<PointData> {
            let x = g.point_at(p);
            let idx = unravel(p, md);
            let q = ravel(std::array::from_fn(|d| idx[d] % cd[d]), cd);
            let grad_u = fields.grad_u(x);
            let m = fields.m(x);
            let grad_m = fields.grad_m(x);

            let (psi, grad_y_psi, grad_x_psi) = if options.elastic_corrector {
                let c = bank.elastic(cell, &grad_u, &m)?;
                let mut slow = Mat3::zeros();
                for d in 0..3 {
                    let shift = |s: f64| {
                        let mut y = x;
                        y[d] += s;
                        y
                    };
                    let (xp, xm) = (shift(h), shift(-h));
                    let same = fields.grad_u(xp) == grad_u
                        && fields.grad_u(xm) == grad_u
                        && (!law.depends_on_nu() || (fields.m(xp) == m && fields.m(xm) == m));
                    if same {
                        continue;
                    }
                    let cp = bank.elastic(cell, &fields.grad_u(xp), &fields.m(xp))?;
                    let cm = bank.elastic(cell, &fields.grad_u(xm), &fields.m(xm))?;
                    let dpsi = (cp.value(q, nc) - cm.value(q, nc)) / (2.0 * h);
                    slow.set_column(d, &dpsi);
                }
                (c.value(q, nc), c.gradient(q), slow)
            } else {
                (Vec3::zeros(), Mat3::zeros(), Mat3::zeros())
            };

            let (phi, grad_y_phi, grad_x_phi) = match &exchange {
                Some(ex) => {
                    let hess = fields.hess_m(x);
                    let mut slow = Mat3::zeros();
                    for d in 0..3 {
                        slow.set_column(d, &ex.phi_at(&hess[d], q));
                    }
                    (ex.phi_at(&grad_m, q), ex.grad_phi_at(&grad_m, q), slow)
                }
                None => (Vec3::zeros(), Mat3::zeros(), Mat3::zeros()),
            };

            let m_hat = m + phi * eps;
            let norm = m_hat.norm();
            if !(norm >= options.delta_floor) {
                return Err(Error::TubularNeighborhood { eps, norm });
            }
            let d_hat = grad_m + grad_y_phi + grad_x_phi * eps;
            Ok(PointData {
                u: fields.u(x) + psi * eps,
                grad_u: grad_u + grad_y_psi + grad_x_psi * eps,
                psi,
                phi,
                m_hat,
                m: m_hat / norm,
                grad_m: projection_jacobian(&m_hat) * d_hat,
            })
        })
        .collect::<Result<_>>()?;

    let vec_field = |f: &dyn Fn(&PointData) -> Vec3| {
        Field::from_components(
            g,
            Rank::Vector3,
            (0..3)
                .map(|c| points.iter().map(|pd| f(pd)[c]).collect())
                .collect(),
        )
    };
    let mat_field = |f: &dyn Fn(&PointData) -> Mat3| {
        Field::from_components(
            g,
            Rank::Matrix3,
            (0..9)
                .map(|c| points.iter().map(|pd| f(pd)[(c / 3, c % 3)]).collect())
                .collect(),
        )
    };
    let min_norm = points
        .iter()
        .map(|pd| pd.m_hat.norm())
        .fold(f64::INFINITY, f64::min);
    Ok(RecoveryPair {
        eps,
        alpha,
        cell,
        u_eps: vec_field(&|pd| pd.u)?,
        grad_u_eps: mat_field(&|pd| pd.grad_u)?,
        psi: vec_field(&|pd| pd.psi)?,
        phi: vec_field(&|pd| pd.phi)?,
        m_hat: vec_field(&|pd| pd.m_hat)?,
        m_comp: Magnetization::new(vec_field(&|pd| pd.m)?)?,
        grad_m_comp: mat_field(&|pd| pd.grad_m)?,
        min_norm,
    })
}
