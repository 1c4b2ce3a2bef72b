use crate::error::{Error, Result};
use crate::fields::{gradient, BoxGrid, DomainMask, Field, GradientScheme, Grid, Rank};
use crate::linalg::{adjugate, Mat3, Vec3};
use serde::Serialize;
use std::sync::Arc;

/// How the displacement enters the deformation `w = id + scale·u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// `scale = ε^α`.
    Alpha(f64),
    /// An independent `δ`.
    Delta(f64),
}

#[derive(Debug, Clone)]
pub struct DeformationState {
    pub u: Field,
    pub eps: f64,
    pub scaling: Scaling,
    pub scale: f64,
    pub grad_u: Field,
    pub grad_w: Field,
    pub det_w: Field,
    pub adj_w: Field,
    /// `adj(∇w) |det ∇w|^{-1/2}` where `det ∇w > 0`, zero elsewhere.
    pub g_eps: Field,
}

fn box_grid(field: &Field, what: &str) -> Result<BoxGrid> {
    match field.grid() {
        Grid::Box(g) => Ok(*g),
        Grid::Cell(_) => Err(Error::InvalidArgument(format!(
            "{what} must live on a box grid"
        ))),
    }
}

/// `w = id + scale·u` with `∇u` from central differences.
pub fn build_deformation(u: &Field, eps: f64, scaling: Scaling) -> Result<DeformationState> {
    let grad_u = gradient(u, GradientScheme::CentralDifference)?;
    DeformationState::from_gradient(u.clone(), grad_u, eps, scaling)
}

impl DeformationState {
    /// Builds the state from a displacement and a known gradient.
    pub fn from_gradient(u: Field, grad_u: Field, eps: f64, scaling: Scaling) -> Result<Self> {
        let grid = box_grid(&u, "displacement")?;
        if u.rank() != Rank::Vector3 || grad_u.rank() != Rank::Matrix3 || grad_u.grid() != u.grid()
        {
            return Err(Error::InvalidArgument(
                "displacement must be a vector field with a matching matrix gradient".into(),
            ));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eps must lie in (0, 1], got {eps}"
            )));
        }
        let scale = match scaling {
            Scaling::Alpha(alpha) if alpha > 0.0 && alpha.is_finite() => eps.powf(alpha),
            Scaling::Delta(delta) if delta > 0.0 && delta.is_finite() => delta,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "scaling exponent or delta must be positive: {scaling:?}"
                )));
            }
        };
        let g = Grid::Box(grid);
        let n = grid.n_points();
        let mut grad_w = Vec::with_capacity(9 * n);
        let mut det_w = Vec::with_capacity(n);
        let mut adj_w = Vec::with_capacity(9 * n);
        let mut g_eps = Vec::with_capacity(9 * n);
        let mut gw = Vec::with_capacity(n);
        for p in 0..n {
            let f = Mat3::identity() + grad_u.matrix_at(p) * scale;
            let det = f.determinant();
            let adj = adjugate(&f);
            det_w.push(det);
            gw.push((
                f,
                adj,
                if det > 0.0 {
                    adj / det.sqrt()
                } else {
                    Mat3::zeros()
                },
            ));
        }
        for c in 0..9 {
            let (i, j) = (c / 3, c % 3);
            grad_w.extend(gw.iter().map(|t| t.0[(i, j)]));
            adj_w.extend(gw.iter().map(|t| t.1[(i, j)]));
            g_eps.extend(gw.iter().map(|t| t.2[(i, j)]));
        }
        Ok(Self {
            u,
            eps,
            scaling,
            scale,
            grad_u,
            grad_w: Field::new(g, Rank::Matrix3, grad_w)?,
            det_w: Field::new(g, Rank::Scalar, det_w)?,
            adj_w: Field::new(g, Rank::Matrix3, adj_w)?,
            g_eps: Field::new(g, Rank::Matrix3, g_eps)?,
        })
    }

    pub fn grid(&self) -> BoxGrid {
        match self.u.grid() {
            Grid::Box(g) => *g,
            Grid::Cell(_) => unreachable!("checked at construction"),
        }
    }
}

/// Prescribed displacement on selected faces of the box.
#[derive(Clone)]
pub struct BoundaryDatum {
    /// `(axis, upper)` pairs naming the faces of γ.
    pub faces: Vec<(usize, bool)>,
    pub g: Arc<dyn Fn([f64; 3]) -> Vec3 + Send + Sync>,
}

impl std::fmt::Debug for BoundaryDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryDatum")
            .field("faces", &self.faces)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    pub det_positive: bool,
    /// First sample point with `det ∇w <= 0`.
    pub det_witness: Option<[f64; 3]>,
    pub min_det: f64,
    /// Largest operator norm of `scale·∇u`.
    pub operator_norm_max: f64,
    pub injectivity_ok: bool,
    /// `(∫_Ω det(∇w)^{-s})^{1/s}`.
    pub inv_det_ls_norm: f64,
    pub boundary_ok: bool,
    pub boundary_error: f64,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.det_positive && self.injectivity_ok && self.boundary_ok
    }
}

pub const DEFAULT_C_DOMAIN: f64 = 0.9;

pub fn check_admissibility(
    state: &DeformationState,
    s: f64,
    mask: &DomainMask,
    boundary: Option<&BoundaryDatum>,
    c_domain: f64,
) -> Result<AdmissibilityReport> {
    let grid = state.grid();
    if mask.grid() != &grid {
        return Err(Error::InvalidArgument(
            "mask grid differs from deformation grid".into(),
        ));
    }
    let g = Grid::Box(grid);
    let mut det_witness = None;
    let mut min_det = f64::INFINITY;
    let mut op_max: f64 = 0.0;
    let mut inv_det_s = 0.0;
    for p in 0..grid.n_points() {
        if !mask.is_inside(p) {
            continue;
        }
        let det = state.det_w.scalar_at(p);
        min_det = min_det.min(det);
        if det <= 0.0 {
            det_witness.get_or_insert(g.point_at(p));
            inv_det_s = f64::INFINITY;
        } else {
            inv_det_s += det.powf(-s) * grid.cell_volume();
        }
        let gu = state.grad_u.matrix_at(p) * state.scale;
        op_max = op_max.max(gu.svd(false, false).singular_values.max());
    }
    let mut boundary_error: f64 = 0.0;
    if let Some(b) = boundary {
        let dims = grid.dims();
        for p in 0..grid.n_points() {
            let idx = crate::fields::unravel(p, dims);
            let on_gamma = b.faces.iter().any(|&(axis, upper)| {
                if upper {
                    idx[axis] + 1 == dims[axis]
                } else {
                    idx[axis] == 0
                }
            });
            if on_gamma {
                let x = g.point_at(p);
                boundary_error = boundary_error.max((state.u.vector_at(p) - (b.g)(x)).amax());
            }
        }
    }
    let det_positive = det_witness.is_none();
    Ok(AdmissibilityReport {
        det_positive,
        det_witness,
        min_det,
        operator_norm_max: op_max,
        injectivity_ok: op_max < c_domain && det_positive,
        inv_det_ls_norm: inv_det_s.powf(1.0 / s),
        boundary_ok: boundary_error <= 1e-10,
        boundary_error,
    })
}
