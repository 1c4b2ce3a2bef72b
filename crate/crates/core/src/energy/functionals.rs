use super::deformation::DeformationState;
use super::stray::StrayModel;
use crate::cell::{HomogenizedElastic, HomogenizedExchange};
use crate::error::{Error, Result};
use crate::fields::{BoxGrid, DomainMask, Field, Grid, Magnetization, Rank};
use crate::linalg::sum_compensated;
use crate::material::MaterialLaw;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Functional {
    G,
    Feps,
    FepsDelta,
    Glin,
    Fhom,
}

impl Functional {
    pub fn name(self) -> &'static str {
        match self {
            Functional::G => "G",
            Functional::Feps => "Feps",
            Functional::FepsDelta => "Fdelta",
            Functional::Glin => "Glin",
            Functional::Fhom => "Fhom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::G, Self::Feps, Self::FepsDelta, Self::Glin, Self::Fhom]
            .into_iter()
            .find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    pub exchange: f64,
    pub magnetostatic: f64,
    pub total: f64,
    pub functional: Functional,
    /// `false` when some quadrature point has `det ∇w <= 0`.
    pub admissible: bool,
}

impl EnergyBreakdown {
    pub fn new(functional: Functional, elastic: f64, exchange: f64, magnetostatic: f64) -> Self {
        let total = elastic + exchange + magnetostatic;
        Self {
            elastic,
            exchange,
            magnetostatic,
            total,
            functional,
            admissible: total.is_finite(),
        }
    }
}

/// The body `Ω` on a material grid, with an optional stray-field model.
#[derive(Debug, Clone)]
pub struct Domain {
    pub mask: DomainMask,
    pub stray: Option<StrayModel>,
}

impl Domain {
    pub fn new(mask: DomainMask, stray: Option<StrayModel>) -> Self {
        Self { mask, stray }
    }

    pub fn grid(&self) -> BoxGrid {
        *self.mask.grid()
    }

    fn check(&self, field: &Field, rank: Rank, what: &str) -> Result<()> {
        if field.grid() != &Grid::Box(self.grid()) || field.rank() != rank {
            return Err(Error::InvalidArgument(format!(
                "{what} must be a {rank:?} field on the material grid"
            )));
        }
        Ok(())
    }

    /// Midpoint rule over the mask of per-point values computed in parallel.
    fn integrate(&self, f: impl Fn(usize, [f64; 3]) -> f64 + Sync) -> f64 {
        let grid = Grid::Box(self.grid());
        let values: Vec<f64> = (0..grid.n_points())
            .into_par_iter()
            .map(|p| {
                if self.mask.is_inside(p) {
                    f(p, grid.point_at(p))
                } else {
                    0.0
                }
            })
            .collect();
        sum_compensated(values) * grid.cell_volume()
    }

    pub fn magnetostatic(&self, m: &Field, mu0: f64) -> Result<f64> {
        match &self.stray {
            Some(model) => model.energy(m, &self.mask, mu0),
            None => Ok(0.0),
        }
    }
}

fn fast(x: [f64; 3], eps: f64) -> [f64; 3] {
    x.map(|v| v / eps)
}

/// `∫_Ω W(x/ε, ∇w, m∘w)`; `+∞` if `det ∇w <= 0` anywhere on the mask.
pub fn elastic_term_g(
    state: &DeformationState,
    law: &dyn MaterialLaw,
    m_comp: &Magnetization,
    domain: &Domain,
) -> Result<f64> {
    domain.check(&state.u, Rank::Vector3, "displacement")?;
    domain.check(m_comp.field(), Rank::Vector3, "magnetization")?;
    let eps = state.eps;
    Ok(domain.integrate(|p, x| {
        law.w(
            fast(x, eps),
            &state.grad_w.matrix_at(p),
            &m_comp.field().vector_at(p),
        )
    }))
}

/// `∫_Ω a(x/ε) |∇(m∘w) g_ε|²`, the pulled-back exchange energy.
fn exchange_pullback(
    state: &DeformationState,
    law: &dyn MaterialLaw,
    grad_m_comp: &Field,
    domain: &Domain,
) -> Result<f64> {
    domain.check(grad_m_comp, Rank::Matrix3, "magnetization gradient")?;
    let eps = state.eps;
    Ok(domain.integrate(|p, x| {
        if state.det_w.scalar_at(p) <= 0.0 {
            return f64::INFINITY;
        }
        let v = grad_m_comp.matrix_at(p) * state.g_eps.matrix_at(p);
        law.a(fast(x, eps)) * v.norm_squared()
    }))
}

fn deformed(
    functional: Functional,
    state: &DeformationState,
    law: &dyn MaterialLaw,
    m_comp: &Magnetization,
    grad_m_comp: &Field,
    domain: &Domain,
    elastic_scale: f64,
) -> Result<EnergyBreakdown> {
    let elastic = elastic_term_g(state, law, m_comp, domain)? * elastic_scale;
    if !elastic.is_finite() {
        return Ok(EnergyBreakdown::new(
            functional,
            f64::INFINITY,
            f64::INFINITY,
            f64::INFINITY,
        ));
    }
    let exchange = exchange_pullback(state, law, grad_m_comp, domain)?;
    let magnetostatic = domain.magnetostatic(m_comp.field(), law.params().mu0)?;
    Ok(EnergyBreakdown::new(
        functional,
        elastic,
        exchange,
        magnetostatic,
    ))
}

/// Unscaled stored energy of the deformation `w` and the composed magnetization.
pub fn g_eps(
    state: &DeformationState,
    law: &dyn MaterialLaw,
    m_comp: &Magnetization,
    grad_m_comp: &Field,
    domain: &Domain,
) -> Result<EnergyBreakdown> {
    deformed(Functional::G, state, law, m_comp, grad_m_comp, domain, 1.0)
}

/// Rescaled energy with elastic prefactor `ε^{-2α}`.
pub fn f_eps(
    state: &DeformationState,
    law: &dyn MaterialLaw,
    m_comp: &Magnetization,
    grad_m_comp: &Field,
    domain: &Domain,
) -> Result<EnergyBreakdown> {
    let s = state.scale;
    deformed(
        Functional::Feps,
        state,
        law,
        m_comp,
        grad_m_comp,
        domain,
        1.0 / (s * s),
    )
}

/// Rescaled energy with elastic prefactor `δ^{-2}` for an independent `δ`.
pub fn f_eps_delta(
    state: &DeformationState,
    law: &dyn MaterialLaw,
    m_comp: &Magnetization,
    grad_m_comp: &Field,
    domain: &Domain,
) -> Result<EnergyBreakdown> {
    let s = state.scale;
    deformed(
        Functional::FepsDelta,
        state,
        law,
        m_comp,
        grad_m_comp,
        domain,
        1.0 / (s * s),
    )
}

/// Linearized energy `½∫Q(x/ε, ∇u, m) + ∫a(x/ε)|∇m|² + stray`.
pub fn g_lin(
    grad_u: &Field,
    m: &Magnetization,
    grad_m: &Field,
    law: &dyn MaterialLaw,
    eps: f64,
    domain: &Domain,
) -> Result<EnergyBreakdown> {
    domain.check(grad_u, Rank::Matrix3, "displacement gradient")?;
    domain.check(m.field(), Rank::Vector3, "magnetization")?;
    domain.check(grad_m, Rank::Matrix3, "magnetization gradient")?;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1], got {eps}"
        )));
    }
    let elastic = 0.5
        * domain
            .integrate(|p, x| law.q(fast(x, eps), &grad_u.matrix_at(p), &m.field().vector_at(p)));
    let exchange =
        domain.integrate(|p, x| law.a(fast(x, eps)) * grad_m.matrix_at(p).norm_squared());
    let magnetostatic = domain.magnetostatic(m.field(), law.params().mu0)?;
    Ok(EnergyBreakdown::new(
        Functional::Glin,
        elastic,
        exchange,
        magnetostatic,
    ))
}

/// Homogenized energy `½∫Q_hom(∇u, m) + ∫T_hom(∇m) + stray`.
pub fn f_hom(
    grad_u: &Field,
    m: &Magnetization,
    grad_m: &Field,
    exchange: &HomogenizedExchange,
    elastic: &HomogenizedElastic,
    mu0: f64,
    domain: &Domain,
) -> Result<EnergyBreakdown> {
    domain.check(grad_u, Rank::Matrix3, "displacement gradient")?;
    domain.check(m.field(), Rank::Vector3, "magnetization")?;
    domain.check(grad_m, Rank::Matrix3, "magnetization gradient")?;
    // tensors first, sequentially, so the memo fills in a fixed order
    let grid = Grid::Box(domain.grid());
    let mut q = Vec::with_capacity(grid.n_points());
    for p in 0..grid.n_points() {
        q.push(if domain.mask.is_inside(p) {
            elastic.value(&grad_u.matrix_at(p), &m.field().vector_at(p))?
        } else {
            0.0
        });
    }
    let el = 0.5 * domain.integrate(|p, _| q[p]);
    let ex = domain.integrate(|p, _| exchange.value(&grad_m.matrix_at(p)));
    let magnetostatic = domain.magnetostatic(m.field(), mu0)?;
    Ok(EnergyBreakdown::new(
        Functional::Fhom,
        el,
        ex,
        magnetostatic,
    ))
}
