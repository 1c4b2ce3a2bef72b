use crate::error::{Error, Result};
use crate::fields::{BoxGrid, Field, Grid, Magnetization};
use crate::linalg::{Mat3, Vec3};
use crate::material::{reference_density_d1, reference_density_d2, DensitySpec, PhaseLayout};
use serde::Serialize;
use std::sync::Arc;

/// Smooth macroscopic displacement and magnetization with derivatives.
pub trait MacroFields: Send + Sync {
    fn u(&self, x: [f64; 3]) -> Vec3;
    fn grad_u(&self, x: [f64; 3]) -> Mat3;
    fn m(&self, z: [f64; 3]) -> Vec3;
    /// `∂_j m_i` at `(i, j)`.
    fn grad_m(&self, z: [f64; 3]) -> Mat3;
    /// `∂_d ∇m` for `d = 0, 1, 2`.
    fn hess_m(&self, z: [f64; 3]) -> [Mat3; 3];
}

/// `u(x) = G x` and `m(x) = (cos θ, sin θ, 0)` with `θ = θ₀ + β x₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineGreatCircle {
    pub gradient: [[f64; 3]; 3],
    pub theta0: f64,
    pub beta: f64,
}

impl AffineGreatCircle {
    fn g(&self) -> Mat3 {
        Mat3::from_fn(|i, j| self.gradient[i][j])
    }

    fn theta(&self, z: [f64; 3]) -> f64 {
        self.theta0 + self.beta * z[0]
    }
}

impl MacroFields for AffineGreatCircle {
    fn u(&self, x: [f64; 3]) -> Vec3 {
        self.g() * Vec3::from(x)
    }

    fn grad_u(&self, _x: [f64; 3]) -> Mat3 {
        self.g()
    }

    fn m(&self, z: [f64; 3]) -> Vec3 {
        let t = self.theta(z);
        Vec3::new(t.cos(), t.sin(), 0.0)
    }

    fn grad_m(&self, z: [f64; 3]) -> Mat3 {
        let t = self.theta(z);
        let mut g = Mat3::zeros();
        g[(0, 0)] = -self.beta * t.sin();
        g[(1, 0)] = self.beta * t.cos();
        g
    }

    fn hess_m(&self, z: [f64; 3]) -> [Mat3; 3] {
        let t = self.theta(z);
        let b2 = self.beta * self.beta;
        let mut h = Mat3::zeros();
        h[(0, 0)] = -b2 * t.cos();
        h[(1, 0)] = -b2 * t.sin();
        [h, Mat3::zeros(), Mat3::zeros()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScenarioId {
    S1,
    S2,
    S3,
    S4,
}

impl ScenarioId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "S1" => Ok(Self::S1),
            "S2" => Ok(Self::S2),
            "S3" => Ok(Self::S3),
            "S4" => Ok(Self::S4),
            _ => Err(Error::Config(format!(
                "unknown scenario '{s}' (expected S1..S4)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::S1 => "S1",
            Self::S2 => "S2",
            Self::S3 => "S3",
            Self::S4 => "S4",
        }
    }
}

/// Macroscopic gradient shared by the affine scenarios.
pub const SCENARIO_GRADIENT: [[f64; 3]; 3] =
    [[0.2, 0.05, 0.0], [0.1, -0.1, 0.03], [0.0, 0.02, 0.15]];

#[derive(Clone)]
pub struct Scenario {
    pub id: ScenarioId,
    pub spec: Arc<DensitySpec>,
    pub fields: AffineGreatCircle,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("id", &self.id)
            .field("fields", &self.fields)
            .finish()
    }
}

fn lam(values: [f64; 2]) -> PhaseLayout {
    PhaseLayout::laminate(0, 0.5, values).expect("valid laminate")
}

impl Scenario {
    /// The shipped scenario with default material data.
    pub fn builtin(id: ScenarioId) -> Self {
        let affine = |theta0: f64, beta: f64| AffineGreatCircle {
            gradient: SCENARIO_GRADIENT,
            theta0,
            beta,
        };
        let (spec, fields) = match id {
            ScenarioId::S1 => (
                reference_density_d1(PhaseLayout::Constant(1.0), 4.0, 3.0),
                affine(0.3, 0.0),
            ),
            ScenarioId::S2 => (
                reference_density_d1(lam([1.0, 10.0]), 4.0, 3.0)
                    .map(|s| s.with_exchange(lam([1.0, 4.0]))),
                affine(0.3, 0.0),
            ),
            ScenarioId::S3 => (
                reference_density_d1(lam([1.0, 10.0]), 4.0, 3.0)
                    .map(|s| s.with_exchange(lam([1.0, 4.0]))),
                AffineGreatCircle {
                    gradient: [[0.0; 3]; 3],
                    theta0: 0.3,
                    beta: 1.0,
                },
            ),
            ScenarioId::S4 => (
                reference_density_d2(lam([1.0, 10.0]), lam([0.5, 2.0]), 4.0, 3.0)
                    .map(|s| s.with_exchange(lam([1.0, 4.0]))),
                affine(0.3, 1.0),
            ),
        };
        Self {
            id,
            spec: Arc::new(spec.expect("built-in densities are valid")),
            fields,
        }
    }

    pub fn with_spec(mut self, spec: DensitySpec) -> Self {
        self.spec = Arc::new(spec);
        self
    }

    /// Multiplies the macroscopic displacement.
    pub fn with_displacement_scale(mut self, factor: f64) -> Self {
        for row in self.fields.gradient.iter_mut() {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        self
    }
}

/// Macroscopic fields sampled on a grid.
#[derive(Debug, Clone)]
pub struct SampledMacro {
    pub u: Field,
    pub grad_u: Field,
    pub m: Magnetization,
    pub grad_m: Field,
}

pub fn sample_macro(fields: &dyn MacroFields, grid: BoxGrid) -> Result<SampledMacro> {
    let g = Grid::Box(grid);
    Ok(SampledMacro {
        u: Field::from_vector_fn(g, |x| fields.u(x))?,
        grad_u: Field::from_matrix_fn(g, |x| fields.grad_u(x))?,
        m: Magnetization::new(Field::from_vector_fn(g, |x| fields.m(x))?)?,
        grad_m: Field::from_matrix_fn(g, |x| fields.grad_m(x))?,
    })
}

/// `m ∘ w` and `∇(m ∘ w) = (∇m)∘w · ∇w` for `w = id + scale·u`.
pub fn compose_macro(
    fields: &dyn MacroFields,
    grid: BoxGrid,
    scale: f64,
) -> Result<(Magnetization, Field)> {
    let g = Grid::Box(grid);
    let w = |x: [f64; 3]| {
        let u = fields.u(x);
        [x[0] + scale * u.x, x[1] + scale * u.y, x[2] + scale * u.z]
    };
    let m = Field::from_vector_fn(g, |x| fields.m(w(x)))?;
    let grad = Field::from_matrix_fn(g, |x| {
        fields.grad_m(w(x)) * (Mat3::identity() + fields.grad_u(x) * scale)
    })?;
    Ok((Magnetization::new(m)?, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn great_circle_derivatives_match_differences() {
        let f = Scenario::builtin(ScenarioId::S4).fields;
        let x = [0.37, 0.2, 0.9];
        let h = 1e-6;
        let xp = [x[0] + h, x[1], x[2]];
        let xm = [x[0] - h, x[1], x[2]];
        let dm = (f.m(xp) - f.m(xm)) / (2.0 * h);
        assert!((dm - f.grad_m(x).column(0)).norm() < 1e-8);
        let dg = (f.grad_m(xp) - f.grad_m(xm)) / (2.0 * h);
        assert!((dg - f.hess_m(x)[0]).norm() < 1e-8);
        assert!((f.m(x).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_scale_composition_is_identity() {
        let grid = BoxGrid::unit([8, 1, 1]).unwrap();
        let f = Scenario::builtin(ScenarioId::S4).fields;
        let s = sample_macro(&f, grid).unwrap();
        let (m, gm) = compose_macro(&f, grid, 0.0).unwrap();
        assert_eq!(m.field().samples(), s.m.field().samples());
        assert_eq!(gm.samples(), s.grad_m.samples());
    }
}
