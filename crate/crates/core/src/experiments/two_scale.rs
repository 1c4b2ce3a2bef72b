use super::scenario::MacroFields;
use super::sweep::{eps_from_denominators, Experiment};
use crate::energy::{DeformationState, Scaling};
use crate::error::{Error, Result};
use crate::fields::{ravel, BoxGrid, CellGrid, Field, Grid, Rank};
use serde::Serialize;
use std::f64::consts::PI;

/// One product term `f(x) g(y) e_c` of a separable test function.
pub struct TestTerm {
    pub component: usize,
    pub f: Box<dyn Fn([f64; 3]) -> f64 + Send + Sync>,
    pub g: Box<dyn Fn([f64; 3]) -> f64 + Send + Sync>,
}

pub struct SeparableTest {
    pub id: String,
    pub terms: Vec<TestTerm>,
}

impl SeparableTest {
    fn eval(&self, x: [f64; 3], y: [f64; 3], values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| values[t.component] * (t.f)(x) * (t.g)(y))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoScaleCheck {
    pub test_id: String,
    pub eps: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: f64,
    pub gaps: Vec<f64>,
}

/// `∫_Ω v_ε(x)·ψ(x, x/ε) dx` per `ε` against `∬ v(x,y)·ψ(x,y) dx dy`.
///
/// The limit is integrated with the midpoint rule on the material grid in
/// `x` and on `y_grid` in `y`. The check is a necessary condition only:
/// finitely many test functions cannot establish two-scale convergence.
pub fn two_scale_pairing(
    family: &[(f64, Field)],
    test: &SeparableTest,
    limit: &(dyn Fn([f64; 3], [f64; 3]) -> Vec<f64> + Sync),
    y_grid: CellGrid,
) -> Result<TwoScaleCheck> {
    let Some((_, first)) = family.first() else {
        return Err(Error::InvalidArgument("empty field family".into()));
    };
    let grid: BoxGrid = match first.grid() {
        Grid::Box(g) => *g,
        Grid::Cell(_) => {
            return Err(Error::InvalidArgument(
                "two-scale family must live on a box grid".into(),
            ))
        }
    };
    let ncomp = first.rank().components();
    if test.terms.iter().any(|t| t.component >= ncomp) {
        return Err(Error::InvalidArgument("test component out of range".into()));
    }
    let g = Grid::Box(grid);
    let dv = grid.cell_volume();
    let mut eps = Vec::new();
    let mut lhs = Vec::new();
    for (e, v) in family {
        if v.grid() != first.grid() || v.rank() != first.rank() {
            return Err(Error::InvalidArgument(
                "family members must share grid and rank".into(),
            ));
        }
        let mut acc = 0.0;
        for p in 0..grid.n_points() {
            let x = g.point_at(p);
            acc += test.eval(x, x.map(|c| c / e), &v.values_at(p));
        }
        eps.push(*e);
        lhs.push(acc * dv);
    }
    let yg = Grid::Cell(y_grid);
    let mut rhs = 0.0;
    for p in 0..grid.n_points() {
        let x = g.point_at(p);
        for q in 0..y_grid.n_points() {
            let y = yg.point_at(q);
            rhs += test.eval(x, y, &limit(x, y));
        }
    }
    rhs *= dv / y_grid.n_points() as f64;
    let gaps = lhs.iter().map(|l| (l - rhs).abs()).collect();
    Ok(TwoScaleCheck {
        test_id: test.id.clone(),
        eps,
        lhs,
        rhs,
        gaps,
    })
}

fn cos_y1(y: [f64; 3]) -> f64 {
    (2.0 * PI * y[0]).cos()
}

fn scalar_family(
    grid: BoxGrid,
    denominators: &[usize],
    v: impl Fn([f64; 3], f64) -> f64,
) -> Result<Vec<(f64, Field)>> {
    eps_from_denominators(denominators)?
        .into_iter()
        .map(|e| Ok((e, Field::from_scalar_fn(Grid::Box(grid), |x| v(x, e))?)))
        .collect()
}

/// `v_ε = cos(2π x₁/ε)` against the slow test `e^{x₁}`; the limit pairing is 0.
pub fn riemann_lebesgue_check(grid: BoxGrid, denominators: &[usize]) -> Result<TwoScaleCheck> {
    let family = scalar_family(grid, denominators, |x, e| cos_y1(x.map(|c| c / e)))?;
    let test = SeparableTest {
        id: "riemann-lebesgue".into(),
        terms: vec![TestTerm {
            component: 0,
            f: Box::new(|x| x[0].exp()),
            g: Box::new(|_| 1.0),
        }],
    };
    two_scale_pairing(
        &family,
        &test,
        &|_, y| vec![cos_y1(y)],
        CellGrid::with_dims([64, 1, 1])?,
    )
}

/// `v_ε = f(x) cos(2π x₁/ε)` against `f(x) cos(2π y₁)` with `f = 1 + x₁`;
/// the limit is `∫f² · ½ = 7/6`.
pub fn product_check(grid: BoxGrid, denominators: &[usize]) -> Result<TwoScaleCheck> {
    let f = |x: [f64; 3]| 1.0 + x[0];
    let family = scalar_family(grid, denominators, |x, e| f(x) * cos_y1(x.map(|c| c / e)))?;
    let test = SeparableTest {
        id: "product".into(),
        terms: vec![TestTerm {
            component: 0,
            f: Box::new(f),
            g: Box::new(cos_y1),
        }],
    };
    two_scale_pairing(
        &family,
        &test,
        &|x, y| vec![f(x) * cos_y1(y)],
        CellGrid::with_dims([64, 1, 1])?,
    )
}

/// `v_ε = ∇(m_ε∘w_ε) g_ε` on recovery pairs against `∇m(x) + ∇_yφ(x, y)`.
pub fn recovery_chain_check(
    exp: &Experiment,
    denominators: &[usize],
    alpha: f64,
) -> Result<TwoScaleCheck> {
    let family: Vec<(f64, Field)> = eps_from_denominators(denominators)?
        .into_iter()
        .map(|e| {
            let pair = exp.recovery(e, alpha)?;
            let state = DeformationState::from_gradient(
                pair.u_eps,
                pair.grad_u_eps,
                e,
                Scaling::Alpha(alpha),
            )?;
            let values: Vec<_> = (0..exp.grid.n_points())
                .map(|p| pair.grad_m_comp.matrix_at(p) * state.g_eps.matrix_at(p))
                .collect();
            let components = (0..9)
                .map(|c| values.iter().map(|v| v[(c / 3, c % 3)]).collect())
                .collect();
            Ok((
                e,
                Field::from_components(Grid::Box(exp.grid), Rank::Matrix3, components)?,
            ))
        })
        .collect::<Result<_>>()?;
    let law = exp.law();
    let cell_dims: [usize; 3] = std::array::from_fn(|d| {
        if law.varies_along(d) {
            exp.setup.cell_n
        } else {
            1
        }
    });
    let cell = CellGrid::with_dims(cell_dims)?;
    let correctors = exp.bank.exchange(cell)?;
    let fields = exp.scenario.fields;
    let limit = move |x: [f64; 3], y: [f64; 3]| {
        let q = ravel(
            std::array::from_fn(|d| ((y[d] * cell_dims[d] as f64) as usize).min(cell_dims[d] - 1)),
            cell_dims,
        );
        let a = fields.grad_m(x);
        let v = a + correctors.grad_phi_at(&a, q);
        (0..9).map(|c| v[(c / 3, c % 3)]).collect()
    };
    let slow = |x: [f64; 3]| 1.0 + x[0];
    let term = |component: usize, oscillating: bool| TestTerm {
        component,
        f: Box::new(slow),
        g: if oscillating {
            Box::new(cos_y1)
        } else {
            Box::new(|_| 1.0)
        },
    };
    let test = SeparableTest {
        id: "recovery-chain".into(),
        terms: vec![term(0, false), term(0, true), term(3, true)],
    };
    two_scale_pairing(&family, &test, &limit, cell)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_pairing_matches_closed_form() {
        let grid = BoxGrid::unit([256, 1, 1]).unwrap();
        let f = |x: [f64; 3]| 1.0 + x[0];
        let g = |y: [f64; 3]| (2.0 * PI * y[0]).cos();
        let family: Vec<(f64, Field)> = [4, 16, 64]
            .iter()
            .map(|&k| {
                let e = 1.0 / k as f64;
                (
                    e,
                    Field::from_scalar_fn(Grid::Box(grid), |x| f(x) * g(x.map(|c| c / e))).unwrap(),
                )
            })
            .collect();
        let test = SeparableTest {
            id: "f*g".into(),
            terms: vec![TestTerm {
                component: 0,
                f: Box::new(f),
                g: Box::new(g),
            }],
        };
        let limit = move |x: [f64; 3], y: [f64; 3]| vec![f(x) * g(y)];
        let check = two_scale_pairing(
            &family,
            &test,
            &limit,
            CellGrid::with_dims([64, 1, 1]).unwrap(),
        )
        .unwrap();
        // ∫(1+x)² dx · ½ = 7/6
        assert!((check.rhs - 7.0 / 6.0).abs() < 1e-4);
        assert!(check.gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(check.gaps[2] < 1e-4);
    }

    #[test]
    fn riemann_lebesgue_pairing_decays() {
        let check =
            riemann_lebesgue_check(BoxGrid::unit([256, 1, 1]).unwrap(), &[4, 16, 64]).unwrap();
        assert!(check.rhs.abs() < 1e-12);
        assert!(check.lhs[2].abs() < 0.05 * check.lhs[0].abs());
    }
}
