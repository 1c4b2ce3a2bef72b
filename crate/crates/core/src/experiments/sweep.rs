use super::recovery::{build_recovery_pair, CorrectorBank, RecoveryOptions, RecoveryPair};
use super::scenario::{compose_macro, sample_macro, SampledMacro, Scenario};
use crate::cell::{ExchangeCorrectors, HomogenizedElastic, HomogenizedExchange, NuKey};
use crate::energy::{
    check_admissibility, f_eps, f_eps_delta, f_hom, g_lin, AdmissibilityReport, DeformationState,
    Domain, EnergyBreakdown, Functional, Scaling, StrayModel, DEFAULT_C_DOMAIN,
};
use crate::error::{Error, Result};
use crate::fields::{BoxGrid, CellGrid, DomainMask, Field, Grid};
use crate::material::MaterialLaw;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrayParams {
    /// Samples across `Ω` per axis.
    pub cells: usize,
    /// Empty cells on each side of `Ω`.
    pub margin: usize,
    pub pad_factor: f64,
}

impl Default for StrayParams {
    fn default() -> Self {
        Self {
            cells: 16,
            margin: 4,
            pad_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSetup {
    /// Material samples along the lamination axis of the unit cube.
    pub n: usize,
    /// Cell resolution used for the homogenized tensors.
    pub cell_n: usize,
    pub tol: f64,
    pub nu_key: NuKey,
    pub stray: Option<StrayParams>,
    pub c_domain: f64,
    pub recovery: RecoveryOptions,
}

impl Default for ExperimentSetup {
    fn default() -> Self {
        Self {
            n: 64,
            cell_n: 64,
            tol: crate::cell::DEFAULT_TOL,
            nu_key: NuKey::Design162,
            stray: Some(StrayParams::default()),
            c_domain: DEFAULT_C_DOMAIN,
            recovery: RecoveryOptions::default(),
        }
    }
}

/// A scenario prepared on its material grid with homogenized tensors and
/// the reference value `F_hom(u, m)`.
pub struct Experiment {
    pub scenario: Scenario,
    pub setup: ExperimentSetup,
    pub grid: BoxGrid,
    pub domain: Domain,
    pub bank: CorrectorBank,
    pub macro_fields: SampledMacro,
    pub exchange: HomogenizedExchange,
    pub elastic: HomogenizedElastic,
    pub f_hom: EnergyBreakdown,
}

impl Experiment {
    pub fn new(scenario: Scenario, setup: ExperimentSetup) -> Result<Self> {
        let grid = BoxGrid::unit([setup.n, 1, 1])?;
        let stray = match setup.stray {
            Some(s) => Some(StrayModel::new(grid, s.cells, s.margin, s.pad_factor)?),
            None => None,
        };
        let domain = Domain::new(DomainMask::full(grid), stray);
        let law = scenario.spec.clone();
        let cell_dims: [usize; 3] =
            std::array::from_fn(|d| if law.varies_along(d) { setup.cell_n } else { 1 });
        let cell = CellGrid::with_dims(cell_dims)?;
        let a_field = Field::from_scalar_fn(Grid::Cell(cell), |y| law.a(y))?;
        let exchange = ExchangeCorrectors::solve(&a_field, setup.tol, None)?.homogenized();
        let elastic = HomogenizedElastic::new(law.clone(), cell, setup.tol, setup.nu_key);
        let macro_fields = sample_macro(&scenario.fields, grid)?;
        let f_hom = f_hom(
            &macro_fields.grad_u,
            &macro_fields.m,
            &macro_fields.grad_m,
            &exchange,
            &elastic,
            law.params().mu0,
            &domain,
        )?;
        let bank = CorrectorBank::new(law, setup.tol);
        Ok(Self {
            scenario,
            setup,
            grid,
            domain,
            bank,
            macro_fields,
            exchange,
            elastic,
            f_hom,
        })
    }

    pub fn law(&self) -> &dyn MaterialLaw {
        self.scenario.spec.as_ref()
    }

    pub fn recovery(&self, eps: f64, alpha: f64) -> Result<RecoveryPair> {
        build_recovery_pair(
            &self.scenario.fields,
            self.grid,
            &self.bank,
            eps,
            alpha,
            self.setup.recovery,
        )
    }

    pub fn admissibility(&self, state: &DeformationState) -> Result<AdmissibilityReport> {
        check_admissibility(
            state,
            self.law().params().s,
            &self.domain.mask,
            None,
            self.setup.c_domain,
        )
    }

    /// `F_ε` on the recovery pair at `ε` with `w = id + ε^α u_ε`.
    pub fn f_eps_recovery(
        &self,
        eps: f64,
        alpha: f64,
    ) -> Result<(EnergyBreakdown, AdmissibilityReport)> {
        let pair = self.recovery(eps, alpha)?;
        let state = DeformationState::from_gradient(
            pair.u_eps,
            pair.grad_u_eps,
            eps,
            Scaling::Alpha(alpha),
        )?;
        let report = self.admissibility(&state)?;
        let e = f_eps(
            &state,
            self.law(),
            &pair.m_comp,
            &pair.grad_m_comp,
            &self.domain,
        )?;
        Ok((e, report))
    }

    /// `G_ε^lin` on the corrector-dressed fields at `ε`.
    pub fn g_lin_recovery(&self, eps: f64) -> Result<EnergyBreakdown> {
        let pair = self.recovery(eps, 1.0)?;
        g_lin(
            &pair.grad_u_eps,
            &pair.m_comp,
            &pair.grad_m_comp,
            self.law(),
            eps,
            &self.domain,
        )
    }

    /// `(F_ε^δ, G_ε^lin)` on the undressed macroscopic fields.
    pub fn linearization_point(
        &self,
        eps: f64,
        delta: f64,
    ) -> Result<(EnergyBreakdown, AdmissibilityReport, EnergyBreakdown)> {
        let mf = &self.macro_fields;
        let state = DeformationState::from_gradient(
            mf.u.clone(),
            mf.grad_u.clone(),
            eps,
            Scaling::Delta(delta),
        )?;
        let report = self.admissibility(&state)?;
        let (m_comp, grad_m_comp) = compose_macro(&self.scenario.fields, self.grid, delta)?;
        let fd = f_eps_delta(&state, self.law(), &m_comp, &grad_m_comp, &self.domain)?;
        let gl = g_lin(&mf.grad_u, &mf.m, &mf.grad_m, self.law(), eps, &self.domain)?;
        Ok((fd, report, gl))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    /// `ε` or `δ`.
    pub param: f64,
    pub energy: EnergyBreakdown,
    pub reference: f64,
    pub gap: f64,
    pub admissible: bool,
    pub report: Option<AdmissibilityReport>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub parameter: &'static str,
    pub rows: Vec<SweepRow>,
    pub reference: f64,
    /// Least-squares slope of `ln gap` against `ln param`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub fit_points: usize,
    /// Richardson extrapolation of the last two admissible rows.
    pub extrapolated: f64,
    pub strictly_decreasing: bool,
    pub liminf_violations: usize,
}

/// Least-squares line through `(ln x, ln y)`; returns `(slope, intercept)`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Limit of `v(h) = v₀ + C h^rate` from two samples at `h1 > h2`.
pub fn richardson(h1: f64, v1: f64, h2: f64, v2: f64, rate: f64) -> f64 {
    let r = (h1 / h2).powf(rate);
    if !(rate > 0.0) || !r.is_finite() || (r - 1.0).abs() < 1e-12 {
        return v2;
    }
    (r * v2 - v1) / (r - 1.0)
}

fn summarize(parameter: &'static str, mut rows: Vec<SweepRow>, reference: f64) -> SweepResult {
    rows.sort_by(|a, b| b.param.total_cmp(&a.param));
    let usable: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.admissible && r.energy.total.is_finite())
        .collect();
    let fit = fit_loglog(&usable.iter().map(|r| (r.param, r.gap)).collect::<Vec<_>>());
    let extrapolated = match (usable.len(), fit) {
        (0, _) => f64::NAN,
        (1, _) | (_, None) => usable[usable.len() - 1].energy.total,
        (k, Some((slope, _))) => {
            let (a, b) = (usable[k - 2], usable[k - 1]);
            richardson(a.param, a.energy.total, b.param, b.energy.total, slope)
        }
    };
    let strictly_decreasing =
        usable.len() == rows.len() && rows.windows(2).all(|w| w[1].gap < w[0].gap);
    // fitted constant `C` of `gap ≈ C·param^slope` plus a discretization allowance
    let allowance = fit.map_or(0.0, |(_, b)| b.exp()) + 1e-3 * reference.abs();
    let liminf_violations = usable
        .iter()
        .filter(|r| r.energy.total < reference - allowance)
        .count();
    SweepResult {
        parameter,
        fit_points: if fit.is_some() {
            usable.iter().filter(|r| r.gap > 0.0).count()
        } else {
            0
        },
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        rows,
        reference,
        extrapolated,
        strictly_decreasing,
        liminf_violations,
    }
}

fn failed_row(param: f64, functional: Functional, reference: f64, err: &Error) -> SweepRow {
    let inf = f64::INFINITY;
    SweepRow {
        param,
        energy: EnergyBreakdown::new(functional, inf, inf, inf),
        reference,
        gap: inf,
        admissible: false,
        report: None,
        note: Some(err.to_string()),
    }
}

/// Reciprocals of the ladder denominators, checked to be strictly decreasing.
pub fn eps_from_denominators(denominators: &[usize]) -> Result<Vec<f64>> {
    if denominators.is_empty()
        || denominators.contains(&0)
        || denominators.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::Config(format!(
            "eps ladder denominators must be positive and strictly increasing, got {denominators:?}"
        )));
    }
    Ok(denominators.iter().map(|&k| 1.0 / k as f64).collect())
}

fn tolerated<T>(r: Result<T>) -> Result<std::result::Result<T, Error>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ (Error::TubularNeighborhood { .. } | Error::Inadmissible(_))) => Ok(Err(e)),
        Err(e) => Err(e),
    }
}

/// `F_ε` on recovery pairs along the ladder against `F_hom(u, m)`.
pub fn gamma_sweep(exp: &Experiment, denominators: &[usize], alpha: f64) -> Result<SweepResult> {
    let eps = eps_from_denominators(denominators)?;
    let reference = exp.f_hom.total;
    let rows: Vec<SweepRow> = eps
        .par_iter()
        .map(|&e| -> Result<SweepRow> {
            Ok(match tolerated(exp.f_eps_recovery(e, alpha))? {
                Ok((energy, report)) => SweepRow {
                    param: e,
                    energy,
                    reference,
                    gap: (energy.total - reference).abs(),
                    admissible: energy.admissible && report.admissible(),
                    report: Some(report),
                    note: None,
                },
                Err(err) => failed_row(e, Functional::Feps, reference, &err),
            })
        })
        .collect::<Result<_>>()?;
    Ok(summarize("eps", rows, reference))
}

/// `G_ε^lin` on corrector-dressed fields along the ladder against `F_hom`.
pub fn g_lin_sweep(exp: &Experiment, denominators: &[usize]) -> Result<SweepResult> {
    let eps = eps_from_denominators(denominators)?;
    let reference = exp.f_hom.total;
    let rows: Vec<SweepRow> = eps
        .par_iter()
        .map(|&e| -> Result<SweepRow> {
            Ok(match tolerated(exp.g_lin_recovery(e))? {
                Ok(energy) => SweepRow {
                    param: e,
                    energy,
                    reference,
                    gap: (energy.total - reference).abs(),
                    admissible: true,
                    report: None,
                    note: None,
                },
                Err(err) => failed_row(e, Functional::Glin, reference, &err),
            })
        })
        .collect::<Result<_>>()?;
    Ok(summarize("eps", rows, reference))
}

/// `F_ε^δ` at fixed `ε` along a decreasing `δ` ladder against `G_ε^lin`.
pub fn linearization_sweep(exp: &Experiment, eps: f64, deltas: &[f64]) -> Result<SweepResult> {
    if deltas.is_empty()
        || deltas.iter().any(|d| !(*d > 0.0))
        || deltas.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::Config(format!(
            "delta ladder must be positive and strictly decreasing, got {deltas:?}"
        )));
    }
    let reference = exp.linearization_point(eps, deltas[0])?.2.total;
    let rows: Vec<SweepRow> = deltas
        .par_iter()
        .map(|&d| -> Result<SweepRow> {
            let (energy, report, _) = exp.linearization_point(eps, d)?;
            Ok(SweepRow {
                param: d,
                energy,
                reference,
                gap: (energy.total - reference).abs(),
                admissible: energy.admissible && report.det_positive,
                report: Some(report),
                note: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(summarize("delta", rows, reference))
}

#[derive(Debug, Clone, Serialize)]
pub struct CommuteReport {
    pub f_hom: f64,
    /// Simultaneous limit: `F_ε` on recovery pairs.
    pub path_a: SweepResult,
    pub value_a: f64,
    /// Linearization at the finest `ε` of the ladder.
    pub linearization_eps: f64,
    pub linearization: SweepResult,
    /// Homogenization of the linearized energy on dressed fields.
    pub path_b: SweepResult,
    pub value_b: f64,
    pub rel_ab: f64,
    pub rel_a_hom: f64,
    pub rel_b_hom: f64,
    pub monotone: bool,
}

pub fn commute_check(
    exp: &Experiment,
    denominators: &[usize],
    deltas: &[f64],
    alpha: f64,
) -> Result<CommuteReport> {
    let path_a = gamma_sweep(exp, denominators, alpha)?;
    let finest = 1.0 / *denominators.last().expect("ladder checked non-empty") as f64;
    let linearization = linearization_sweep(exp, finest, deltas)?;
    let path_b = g_lin_sweep(exp, denominators)?;
    let f = exp.f_hom.total;
    let (a, b) = (path_a.extrapolated, path_b.extrapolated);
    let rel = |x: f64, y: f64| (x - y).abs() / f.abs().max(f64::MIN_POSITIVE);
    Ok(CommuteReport {
        f_hom: f,
        value_a: a,
        value_b: b,
        rel_ab: rel(a, b),
        rel_a_hom: rel(a, f),
        rel_b_hom: rel(b, f),
        monotone: linearization.strictly_decreasing,
        path_a,
        linearization_eps: finest,
        linearization,
        path_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [0.25, 0.125, 0.0625]
            .iter()
            .map(|&e: &f64| (e, 3.0 * e.powf(1.5)))
            .collect();
        let (s, b) = fit_loglog(&pts).unwrap();
        assert!((s - 1.5).abs() < 1e-12);
        assert!((b - 3f64.ln()).abs() < 1e-12);
        assert!(fit_loglog(&pts[..1]).is_none());
    }

    #[test]
    fn richardson_removes_leading_term() {
        let f = |h: f64| 2.0 + 0.7 * h * h;
        assert!((richardson(0.1, f(0.1), 0.05, f(0.05), 2.0) - 2.0).abs() < 1e-14);
        assert_eq!(richardson(0.1, 1.0, 0.05, 3.0, -1.0), 3.0);
    }

    #[test]
    fn ladder_must_increase() {
        assert!(eps_from_denominators(&[4, 8, 8]).is_err());
        assert!(eps_from_denominators(&[]).is_err());
        assert_eq!(eps_from_denominators(&[2, 4]).unwrap(), vec![0.5, 0.25]);
    }
}
