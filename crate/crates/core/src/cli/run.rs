use super::config::{RunConfig, Subcommand};
use crate::cell::{solve_elastic_cell, solve_exchange_cell, CorrectorSolution};
use crate::energy::{g_eps, DeformationState, EnergyBreakdown, Functional, Scaling};
use crate::error::Error;
use crate::experiments::{
    commute_check, gamma_sweep, product_check, recovery_chain_check, riemann_lebesgue_check,
    Experiment, SweepResult, TwoScaleCheck,
};
use crate::fields::{
    extend_by_zero, load_field, save_field, BoxGrid, CellGrid, DomainMask, Field, Grid,
    Magnetization, Rank,
};
use crate::linalg::{Mat3, Vec3};
use crate::material::{validate_hypotheses, MaterialLaw};
use crate::strayfield::solve_stray_field;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// Bumped whenever a CSV column set changes.
pub const CSV_SCHEMA: u32 = 1;

#[derive(Debug)]
pub enum RunError {
    Config(String),
    /// A solver or I/O failure in the named pipeline stage.
    Stage {
        stage: &'static str,
        source: Error,
    },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(msg) => write!(f, "configuration error: {msg}"),
            Self::Stage { stage, source } => write!(f, "{stage} failed: {source}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Stage { .. } => 3,
        }
    }
}

fn stage(name: &'static str) -> impl Fn(Error) -> RunError {
    move |e| match e {
        Error::Config(msg) => RunError::Config(msg),
        source => RunError::Stage {
            stage: name,
            source,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    /// Pipeline stage the check belongs to.
    pub stage: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub tool: &'static str,
    pub version: &'static str,
    pub csv_schema: u32,
    pub subcommand: &'static str,
    pub config_hash: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub slopes: BTreeMap<String, f64>,
    pub wall_time_s: Option<f64>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl RunSummary {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Outcome {
    checks: Vec<Check>,
    slopes: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self {
            checks: Vec::new(),
            slopes: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Passes when `value <= threshold`.
    fn at_most(&mut self, stage: &'static str, name: &str, value: f64, threshold: f64) {
        self.checks.push(Check {
            name: name.into(),
            stage,
            passed: value <= threshold,
            value,
            threshold,
        });
    }

    fn flag(&mut self, stage: &'static str, name: &str, ok: bool) {
        self.checks.push(Check {
            name: name.into(),
            stage,
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
        });
    }
}

/// Plain `f64` formatting: shortest round-trip representation.
fn num(v: f64) -> String {
    format!("{v}")
}

struct Csv {
    writer: csv::Writer<std::fs::File>,
}

impl Csv {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, RunError> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| RunError::Stage {
            stage: "output",
            source: Error::Io(std::io::Error::other(e.to_string())),
        })?;
        writer.write_record(header).map_err(csv_error)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<(), RunError> {
        self.writer.write_record(&fields).map_err(csv_error)
    }

    fn finish(mut self) -> Result<(), RunError> {
        self.writer.flush().map_err(|e| RunError::Stage {
            stage: "output",
            source: e.into(),
        })
    }
}

fn csv_error(e: csv::Error) -> RunError {
    RunError::Stage {
        stage: "output",
        source: Error::Io(std::io::Error::other(e.to_string())),
    }
}

struct Context<'a> {
    config: &'a RunConfig,
    dir: &'a Path,
    timing: bool,
}

impl Context<'_> {
    fn wall(&self, start: Instant) -> String {
        if self.timing {
            format!("{:.6}", start.elapsed().as_secs_f64())
        } else {
            "NA".into()
        }
    }

    fn experiment(&self) -> Result<Experiment, RunError> {
        let scenario = self.config.scenario().map_err(stage("config"))?;
        let setup = self.config.setup().map_err(stage("config"))?;
        Experiment::new(scenario, setup).map_err(stage("homogenization"))
    }
}

/// Validates `config`, runs the pipeline it names and writes CSV, field files
/// and `summary.json` into `config.out`.
pub fn run(config: &RunConfig) -> Result<RunSummary, RunError> {
    config.validate().map_err(stage("config"))?;
    let sub = config
        .subcommand
        .ok_or_else(|| RunError::Config("no subcommand given".into()))?;
    std::fs::create_dir_all(&config.out).map_err(|e| RunError::Stage {
        stage: "output",
        source: e.into(),
    })?;
    let ctx = Context {
        config,
        dir: &config.out,
        timing: config.timing,
    };
    let start = Instant::now();
    let outcome = match sub {
        Subcommand::CellSolve => cell_solve(&ctx)?,
        Subcommand::StrayField => stray_field(&ctx)?,
        Subcommand::EnergyEval => energy_eval(&ctx)?,
        Subcommand::GammaSweep => gamma(&ctx)?,
        Subcommand::CommuteCheck => commute(&ctx)?,
        Subcommand::TwoScale => two_scale(&ctx)?,
        Subcommand::ValidateDensity => validate_density(&ctx)?,
    };
    let passed = outcome.checks.iter().all(|c| c.passed);
    let summary = RunSummary {
        tool: "mehom",
        version: env!("CARGO_PKG_VERSION"),
        csv_schema: CSV_SCHEMA,
        subcommand: sub.name(),
        config_hash: config.hash(),
        config: config.clone(),
        checks: outcome.checks,
        slopes: outcome.slopes,
        wall_time_s: ctx.timing.then(|| start.elapsed().as_secs_f64()),
        notes: outcome.notes,
        passed,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(ctx.dir.join("summary.json"), json + "\n").map_err(|e| RunError::Stage {
        stage: "output",
        source: e.into(),
    })?;
    Ok(summary)
}

fn law_cell(law: &dyn MaterialLaw, n: usize) -> Result<CellGrid, Error> {
    CellGrid::with_dims(std::array::from_fn(
        |d| if law.varies_along(d) { n } else { 1 },
    ))
}

fn cell_solve(ctx: &Context) -> Result<Outcome, RunError> {
    let c = ctx.config;
    let scenario = c.scenario().map_err(stage("config"))?;
    let law = scenario.spec.as_ref();
    let a = Mat3::from_fn(|i, j| c.cell.a[3 * i + j]);
    let nu = Vec3::new(c.cell.nu[0], c.cell.nu[1], c.cell.nu[2]);
    let start = Instant::now();
    let grid = law_cell(law, c.grid.n).map_err(stage("config"))?;
    let sol: CorrectorSolution = if c.cell.problem == "exchange" {
        let a_field =
            Field::from_scalar_fn(Grid::Cell(grid), |y| law.a(y)).map_err(stage("cell-solve"))?;
        solve_exchange_cell(&a_field, &a, c.solver.tol, None)
    } else {
        solve_elastic_cell(law, grid, &a, &nu, c.solver.tol, None)
    }
    .map_err(stage("cell-solve"))?;
    let wall = ctx.wall(start);
    save_field(&ctx.dir.join("corrector.fld"), &sol.phi).map_err(stage("output"))?;

    let mut header = vec!["problem", "n"];
    let a_names: Vec<String> = (0..9)
        .map(|k| format!("a{}{}", k / 3 + 1, k % 3 + 1))
        .collect();
    header.extend(a_names.iter().map(String::as_str));
    header.extend([
        "nu1",
        "nu2",
        "nu3",
        "value",
        "residual",
        "iterations",
        "wall_time_s",
    ]);
    let mut csv = Csv::create(ctx.dir, "cell_solve.csv", &header)?;
    let mut row = vec![c.cell.problem.clone(), c.grid.n.to_string()];
    row.extend(c.cell.a.iter().map(|&v| num(v)));
    row.extend(c.cell.nu.iter().map(|&v| num(v)));
    row.extend([
        num(sol.value),
        num(sol.residual),
        sol.iterations.to_string(),
        wall,
    ]);
    csv.row(row)?;
    csv.finish()?;

    let mut out = Outcome::new();
    out.at_most("cell-solve", "residual", sol.residual, c.solver.tol);
    Ok(out)
}

fn default_ball(n: usize) -> Result<(Field, DomainMask), Error> {
    let grid = BoxGrid::unit([n; 3])?;
    let mask = DomainMask::ball(grid, [0.5; 3], 0.25)?;
    let m = Field::from_vector_fn(Grid::Box(grid), |_| Vec3::z())?;
    Ok((m, mask))
}

/// Unreadable or malformed input files are configuration errors.
fn load_input(path: &std::path::Path) -> Result<Field, RunError> {
    load_field(path).map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
}

fn stray_field(ctx: &Context) -> Result<Outcome, RunError> {
    let c = ctx.config;
    let mu0 = c.scenario().map_err(stage("config"))?.spec.params.mu0;
    let (m, mask) = match (&c.field.m, &c.field.mask) {
        (None, None) => default_ball(c.grid.n).map_err(stage("stray-field"))?,
        (None, Some(_)) => return Err(RunError::Config("field.mask given without field.m".into())),
        (Some(path), mask_path) => {
            let m = load_input(path)?;
            if m.rank() != Rank::Vector3 {
                return Err(RunError::Config(format!(
                    "{}: expected a vector field",
                    path.display()
                )));
            }
            let Grid::Box(grid) = *m.grid() else {
                return Err(RunError::Config(format!(
                    "{}: expected a box grid",
                    path.display()
                )));
            };
            let mask = match mask_path {
                Some(p) => DomainMask::from_field(&load_input(p)?)
                    .map_err(|e| RunError::Config(format!("{}: {e}", p.display())))?,
                None => DomainMask::new(
                    grid,
                    (0..m.n_points())
                        .map(|p| m.vector_at(p).norm() > 0.0)
                        .collect(),
                )
                .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))?,
            };
            (m, mask)
        }
    };
    let start = Instant::now();
    let unit = Magnetization::new(m.clone()).is_ok();
    let m_ext = extend_by_zero(&m, &mask).map_err(stage("stray-field"))?;
    let sol = solve_stray_field(&m_ext, mu0, c.stray.pad).map_err(stage("stray-field"))?;
    let wall = ctx.wall(start);
    let linf = (0..mask.inside().len())
        .filter(|&p| mask.is_inside(p))
        .map(|p| Vec3::from(sol.field_at(p)).norm())
        .fold(0.0, f64::max);
    save_field(&ctx.dir.join("grad_psi.fld"), &sol.grad_psi).map_err(stage("output"))?;
    let d = m.grid().dims();
    let mut csv = Csv::create(
        ctx.dir,
        "stray_field.csv",
        &[
            "grid",
            "pad",
            "energy",
            "linf_interior_field",
            "wall_time_s",
        ],
    )?;
    csv.row(vec![
        format!("{}x{}x{}", d[0], d[1], d[2]),
        num(c.stray.pad),
        num(sol.energy),
        num(linf),
        wall,
    ])?;
    csv.finish()?;

    let mut out = Outcome::new();
    let msat = (0..m.n_points())
        .filter(|&p| mask.is_inside(p))
        .map(|p| m.vector_at(p).norm())
        .fold(0.0, f64::max);
    out.at_most(
        "stray-field",
        "linf_field_bound",
        linf,
        msat / mu0 * (1.0 + 1e-9),
    );
    out.flag(
        "stray-field",
        "energy_finite",
        sol.energy.is_finite() && sol.energy >= 0.0,
    );
    if !unit {
        out.notes
            .push("input magnetization is not unit length everywhere".into());
    }
    Ok(out)
}

fn energy_eval(ctx: &Context) -> Result<Outcome, RunError> {
    let c = ctx.config;
    let functional = c.functional().map_err(stage("config"))?;
    let exp = ctx.experiment()?;
    let e = &c.energy;
    let start = Instant::now();
    let (energy, report): (EnergyBreakdown, Option<_>) = match functional {
        Functional::Fhom => (exp.f_hom, None),
        Functional::Feps => {
            let (en, rep) = exp
                .f_eps_recovery(e.eps, e.alpha)
                .map_err(stage("energy"))?;
            (en, Some(rep))
        }
        Functional::FepsDelta => {
            let (en, rep, _) = exp
                .linearization_point(e.eps, e.delta)
                .map_err(stage("energy"))?;
            (en, Some(rep))
        }
        Functional::Glin => (exp.g_lin_recovery(e.eps).map_err(stage("energy"))?, None),
        Functional::G => {
            let pair = exp.recovery(e.eps, e.alpha).map_err(stage("recovery"))?;
            let state = DeformationState::from_gradient(
                pair.u_eps,
                pair.grad_u_eps,
                e.eps,
                Scaling::Alpha(e.alpha),
            )
            .map_err(stage("energy"))?;
            let rep = exp.admissibility(&state).map_err(stage("admissibility"))?;
            let en = g_eps(
                &state,
                exp.law(),
                &pair.m_comp,
                &pair.grad_m_comp,
                &exp.domain,
            )
            .map_err(stage("energy"))?;
            (en, Some(rep))
        }
    };
    let wall = ctx.wall(start);
    let admissible = energy.admissible && report.as_ref().is_none_or(|r| r.admissible());
    let mut csv = Csv::create(
        ctx.dir,
        "energy_eval.csv",
        &[
            "functional",
            "scenario",
            "eps",
            "alpha",
            "delta",
            "n",
            "elastic",
            "exchange",
            "magnetostatic",
            "total",
            "admissible",
            "wall_time_s",
        ],
    )?;
    csv.row(vec![
        functional.name().into(),
        c.scenario.clone(),
        num(e.eps),
        num(e.alpha),
        num(e.delta),
        c.grid.n.to_string(),
        num(energy.elastic),
        num(energy.exchange),
        num(energy.magnetostatic),
        num(energy.total),
        admissible.to_string(),
        wall,
    ])?;
    csv.finish()?;
    let mut out = Outcome::new();
    out.flag("admissibility", "admissible", admissible);
    if let Some(r) = report {
        if !r.admissible() {
            out.notes.push(format!(
                "admissibility: min det {:.3e}, injectivity {}, |1/det| norm {:.3e}",
                r.min_det, r.injectivity_ok, r.inv_det_ls_norm
            ));
        }
    }
    Ok(out)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Strict decrease of the gap column, or a sweep whose gaps are all negligible.
fn monotone(s: &SweepResult) -> bool {
    s.strictly_decreasing
        || s.rows
            .iter()
            .all(|r| r.admissible && r.gap <= 1e-12 * s.reference.abs().max(1.0))
}

const SWEEP_HEADER: &[&str] = &[
    "scenario",
    "path",
    "parameter",
    "value",
    "alpha",
    "elastic",
    "exchange",
    "magnetostatic",
    "total",
    "reference",
    "gap",
    "rel_gap",
    "admissible",
    "min_det",
    "note",
];

fn sweep_rows(
    csv: &mut Csv,
    scenario: &str,
    path: &str,
    alpha: f64,
    s: &SweepResult,
) -> Result<(), RunError> {
    for r in &s.rows {
        csv.row(vec![
            scenario.into(),
            path.into(),
            s.parameter.into(),
            num(r.param),
            num(alpha),
            num(r.energy.elastic),
            num(r.energy.exchange),
            num(r.energy.magnetostatic),
            num(r.energy.total),
            num(r.reference),
            num(r.gap),
            num(r.gap / r.reference.abs().max(f64::MIN_POSITIVE)),
            r.admissible.to_string(),
            r.report
                .as_ref()
                .map_or("NA".into(), |rep| num(rep.min_det)),
            r.note.clone().unwrap_or_default(),
        ])?;
    }
    Ok(())
}

fn gamma(ctx: &Context) -> Result<Outcome, RunError> {
    let c = ctx.config;
    let exp = ctx.experiment()?;
    let sweep =
        gamma_sweep(&exp, &c.energy.eps_ladder, c.energy.alpha).map_err(stage("gamma-sweep"))?;
    let mut csv = Csv::create(ctx.dir, "gamma_sweep.csv", SWEEP_HEADER)?;
    sweep_rows(&mut csv, &c.scenario, "gamma", c.energy.alpha, &sweep)?;
    csv.finish()?;

    let mut out = Outcome::new();
    let f_hom = exp.f_hom;
    let inadmissible = sweep.rows.iter().filter(|r| !r.admissible).count();
    out.at_most(
        "admissibility",
        "inadmissible_points",
        inadmissible as f64,
        0.0,
    );
    out.flag("gamma-sweep", "gap_strictly_decreasing", monotone(&sweep));
    out.at_most(
        "gamma-sweep",
        "extrapolated_rel_error",
        rel(sweep.extrapolated, f_hom.total),
        0.02,
    );
    out.at_most(
        "gamma-sweep",
        "liminf_violations",
        sweep.liminf_violations as f64,
        0.0,
    );
    if let Some(last) = sweep.rows.last().filter(|r| r.admissible) {
        let ms = (last.energy.magnetostatic - f_hom.magnetostatic).abs()
            / f_hom.magnetostatic.abs().max(1e-12);
        out.at_most("gamma-sweep", "magnetostatic_rel_error", ms, 0.02);
    }
    if let Some(s) = sweep.slope {
        out.slopes.insert("gamma_gap_vs_eps".into(), s);
    }
    for r in sweep.rows.iter().filter(|r| r.note.is_some()) {
        out.notes.push(format!(
            "eps = {}: {}",
            r.param,
            r.note.as_deref().unwrap_or_default()
        ));
    }
    Ok(out)
}

fn commute(ctx: &Context) -> Result<Outcome, RunError> {
    let c = ctx.config;
    let exp = ctx.experiment()?;
    let report = commute_check(
        &exp,
        &c.energy.eps_ladder,
        &c.energy.delta_ladder,
        c.energy.alpha,
    )
    .map_err(stage("commute-check"))?;
    let mut csv = Csv::create(ctx.dir, "commute_check.csv", SWEEP_HEADER)?;
    sweep_rows(&mut csv, &c.scenario, "A", c.energy.alpha, &report.path_a)?;
    sweep_rows(
        &mut csv,
        &c.scenario,
        "linearization",
        c.energy.alpha,
        &report.linearization,
    )?;
    sweep_rows(&mut csv, &c.scenario, "B", c.energy.alpha, &report.path_b)?;
    csv.finish()?;

    let mut out = Outcome::new();
    let inadmissible = report.path_a.rows.iter().filter(|r| !r.admissible).count();
    out.at_most(
        "admissibility",
        "inadmissible_points",
        inadmissible as f64,
        0.0,
    );
    out.at_most("commute-check", "rel_value_a_vs_b", report.rel_ab, 0.01);
    out.at_most(
        "commute-check",
        "rel_value_a_vs_hom",
        report.rel_a_hom,
        0.02,
    );
    out.at_most(
        "commute-check",
        "rel_value_b_vs_hom",
        report.rel_b_hom,
        0.02,
    );
    out.flag("commute-check", "path_a_monotone", monotone(&report.path_a));
    out.flag(
        "commute-check",
        "linearization_monotone",
        monotone(&report.linearization),
    );
    out.flag("commute-check", "path_b_monotone", monotone(&report.path_b));
    for (name, s) in [
        ("path_a", &report.path_a),
        ("linearization", &report.linearization),
        ("path_b", &report.path_b),
    ] {
        if let Some(v) = s.slope {
            out.slopes.insert(name.into(), v);
        }
    }
    out.notes.push(format!(
        "value_A = {}, value_B = {}, F_hom = {}",
        report.value_a, report.value_b, report.f_hom
    ));
    Ok(out)
}

fn two_scale(ctx: &Context) -> Result<Outcome, RunError> {
    let c = ctx.config;
    let exp = ctx.experiment()?;
    let ladder = &c.energy.eps_ladder;
    let rl = riemann_lebesgue_check(exp.grid, ladder).map_err(stage("two-scale"))?;
    let product = product_check(exp.grid, ladder).map_err(stage("two-scale"))?;
    let chain = recovery_chain_check(&exp, ladder, c.energy.alpha).map_err(stage("two-scale"))?;
    let mut csv = Csv::create(
        ctx.dir,
        "two_scale.csv",
        &["test_id", "eps", "lhs", "rhs", "gap"],
    )?;
    let checks: [&TwoScaleCheck; 3] = [&rl, &product, &chain];
    for t in checks {
        for i in 0..t.eps.len() {
            csv.row(vec![
                t.test_id.clone(),
                num(t.eps[i]),
                num(t.lhs[i]),
                num(t.rhs),
                num(t.gaps[i]),
            ])?;
        }
    }
    csv.finish()?;

    let mut out = Outcome::new();
    let last = |t: &TwoScaleCheck| *t.lhs.last().expect("ladder is non-empty");
    out.at_most(
        "two-scale",
        "riemann_lebesgue_decay",
        last(&rl).abs() / rl.lhs[0].abs().max(f64::MIN_POSITIVE),
        0.05,
    );
    let closed = 7.0 / 6.0;
    out.at_most(
        "two-scale",
        "product_rel_error",
        rel(last(&product), closed),
        0.01,
    );
    let chain_gap = *chain.gaps.last().expect("ladder is non-empty");
    out.at_most(
        "two-scale",
        "recovery_chain_rel_error",
        chain_gap / chain.rhs.abs().max(1e-12),
        0.05,
    );
    out.notes.push(
        "two-scale pairings against finitely many test functions are a necessary condition only"
            .into(),
    );
    Ok(out)
}

fn validate_density(ctx: &Context) -> Result<Outcome, RunError> {
    let c = ctx.config;
    let scenario = c.scenario().map_err(stage("config"))?;
    let report = validate_hypotheses(scenario.spec.as_ref(), c.validate.samples, c.seed)
        .map_err(stage("validate-density"))?;
    let mut csv = Csv::create(
        ctx.dir,
        "validate_density.csv",
        &[
            "check",
            "passed",
            "worst",
            "tolerance",
            "samples",
            "witness",
        ],
    )?;
    let mut out = Outcome::new();
    for r in &report.checks {
        csv.row(vec![
            r.name.into(),
            r.passed.to_string(),
            num(r.worst),
            num(r.tolerance),
            r.samples.to_string(),
            r.witness.clone().unwrap_or_default(),
        ])?;
        out.checks.push(Check {
            name: r.name.into(),
            stage: "validate-density",
            passed: r.passed,
            value: r.worst,
            threshold: r.tolerance,
        });
    }
    csv.finish()?;
    Ok(out)
}
