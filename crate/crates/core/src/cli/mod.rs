//! Command-line front end: configuration, orchestration and output.

pub mod config;
pub mod run;

pub use config::{RunConfig, Subcommand};
pub use run::{run, Check, RunError, RunSummary, CSV_SCHEMA};

use clap::Parser;
use std::path::PathBuf;

/// Command-line flags; every flag overrides the matching configuration key.
#[derive(Debug, Parser)]
#[command(
    name = "mehom",
    version,
    about = "Homogenization and linearization checks for magnetoelastic energies"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Record wall times in CSV and summary.
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub scenario: Option<String>,
    /// Material grid size (cell size for cell-solve).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub cell_n: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub delta_floor: Option<f64>,
    #[arg(long)]
    pub nu_key: Option<String>,
    #[arg(long)]
    pub c_domain: Option<f64>,
    #[arg(long)]
    pub pad: Option<f64>,
    #[arg(long)]
    pub stray_cells: Option<usize>,
    #[arg(long)]
    pub stray_margin: Option<usize>,
    /// Drop the magnetostatic term from energy evaluations.
    #[arg(long)]
    pub no_stray: bool,
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated reciprocals of `ε`, e.g. `4,8,16`.
    #[arg(long, value_delimiter = ',')]
    pub eps_ladder: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub delta_ladder: Option<Vec<f64>>,
    #[arg(long)]
    pub displacement_scale: Option<f64>,
    #[arg(long)]
    pub problem: Option<String>,
    /// Nine comma-separated reals, row-major.
    #[arg(long = "A", value_delimiter = ',', allow_negative_numbers = true)]
    pub a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub nu: Option<Vec<f64>>,
    /// Magnetization field file for stray-field.
    #[arg(long)]
    pub m: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long)]
    pub stiffness: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub exchange: Option<String>,
}

macro_rules! set {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

impl Cli {
    /// Reads the configuration file, if any, and applies flag overrides.
    pub fn into_config(self) -> crate::error::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        c.subcommand = Some(self.subcommand);
        set!(c.out, self.out);
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        set!(c.seed, self.seed);
        c.timing |= self.timing;
        set!(c.scenario, self.scenario);
        set!(c.grid.n, self.n);
        set!(c.grid.cell_n, self.cell_n);
        set!(c.solver.tol, self.tol);
        set!(c.solver.delta_floor, self.delta_floor);
        set!(c.solver.nu_key, self.nu_key);
        set!(c.solver.c_domain, self.c_domain);
        set!(c.stray.pad, self.pad);
        set!(c.stray.cells, self.stray_cells);
        set!(c.stray.margin, self.stray_margin);
        if self.no_stray {
            c.stray.enabled = false;
        }
        set!(c.energy.functional, self.functional);
        set!(c.energy.eps, self.eps);
        set!(c.energy.alpha, self.alpha);
        set!(c.energy.delta, self.delta);
        set!(c.energy.eps_ladder, self.eps_ladder);
        set!(c.energy.delta_ladder, self.delta_ladder);
        set!(c.energy.displacement_scale, self.displacement_scale);
        set!(c.cell.problem, self.problem);
        set!(c.cell.a, self.a);
        set!(c.cell.nu, self.nu);
        if self.m.is_some() {
            c.field.m = self.m;
        }
        if self.mask.is_some() {
            c.field.mask = self.mask;
        }
        set!(c.validate.samples, self.samples);
        if self.density.is_some()
            || self.stiffness.is_some()
            || self.kappa.is_some()
            || self.exchange.is_some()
        {
            let mut mat = c.material.take().unwrap_or_default();
            set!(mat.density, self.density);
            set!(mat.stiffness, self.stiffness);
            set!(mat.kappa, self.kappa);
            set!(mat.exchange, self.exchange);
            c.material = Some(mat);
        }
        Ok(c)
    }
}

/// Parses `args`, runs and returns the process exit code:
/// 0 all checks pass, 1 a check failed, 2 configuration error, 3 solver failure.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match cli.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return 2;
        }
    };
    if let Some(k) = config.threads {
        if k == 0 {
            eprintln!("configuration error: threads: must be at least 1");
            return 2;
        }
        // a second global initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    match run(&config) {
        Ok(summary) => {
            for c in &summary.checks {
                let mark = if c.passed { "pass" } else { "FAIL" };
                println!(
                    "{mark} [{}] {}: {} (threshold {})",
                    c.stage, c.name, c.value, c.threshold
                );
            }
            for n in &summary.notes {
                println!("note: {n}");
            }
            if summary.passed {
                0
            } else {
                let stages: Vec<&str> = summary.failed_checks().map(|c| c.stage).collect();
                eprintln!("check failure in stage(s): {}", stages.join(", "));
                1
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
