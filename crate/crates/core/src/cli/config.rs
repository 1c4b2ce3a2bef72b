use crate::cell::NuKey;
use crate::energy::{Functional, DEFAULT_C_DOMAIN};
use crate::error::{Error, Result};
use crate::experiments::{
    ExperimentSetup, RecoveryOptions, Scenario, ScenarioId, StrayParams, MIN_CELL_SAMPLES,
};
use crate::fields::DEFAULT_DELTA_FLOOR;
use crate::material::{reference_density_d1, reference_density_d2, DensitySpec, PhaseLayout};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    CellSolve,
    StrayField,
    EnergyEval,
    GammaSweep,
    CommuteCheck,
    TwoScale,
    ValidateDensity,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Self::CellSolve => "cell-solve",
            Self::StrayField => "stray-field",
            Self::EnergyEval => "energy-eval",
            Self::GammaSweep => "gamma-sweep",
            Self::CommuteCheck => "commute-check",
            Self::TwoScale => "two-scale",
            Self::ValidateDensity => "validate-density",
        }
    }
}

/// Optional replacement for the scenario's density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub density: String,
    pub stiffness: String,
    pub kappa: String,
    pub exchange: String,
    pub p: f64,
    pub s: f64,
    pub mu0: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            density: "D1".into(),
            stiffness: "1".into(),
            kappa: "0".into(),
            exchange: "1".into(),
            p: 4.0,
            s: 3.0,
            mu0: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Material samples along the lamination axis; also the cell size for `cell-solve`.
    pub n: usize,
    /// Cell resolution for homogenized tensors.
    pub cell_n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: 64, cell_n: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub delta_floor: f64,
    /// `exact` or `design162`.
    pub nu_key: String,
    pub c_domain: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            delta_floor: DEFAULT_DELTA_FLOOR,
            nu_key: "design162".into(),
            c_domain: DEFAULT_C_DOMAIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrayConfig {
    pub enabled: bool,
    pub pad: f64,
    pub cells: usize,
    pub margin: usize,
}

impl Default for StrayConfig {
    fn default() -> Self {
        let d = StrayParams::default();
        Self {
            enabled: true,
            pad: d.pad_factor,
            cells: d.cells,
            margin: d.margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    pub functional: String,
    pub eps: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Reciprocals of the sampled `ε`.
    pub eps_ladder: Vec<usize>,
    pub delta_ladder: Vec<f64>,
    /// Multiplies the scenario displacement.
    pub displacement_scale: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            functional: "Feps".into(),
            eps: 0.125,
            alpha: 1.0,
            delta: 1e-3,
            eps_ladder: vec![2, 4, 8, 16],
            delta_ladder: vec![1e-1, 1e-2, 1e-3],
            displacement_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellConfig {
    /// `exchange` or `elastic`.
    pub problem: String,
    /// Row-major macroscopic gradient.
    pub a: Vec<f64>,
    pub nu: Vec<f64>,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            problem: "exchange".into(),
            a: vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            nu: vec![0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Magnetization field file; a uniformly magnetized ball when absent.
    pub m: Option<PathBuf>,
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub samples: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { samples: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub subcommand: Option<Subcommand>,
    pub scenario: String,
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: PathBuf,
    /// Record wall times; off by default so outputs stay byte-identical.
    pub timing: bool,
    pub material: Option<MaterialConfig>,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub stray: StrayConfig,
    pub energy: EnergyConfig,
    pub cell: CellConfig,
    pub field: FieldConfig,
    pub validate: ValidateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: None,
            scenario: "S1".into(),
            seed: 0,
            threads: None,
            out: PathBuf::from("out"),
            timing: false,
            material: None,
            grid: GridConfig::default(),
            solver: SolverConfig::default(),
            stray: StrayConfig::default(),
            energy: EnergyConfig::default(),
            cell: CellConfig::default(),
            field: FieldConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

/// Rejects a key assigned twice in the same table, naming both lines.
fn check_duplicates(text: &str) -> Result<()> {
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    let mut table = String::new();
    let mut depth = 0i32;
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim().to_string();
        if depth == 0 && line.starts_with('[') {
            table = line
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        if depth == 0 {
            if let Some(eq) = line.find('=') {
                let key = line[..eq].trim().trim_matches('"').to_string();
                if let Some(first) = seen.insert((table.clone(), key.clone()), i + 1) {
                    let name = if table.is_empty() {
                        key
                    } else {
                        format!("{table}.{key}")
                    };
                    return Err(Error::Config(format!(
                        "duplicate key `{name}` at line {} (first defined at line {first})",
                        i + 1
                    )));
                }
            }
        }
        depth += bracket_balance(&line);
    }
    Ok(())
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn bracket_balance(line: &str) -> i32 {
    let value = match line.find('=') {
        Some(eq) => &line[eq + 1..],
        None => line,
    };
    let mut quoted = false;
    let mut depth = 0;
    for c in value.chars() {
        match c {
            '"' => quoted = !quoted,
            '[' if !quoted => depth += 1,
            ']' if !quoted => depth -= 1,
            _ => {}
        }
    }
    depth
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        check_duplicates(text)?;
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn scenario_id(&self) -> Result<ScenarioId> {
        ScenarioId::parse(&self.scenario)
    }

    pub fn functional(&self) -> Result<Functional> {
        Functional::parse(&self.energy.functional).ok_or_else(|| {
            Error::Config(format!(
                "energy.functional: unknown functional `{}` (expected G, Feps, Fdelta, Glin or Fhom)",
                self.energy.functional
            ))
        })
    }

    pub fn nu_key(&self) -> Result<NuKey> {
        match self.solver.nu_key.as_str() {
            "exact" => Ok(NuKey::Exact),
            "design162" => Ok(NuKey::Design162),
            other => Err(Error::Config(format!(
                "solver.nu_key: expected exact or design162, got `{other}`"
            ))),
        }
    }

    pub fn density(&self) -> Result<Option<DensitySpec>> {
        let Some(mat) = &self.material else {
            return Ok(None);
        };
        let layout = |key: &str, text: &str| {
            PhaseLayout::parse(text).map_err(|e| Error::Config(format!("material.{key}: {e}")))
        };
        let stiffness = layout("stiffness", &mat.stiffness)?;
        let kappa = layout("kappa", &mat.kappa)?;
        let exchange = layout("exchange", &mat.exchange)?;
        if exchange.min() <= 0.0 {
            return Err(Error::Config(
                "material.exchange: values must be positive".into(),
            ));
        }
        let spec = match mat.density.as_str() {
            "D1" => {
                if kappa != PhaseLayout::Constant(0.0) {
                    return Err(Error::Config(
                        "material.kappa: D1 has no coupling modulus".into(),
                    ));
                }
                reference_density_d1(stiffness, mat.p, mat.s)
            }
            "D2" => reference_density_d2(stiffness, kappa, mat.p, mat.s),
            other => {
                return Err(Error::Config(format!(
                    "material.density: expected D1 or D2, got `{other}`"
                )))
            }
        }
        .map_err(|e| Error::Config(format!("material: {e}")))?;
        if !(mat.mu0 > 0.0) {
            return Err(Error::Config("material.mu0 must be positive".into()));
        }
        Ok(Some(spec.with_exchange(exchange).with_mu0(mat.mu0)))
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = Scenario::builtin(self.scenario_id()?)
            .with_displacement_scale(self.energy.displacement_scale);
        if let Some(spec) = self.density()? {
            s = s.with_spec(spec);
        }
        Ok(s)
    }

    pub fn setup(&self) -> Result<ExperimentSetup> {
        Ok(ExperimentSetup {
            n: self.grid.n,
            cell_n: self.grid.cell_n,
            tol: self.solver.tol,
            nu_key: self.nu_key()?,
            stray: self.stray.enabled.then_some(StrayParams {
                cells: self.stray.cells,
                margin: self.stray.margin,
                pad_factor: self.stray.pad,
            }),
            c_domain: self.solver.c_domain,
            recovery: RecoveryOptions {
                delta_floor: self.solver.delta_floor,
                ..RecoveryOptions::default()
            },
        })
    }

    /// Range and consistency checks; the error names the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        self.scenario_id()?;
        self.functional()?;
        self.nu_key()?;
        self.density()?;
        let g = &self.grid;
        if g.n < 2 {
            return bad("grid.n", format!("must be at least 2, got {}", g.n));
        }
        if g.cell_n < 2 {
            return bad(
                "grid.cell_n",
                format!("must be at least 2, got {}", g.cell_n),
            );
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol <= 1e-2) {
            return bad(
                "solver.tol",
                format!("must lie in (0, 1e-2], got {}", s.tol),
            );
        }
        if !(s.delta_floor > 0.0 && s.delta_floor < 1.0) {
            return bad(
                "solver.delta_floor",
                format!("must lie in (0, 1), got {}", s.delta_floor),
            );
        }
        if !(s.c_domain > 0.0 && s.c_domain < 1.0) {
            return bad(
                "solver.c_domain",
                format!("must lie in (0, 1), got {}", s.c_domain),
            );
        }
        let st = &self.stray;
        if !(st.pad >= 2.0 && st.pad.is_finite()) {
            return bad("stray.pad", format!("must be at least 2, got {}", st.pad));
        }
        if st.cells < 2 {
            return bad(
                "stray.cells",
                format!("must be at least 2, got {}", st.cells),
            );
        }
        if st.margin < 1 {
            return bad("stray.margin", "must be at least 1".into());
        }
        let e = &self.energy;
        if !(e.alpha > 0.0 && e.alpha.is_finite()) {
            return bad("energy.alpha", format!("must be positive, got {}", e.alpha));
        }
        if !(e.delta > 0.0 && e.delta <= 1.0) {
            return bad(
                "energy.delta",
                format!("must lie in (0, 1], got {}", e.delta),
            );
        }
        if !(e.displacement_scale.is_finite()) {
            return bad("energy.displacement_scale", "must be finite".into());
        }
        if !(e.eps > 0.0 && e.eps <= 1.0) {
            return bad("energy.eps", format!("must lie in (0, 1], got {}", e.eps));
        }
        let uses = |subs: &[Subcommand]| self.subcommand.is_none_or(|s| subs.contains(&s));
        if uses(&[Subcommand::EnergyEval]) {
            let k = (1.0 / e.eps).round();
            if ((1.0 / e.eps) - k).abs() > 1e-9 * k {
                return bad(
                    "energy.eps",
                    format!("must be the reciprocal of an integer, got {}", e.eps),
                );
            }
            self.check_denominator("energy.eps", k as usize)?;
        }
        if uses(&[
            Subcommand::GammaSweep,
            Subcommand::CommuteCheck,
            Subcommand::TwoScale,
        ]) {
            self.check_ladders()?;
        }
        if !uses(&[Subcommand::StrayField]) && (self.field.m.is_some() || self.field.mask.is_some())
        {
            return bad("field.m", "field files are only read by stray-field".into());
        }
        self.check_cell()?;
        if self.validate.samples < 100 {
            return bad(
                "validate.samples",
                format!("must be at least 100, got {}", self.validate.samples),
            );
        }
        if self.threads == Some(0) {
            return bad("threads", "must be at least 1".into());
        }
        Ok(())
    }

    fn check_ladders(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        let e = &self.energy;
        if e.eps_ladder.is_empty() {
            return bad("energy.eps_ladder", "must not be empty".into());
        }
        for w in e.eps_ladder.windows(2) {
            if w[1] <= w[0] {
                return bad(
                    "energy.eps_ladder",
                    format!(
                        "denominators must strictly increase, got {:?}",
                        e.eps_ladder
                    ),
                );
            }
        }
        for &k in &e.eps_ladder {
            self.check_denominator("energy.eps_ladder", k)?;
        }
        if e.delta_ladder.is_empty() {
            return bad("energy.delta_ladder", "must not be empty".into());
        }
        if e.delta_ladder.iter().any(|d| !(*d > 0.0 && *d <= 1.0))
            || e.delta_ladder.windows(2).any(|w| w[1] >= w[0])
        {
            return bad(
                "energy.delta_ladder",
                format!(
                    "values must lie in (0, 1] and strictly decrease, got {:?}",
                    e.delta_ladder
                ),
            );
        }
        Ok(())
    }

    fn check_cell(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("{key}: {msg}")));
        let c = &self.cell;
        if c.problem != "exchange" && c.problem != "elastic" {
            return bad(
                "cell.problem",
                format!("expected exchange or elastic, got `{}`", c.problem),
            );
        }
        if c.a.len() != 9 || c.a.iter().any(|v| !v.is_finite()) {
            return bad(
                "cell.a",
                format!("expected 9 finite reals, got {}", c.a.len()),
            );
        }
        if c.nu.len() != 3 || c.nu.iter().any(|v| !v.is_finite()) {
            return bad(
                "cell.nu",
                format!("expected 3 finite reals, got {}", c.nu.len()),
            );
        }
        let norm = c.nu.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return bad("cell.nu", format!("must be a unit vector, |nu| = {norm}"));
        }
        Ok(())
    }

    fn check_denominator(&self, key: &str, k: usize) -> Result<()> {
        let n = self.grid.n;
        if k == 0 || !n.is_multiple_of(k) || n / k < MIN_CELL_SAMPLES {
            return Err(Error::Config(format!(
                "{key}: 1/{k} is incommensurate with grid.n = {n} ({k} must divide n with at least {MIN_CELL_SAMPLES} samples per cell)"
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON echo, ignoring keys that do not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.threads = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_toml("scenario = \"S1\"\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid.n, 64);
        assert_eq!(c.stray.pad, 2.0);
        assert_eq!(c.solver.tol, 1e-10);
    }

    #[test]
    fn incommensurate_ladder_is_rejected() {
        let c = RunConfig::from_toml("[energy]\neps_ladder = [3, 8]\n").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(
            msg.contains("energy.eps_ladder") && msg.contains("1/3"),
            "{msg}"
        );
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = "scenario = \"S1\"\n[grid]\nn = 32\ncell_n = 8\nn = 64\n";
        let msg = RunConfig::from_toml(text).unwrap_err().to_string();
        assert!(
            msg.contains("grid.n") && msg.contains("line 5") && msg.contains("line 3"),
            "{msg}"
        );
        // the same key in different tables is fine
        RunConfig::from_toml("[grid]\nn = 32\n[validate]\nsamples = 200\n").unwrap();
    }

    #[test]
    fn multiline_arrays_do_not_confuse_duplicate_scan() {
        let text = "[material]\ndensity = \"D1\"\nstiffness = \"laminate(axis=1, fraction=0.5, values=[1, 10])\"\n[energy]\neps_ladder = [\n  4,\n  8,\n]\n";
        let c = RunConfig::from_toml(text).unwrap();
        assert_eq!(c.energy.eps_ladder, vec![4, 8]);
        assert!(c.density().unwrap().is_some());
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let msg = RunConfig::from_toml("[grid]\nn = 32\nsize = 4\n")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("size") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn out_of_range_values_name_the_key() {
        let mut c = RunConfig::default();
        c.stray.pad = 1.5;
        assert!(c.validate().unwrap_err().to_string().contains("stray.pad"));
        let mut c = RunConfig::default();
        c.energy.eps = 0.3;
        assert!(c.validate().unwrap_err().to_string().contains("energy.eps"));
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        b.threads = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.grid.n = 32;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn field_files_only_for_stray_field() {
        let text = "subcommand = \"energy-eval\"\n[field]\nm = \"m.fld\"\n";
        let err = RunConfig::from_toml(text).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("stray-field"), "{err}");
        let ok = text.replace("energy-eval", "stray-field");
        RunConfig::from_toml(&ok).unwrap().validate().unwrap();
    }
}
