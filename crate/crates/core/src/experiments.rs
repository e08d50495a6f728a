//! Declarative experiments: TOML configuration, execution, and the artifact
//! directory with its manifest.
//!
//! A configuration file has a `kind`, an optional `seed`, a `[model]` table
//! (`n`, `p`), and optional `[solver]` and `[experiment]` tables. Unknown keys
//! anywhere are errors. Solver keys override the defaults of the kind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Boundary, LorentzData, SolverConfig};
use crate::energy::{blowup_criterion, check_monotone, energy_scheme_error, evolve_monitored, lyapunov};
use crate::error::{Error, Result};
use crate::modulation::{trapping_check, trapping_precondition, transport_time, ModulationTrace};
use crate::profiles::{kappa_star_scalar, ModelParams, ProfileParams, Sign};
use crate::selfsim::evolve;
use crate::simvars::{Bump, FieldSnapshot, SelfSimFrame, YGrid};
use crate::surface::{
    fit_at, gradient_vs_d, lipschitz_report, local_min_report, rigidity_experiment, stability_experiment, Extension,
    RigiditySetup, StabilitySetup,
};
use crate::wave::{build_surface, lorentz_snapshot, physical_grid, SurfaceBuild};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "WAVELAB_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    OdeCheck,
    SolitonCheck,
    SurfaceBuild,
    ModulationDecay,
    Rigidity,
    Stability,
    EnergyTrace,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::OdeCheck,
        Kind::SolitonCheck,
        Kind::SurfaceBuild,
        Kind::ModulationDecay,
        Kind::Rigidity,
        Kind::Stability,
        Kind::EnergyTrace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::OdeCheck => "ode-check",
            Kind::SolitonCheck => "soliton-check",
            Kind::SurfaceBuild => "surface-build",
            Kind::ModulationDecay => "modulation-decay",
            Kind::Rigidity => "rigidity",
            Kind::Stability => "stability",
            Kind::EnergyTrace => "energy-trace",
        }
    }

    /// The statement the experiment checks.
    pub fn statement(self) -> &'static str {
        match self {
            Kind::OdeCheck => "spatially constant data blow up at the time of the ODE solution κ₀ (T - t)^{-2/(p-1)}",
            Kind::SolitonCheck => {
                "Lorentz solitons blow up on the hyperplane T(x) = T* + d·(x - x*), a 1-Lipschitz surface; \
                 κ(d) is stationary and κ*(d, μeˢ) is an exact solution in similarity variables"
            }
            Kind::SurfaceBuild => {
                "at a non-characteristic point the blow-up surface is differentiable with ∇T(x₀) = d(x₀); \
                 at a local minimum ∇T = 0 and the profile converges to ±κ₀"
            }
            Kind::ModulationDecay => {
                "solutions starting near κ(d̄) stay trapped near the soliton family and converge to it exponentially"
            }
            Kind::Rigidity => {
                "a solution equal to κ(d*) on the unit ball keeps that form there whatever happens outside"
            }
            Kind::Stability => {
                "the set of non-characteristic points with soliton profile is open under perturbation of the \
                 data, and the blow-up time depends continuously on the data"
            }
            Kind::EnergyTrace => {
                "the Lyapunov functional is non-increasing along the flow, and negative energy forces blow-up"
            }
        }
    }

    pub fn criteria(self) -> &'static [u8] {
        match self {
            Kind::OdeCheck => &[2, 13],
            Kind::SolitonCheck => &[3, 4, 9],
            Kind::SurfaceBuild => &[8, 12],
            Kind::ModulationDecay => &[7],
            Kind::Rigidity => &[10],
            Kind::Stability => &[11],
            Kind::EnergyTrace => &[1, 5, 6],
        }
    }

    /// Solver defaults before `[solver]` overrides.
    pub fn default_solver(self) -> SolverConfig {
        let base = SolverConfig::default();
        match self {
            Kind::OdeCheck => SolverConfig {
                domain: 1.0,
                cells: 100,
                boundary: Boundary::Sponge { width: 0.0, strength: 0.0 },
                resolve_ratio: 1e9,
                mask_cells: 0.0,
                t_end: 2.0,
                ..base
            },
            Kind::SolitonCheck => SolverConfig { domain: 2.0, cells: 1200, t_end: 3.0, ..base },
            Kind::SurfaceBuild => SolverConfig { domain: 2.0, t_end: 3.0, ..base },
            Kind::Stability => SolverConfig { domain: 1.5, cells: 800, t_end: 3.0, ..base },
            Kind::ModulationDecay | Kind::EnergyTrace => SolverConfig { output_interval: 0.05, ..SolverConfig::selfsim() },
            Kind::Rigidity => SolverConfig::selfsim(),
        }
    }

    fn parse(s: &str) -> Result<Kind> {
        Kind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment kind {s:?}")))
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdeCheck {
    pub t_blowup: f64,
    pub tolerance: f64,
}

impl Default for OdeCheck {
    fn default() -> Self {
        Self { t_blowup: 1.0, tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaStarCheck {
    pub d: f64,
    pub mu: f64,
    pub cells: Vec<usize>,
    pub span: f64,
    pub min_order: f64,
}

impl Default for KappaStarCheck {
    fn default() -> Self {
        Self { d: 0.3, mu: 0.1, cells: vec![100, 200, 400], span: 2.0, min_order: 1.9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolitonCheck {
    pub e: Sign,
    pub d: f64,
    pub x_star: f64,
    pub t_star: f64,
    pub probes: Vec<f64>,
    pub tolerance: f64,
    pub lipschitz_tolerance: f64,
    /// `|d|` values for the self-similar stationarity check; empty skips it.
    pub stationary: Vec<f64>,
    /// Coarse then fine unit-ball cells for stationarity.
    pub stationary_cells: Vec<usize>,
    pub stationary_span: f64,
    pub stationary_tolerance: f64,
    pub kappa_star: Option<KappaStarCheck>,
}

impl Default for SolitonCheck {
    fn default() -> Self {
        Self {
            e: Sign::Plus,
            d: 0.5,
            x_star: 0.0,
            t_star: 1.5,
            probes: vec![-0.5, -0.25, 0.0, 0.25, 0.5],
            tolerance: 2e-3,
            lipschitz_tolerance: 2e-3,
            stationary: Vec::new(),
            stationary_cells: vec![10000, 20000],
            stationary_span: 5.0,
            stationary_tolerance: 1e-4,
            kappa_star: None,
        }
    }
}

/// `amplitude · exp(-((x - center)/width)²) · (1 + tilt · sin x)`, at rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Datum {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub tilt: f64,
}

impl Default for Datum {
    fn default() -> Self {
        Self { amplitude: 2.0, center: 0.1, width: 1.0, tilt: 0.2 }
    }
}

impl Datum {
    pub fn eval(&self, x: f64) -> f64 {
        let z = (x - self.center) / self.width;
        self.amplitude * (-z * z).exp() * (1.0 + self.tilt * x.sin())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceBuildSpec {
    pub datum: Datum,
    pub probe_from: f64,
    pub probe_to: f64,
    pub probe_step: f64,
    /// Physical resolutions, coarse to fine.
    pub cells: Vec<usize>,
    pub fit_cells: usize,
    pub stencil_radius: f64,
    pub min_side: usize,
    pub gap_tolerance: f64,
    /// Require the gap to shrink from each resolution to the next.
    pub gap_decreasing: bool,
    /// Where the minimum must sit (even data); also enables the `|d|` check.
    pub expect_minimum: Option<f64>,
    pub d_tolerance: f64,
}

impl Default for SurfaceBuildSpec {
    fn default() -> Self {
        Self {
            datum: Datum::default(),
            probe_from: -0.16,
            probe_to: 0.4,
            probe_step: 0.004,
            cells: vec![2000, 4000, 8000],
            fit_cells: 200,
            stencil_radius: 0.1,
            min_side: 3,
            gap_tolerance: 5e-2,
            gap_decreasing: true,
            expect_minimum: None,
            d_tolerance: 5e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationDecaySpec {
    pub e: Sign,
    pub d_bar: f64,
    pub bump_center: f64,
    pub bump_width: f64,
    /// `𝓗` norm of the perturbation.
    pub eps: f64,
    pub cells: usize,
    pub span: f64,
    /// Largest initial distance accepted as a trapping test.
    pub eps0: f64,
    pub min_r2: f64,
}

impl Default for ModulationDecaySpec {
    fn default() -> Self {
        Self {
            e: Sign::Plus,
            d_bar: 0.3,
            bump_center: 0.2,
            bump_width: 0.3,
            eps: 1e-2,
            cells: 400,
            span: 4.0,
            eps0: 0.1,
            min_r2: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigiditySpec {
    pub d_star: f64,
    pub a_star: f64,
    /// Extensions are seeded with `seed, seed + 1, ...`.
    pub seeds: usize,
    pub intervals: Vec<usize>,
    pub span: f64,
    pub tolerance: f64,
    /// Negative control: a bump meeting the unit ball.
    pub intruding: Option<Bump>,
}

impl Default for RigiditySpec {
    fn default() -> Self {
        Self { d_star: 0.3, a_star: 2.0, seeds: 3, intervals: vec![800, 1600, 3200], span: 3.0, tolerance: 1e-4, intruding: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySpec {
    pub soliton: LorentzData,
    pub eps: Vec<f64>,
    pub bump: Bump,
    pub probes: Vec<f64>,
    pub delta0: f64,
    pub fit_cells: usize,
    pub sigma_factor: f64,
}

impl Default for StabilitySpec {
    fn default() -> Self {
        Self {
            soliton: LorentzData { e: Sign::Plus, d: 0.3, x_star: 0.0, t_star: 1.5 },
            eps: vec![1e-1, 1e-2, 1e-3],
            bump: Bump { center: 0.0, width: 0.5, amplitude: 1.0 },
            probes: (-6..=6).map(|k| k as f64 * 0.05).collect(),
            delta0: 0.65,
            fit_cells: 200,
            sigma_factor: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyTraceSpec {
    pub cells: usize,
    pub lambda: f64,
    pub divergence_horizon: f64,
    pub energy_tolerance: f64,
    pub e: Sign,
    pub d: f64,
    pub runs: usize,
    /// `𝓗` norm of each seeded perturbation.
    pub eps: f64,
    pub span: f64,
}

impl Default for EnergyTraceSpec {
    fn default() -> Self {
        Self {
            cells: 400,
            lambda: 1.5,
            divergence_horizon: 50.0,
            energy_tolerance: 1e-6,
            e: Sign::Plus,
            d: 0.3,
            runs: 20,
            eps: 0.1,
            span: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExperimentSpec {
    OdeCheck(OdeCheck),
    SolitonCheck(SolitonCheck),
    SurfaceBuild(SurfaceBuildSpec),
    ModulationDecay(ModulationDecaySpec),
    Rigidity(RigiditySpec),
    Stability(StabilitySpec),
    EnergyTrace(EnergyTraceSpec),
}

impl ExperimentSpec {
    pub fn default_for(kind: Kind) -> Self {
        match kind {
            Kind::OdeCheck => Self::OdeCheck(Default::default()),
            Kind::SolitonCheck => Self::SolitonCheck(Default::default()),
            Kind::SurfaceBuild => Self::SurfaceBuild(Default::default()),
            Kind::ModulationDecay => Self::ModulationDecay(Default::default()),
            Kind::Rigidity => Self::Rigidity(Default::default()),
            Kind::Stability => Self::Stability(Default::default()),
            Kind::EnergyTrace => Self::EnergyTrace(Default::default()),
        }
    }

    fn parse(kind: Kind, table: toml::Table) -> Result<Self> {
        fn de<T: DeserializeOwned>(t: toml::Table) -> Result<T> {
            T::deserialize(t).map_err(|e| Error::InvalidConfig(format!("[experiment]: {e}")))
        }
        Ok(match kind {
            Kind::OdeCheck => Self::OdeCheck(de(table)?),
            Kind::SolitonCheck => Self::SolitonCheck(de(table)?),
            Kind::SurfaceBuild => Self::SurfaceBuild(de(table)?),
            Kind::ModulationDecay => Self::ModulationDecay(de(table)?),
            Kind::Rigidity => Self::Rigidity(de(table)?),
            Kind::Stability => Self::Stability(de(table)?),
            Kind::EnergyTrace => Self::EnergyTrace(de(table)?),
        })
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: String,
    #[serde(default)]
    seed: u64,
    model: ModelParams,
    #[serde(default)]
    solver: toml::Table,
    #[serde(default)]
    experiment: toml::Table,
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub model: ModelParams,
    pub solver: SolverConfig,
    pub experiment: ExperimentSpec,
}

impl ExperimentConfig {
    /// Defaults for `kind` with the given model.
    pub fn default_for(kind: Kind, model: ModelParams) -> Self {
        Self { kind, seed: 0, model, solver: kind.default_solver(), experiment: ExperimentSpec::default_for(kind) }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let kind = Kind::parse(&raw.kind)?;
        let mut solver = toml::Table::try_from(kind.default_solver())
            .map_err(|e| Error::InvalidConfig(format!("solver defaults: {e}")))?;
        for (key, value) in raw.solver {
            if !solver.contains_key(&key) {
                return Err(Error::InvalidConfig(format!("[solver]: unknown key {key:?}")));
            }
            solver.insert(key, value);
        }
        let solver = SolverConfig::deserialize(solver).map_err(|e| Error::InvalidConfig(format!("[solver]: {e}")))?;
        solver.validate()?;
        let experiment = ExperimentSpec::parse(kind, raw.experiment)?;
        Ok(Self { kind, seed: raw.seed, model: raw.model, solver, experiment })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
        Self::from_toml_str(&text).map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })
    }

    /// Complete TOML rendering; parses back to an equal configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn sha256(&self) -> Result<String> {
        Ok(hex_digest(self.to_toml()?.as_bytes()))
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One pass/fail line of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes iff `value <= tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value <= tolerance, value, tolerance, detail: detail.into() }
    }

    /// Passes iff `value >= tolerance`.
    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value >= tolerance, value, tolerance, detail: detail.into() }
    }

    /// Passes iff `value > tolerance`.
    pub fn above(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed: value > tolerance, value, tolerance, detail: detail.into() }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: f64::from(u8::from(passed)), tolerance: 1.0, detail: detail.into() }
    }
}

/// In-memory artifacts of a run, written out by [`run_experiment`].
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn add_csv(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.add(name, buf);
        Ok(())
    }

    pub fn files(&self) -> &[(String, Vec<u8>)] {
        &self.files
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }
}

/// Checks, artifacts and the machine-readable report of one experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifacts: Artifacts,
    pub report: serde_json::Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Contents of `manifest.json`; see `docs/manifest.md`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub kind: Kind,
    pub created: String,
    pub config_sha256: String,
    pub config: String,
    pub seed: u64,
    pub threads: usize,
    pub tolerances: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<ArtifactEntry>,
    pub passed: bool,
    pub elapsed_seconds: f64,
}

/// Runs the experiment without touching the file system.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    match &cfg.experiment {
        ExperimentSpec::OdeCheck(x) => ode_check(cfg, x),
        ExperimentSpec::SolitonCheck(x) => soliton_check(cfg, x),
        ExperimentSpec::SurfaceBuild(x) => surface_build(cfg, x),
        ExperimentSpec::ModulationDecay(x) => modulation_decay(cfg, x),
        ExperimentSpec::Rigidity(x) => rigidity(cfg, x),
        ExperimentSpec::Stability(x) => stability(cfg, x),
        ExperimentSpec::EnergyTrace(x) => energy_trace(cfg, x),
    }
}

/// Output root: explicit, else `$WAVELAB_OUT`, else `runs`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs")),
    }
}

/// Executes `cfg` and writes its artifacts, `report.json`, `report.md` and
/// `manifest.json` into a fresh timestamped directory under `root`.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<(PathBuf, Manifest)> {
    let started = Instant::now();
    let now = chrono::Utc::now();
    let config = cfg.to_toml()?;
    let config_sha256 = hex_digest(config.as_bytes());
    let outcome = execute(cfg)?;
    let stem = format!("{}-{}-{}", cfg.kind, now.format("%Y%m%dT%H%M%S"), &config_sha256[..8]);
    let mut dir = root.join(&stem);
    let mut k = 1;
    while dir.exists() {
        k += 1;
        dir = root.join(format!("{stem}-{k}"));
    }
    fs::create_dir_all(&dir)?;
    let mut artifacts = Vec::new();
    for (name, bytes) in outcome.artifacts.files() {
        fs::write(dir.join(name), bytes)?;
        artifacts.push(ArtifactEntry { path: name.clone(), sha256: hex_digest(bytes), bytes: bytes.len() });
    }
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(&outcome.report)?)?;
    fs::write(dir.join("report.md"), markdown_report(cfg, &outcome))?;
    let manifest = Manifest {
        schema_version: 1,
        kind: cfg.kind,
        created: now.to_rfc3339(),
        config_sha256,
        config,
        seed: cfg.seed,
        threads: rayon::current_num_threads(),
        tolerances: outcome.checks.iter().map(|c| (c.name.clone(), c.tolerance)).collect(),
        checks: outcome.checks.clone(),
        artifacts,
        passed: outcome.passed(),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok((dir, manifest))
}

fn markdown_report(cfg: &ExperimentConfig, outcome: &Outcome) -> String {
    let mut s = format!("# {}\n\n{}\n\n", cfg.kind, cfg.kind.statement());
    let _ = writeln!(s, "Model: N = {}, p = {}; seed {}.\n", cfg.model.n(), cfg.model.p(), cfg.seed);
    s.push_str("| check | result | value | tolerance | detail |\n|---|---|---|---|---|\n");
    for c in &outcome.checks {
        let _ = writeln!(
            s,
            "| {} | {} | {:.6e} | {:.3e} | {} |",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.value,
            c.tolerance,
            c.detail
        );
    }
    let _ = writeln!(s, "\nOverall: {}", if outcome.passed() { "pass" } else { "FAIL" });
    s
}

/// `kind`, the statement it checks and its default configuration.
pub fn list_experiments(model: ModelParams) -> Result<String> {
    let mut s = String::new();
    for kind in Kind::ALL {
        let _ = writeln!(s, "{kind}\n  checks: {}\n  acceptance criteria: {:?}", kind.statement(), kind.criteria());
    }
    s.push('\n');
    for kind in Kind::ALL {
        let _ = writeln!(s, "## {kind} (default configuration)\n{}", ExperimentConfig::default_for(kind, model).to_toml()?);
    }
    Ok(s)
}

fn csv_rows(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        let cols: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

fn ode_check(cfg: &ExperimentConfig, x: &OdeCheck) -> Result<Outcome> {
    let m = cfg.model;
    let grid = physical_grid(&m, cfg.solver.domain, cfg.solver.cells)?;
    let u0 = crate::profiles::ode_solution(&m, x.t_blowup, 0.0)?;
    let ut0 = m.scaling() * u0 / x.t_blowup;
    let data = FieldSnapshot::from_fn(m, grid, 0.0, |_| (u0, ut0))?;
    let build = build_surface(&data, &cfg.solver, &[0.0])?;
    let mut checks = Vec::new();
    let estimate = build.surface.samples().first().map(|s| (s.t, s.sigma));
    match estimate {
        Some((t, sigma)) => checks.push(Check::at_most(
            "blowup_time",
            (t - x.t_blowup).abs() / x.t_blowup,
            x.tolerance,
            format!("T = {t} ± {sigma}, relative error"),
        )),
        None => checks.push(Check::flag("blowup_time", false, format!("{:?}", build.failures))),
    }
    let mut artifacts = Artifacts::default();
    artifacts.add_csv("trace.csv", |b| build.trace.write_csv(b))?;
    artifacts.add_csv("surface.csv", |b| build.surface.write_csv(b))?;
    let report = serde_json::json!({ "estimate": estimate, "failures": build.failures, "steps": build.steps });
    Ok(Outcome { checks, artifacts, report })
}

fn sup_distance_order(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn soliton_check(cfg: &ExperimentConfig, x: &SolitonCheck) -> Result<Outcome> {
    let m = cfg.model;
    let lorentz = LorentzData { e: x.e, d: x.d, x_star: x.x_star, t_star: x.t_star };
    let solver = SolverConfig { boundary: Boundary::Exact(lorentz), ..cfg.solver.clone() };
    let grid = physical_grid(&m, solver.domain, solver.cells)?;
    let data = lorentz_snapshot(&m, &lorentz, grid, 0.0)?;
    let build = build_surface(&data, &solver, &x.probes)?;
    let mut checks = Vec::new();
    let mut artifacts = Artifacts::default();
    let exact = |p: f64| x.t_star + x.d * (p - x.x_star);
    let err = build.surface.samples().iter().map(|s| (s.t - exact(s.x)).abs()).fold(0.0, f64::max);
    let complete = build.surface.samples().len() == build.probes.len();
    checks.push(Check::flag("planar_all_probes", complete, format!("{} of {} probes fitted", build.surface.samples().len(), build.probes.len())));
    checks.push(Check::at_most("planar_surface", err, x.tolerance, "max |T(x) - T* - d(x - x*)| over probes"));
    let lip = lipschitz_report(&build.surface, 3.0).ok();
    let ratio = lip.as_ref().map_or(f64::NAN, |l| l.max_ratio);
    checks.push(Check::at_most("lipschitz_ratio", (ratio - x.d.abs()).abs(), x.lipschitz_tolerance, format!("max pair ratio {ratio} vs |d*|")));
    checks.push(Check::flag("lipschitz_bound", lip.as_ref().is_some_and(|l| l.passed), "every pair ratio ≤ 1 within uncertainty"));
    artifacts.add_csv("surface.csv", |b| build.surface.write_csv(b))?;
    artifacts.add_csv("trace.csv", |b| build.trace.write_csv(b))?;

    let mut stationary_report = Vec::new();
    if !x.stationary.is_empty() {
        let jobs: Vec<(f64, usize)> = x.stationary.iter().flat_map(|&d| x.stationary_cells.iter().map(move |&c| (d, c))).collect();
        let drifts: Vec<Result<f64>> = jobs
            .par_iter()
            .map(|&(d, cells)| {
                let g = YGrid::unit_ball(&m, cells)?;
                let prof = ProfileParams::soliton(x.e, vec![d])?;
                let f = SelfSimFrame::from_profile(g, 0.0, &prof)?;
                let scfg = SolverConfig { output_interval: x.stationary_span / 10.0, ..SolverConfig::selfsim() };
                let ev = evolve(&f, x.stationary_span, &scfg)?;
                Ok(ev.frames.iter().map(|fr| fr.sup_distance(&f)).fold(0.0, f64::max))
            })
            .collect();
        let drifts = drifts.into_iter().collect::<Result<Vec<f64>>>()?;
        let per = x.stationary_cells.len();
        for (i, &d) in x.stationary.iter().enumerate() {
            let ds = &drifts[i * per..(i + 1) * per];
            let finest = *ds.last().unwrap_or(&f64::INFINITY);
            checks.push(Check::at_most(format!("stationary_d{d}"), finest, x.stationary_tolerance, format!("sup drift over Δs = {} at {:?} cells: {ds:?}", x.stationary_span, x.stationary_cells)));
            checks.push(Check::flag(
                format!("stationary_d{d}_refines"),
                ds.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0),
                "drift decreases under refinement (or is exactly zero)",
            ));
            stationary_report.push(serde_json::json!({ "d": d, "cells": x.stationary_cells, "drift": ds }));
        }
        artifacts.add(
            "stationary.csv",
            csv_rows(
                "d,cells,drift",
                jobs.iter().zip(&drifts).map(|(&(d, c), &e)| vec![d, c as f64, e]),
            ),
        );
    }
    let mut kappa_star_report = serde_json::Value::Null;
    if let Some(k) = &x.kappa_star {
        let errors: Vec<Result<f64>> = k
            .cells
            .par_iter()
            .map(|&cells| {
                let g = YGrid::unit_ball(&m, cells)?;
                let f = SelfSimFrame::from_fn(g.clone(), 0.0, |y| kappa_star_scalar(&m, k.d, k.mu, y))?;
                let scfg = SolverConfig { output_interval: k.span / 4.0, ..SolverConfig::selfsim() };
                let ev = evolve(&f, k.span, &scfg)?;
                let mut worst: f64 = 0.0;
                for fr in &ev.frames {
                    let ex = SelfSimFrame::from_fn(g.clone(), fr.s(), |y| kappa_star_scalar(&m, k.d, k.mu * fr.s().exp(), y))?;
                    worst = worst.max(fr.sup_distance(&ex));
                }
                Ok(worst)
            })
            .collect();
        let errors = errors.into_iter().collect::<Result<Vec<f64>>>()?;
        let orders = sup_distance_order(&errors);
        let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("kappa_star_order", min_order, k.min_order, format!("sup errors {errors:?} at {:?} cells", k.cells)));
        artifacts.add("kappa_star.csv", csv_rows("cells,error", k.cells.iter().zip(&errors).map(|(&c, &e)| vec![c as f64, e])));
        kappa_star_report = serde_json::json!({ "cells": k.cells, "errors": errors, "orders": orders });
    }
    let report = serde_json::json!({
        "planar_error": err,
        "lipschitz": lip,
        "failures": build.failures,
        "stationary": stationary_report,
        "kappa_star": kappa_star_report,
    });
    Ok(Outcome { checks, artifacts, report })
}

/// Pipeline result at one resolution of the surface-build experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SurfaceLevel {
    pub cells: usize,
    pub minimum: Option<(f64, f64)>,
    pub strict: bool,
    pub fitted: Option<ProfileParams>,
    pub fit_error: Option<String>,
    pub gradient: Option<crate::surface::GradientReport>,
    pub gradient_error: Option<String>,
    #[serde(skip)]
    pub build: Option<SurfaceBuild>,
}

fn surface_level(cfg: &ExperimentConfig, x: &SurfaceBuildSpec, cells: usize, probes: &[f64]) -> Result<SurfaceLevel> {
    let m = cfg.model;
    let solver = SolverConfig { cells, ..cfg.solver.clone() };
    let grid = physical_grid(&m, solver.domain, cells)?;
    let data = FieldSnapshot::from_fn(m, grid, 0.0, |p| (x.datum.eval(p), 0.0))?;
    let build = build_surface(&data, &solver, probes)?;
    let samples = build.surface.samples();
    let mut level = SurfaceLevel { cells, minimum: None, strict: false, fitted: None, fit_error: None, gradient: None, gradient_error: None, build: None };
    let Some(k) = (0..samples.len()).min_by(|&a, &b| samples[a].t.total_cmp(&samples[b].t)) else {
        level.build = Some(build);
        return Ok(level);
    };
    let (x0, t0) = (samples[k].x, samples[k].t);
    level.minimum = Some((x0, t0));
    let minima = local_min_report(&build.surface, &[]).map(|r| r.minima).unwrap_or_default();
    level.strict = minima.iter().any(|mn| mn.x == x0);
    let fit_grid = YGrid::unit_ball(&m, x.fit_cells)?;
    let snap = build.probes.iter().position(|&p| p == x0).and_then(|i| build.snapshots[i].as_ref());
    match snap.map(|s| fit_at(s, x0, t0, &fit_grid)) {
        Some(Ok((f, _))) => level.fitted = Some(f),
        Some(Err(e)) => level.fit_error = Some(e.to_string()),
        None => level.fit_error = Some("no snapshot at the minimum".into()),
    }
    if let Some(f) = &level.fitted {
        match gradient_vs_d(&build.surface, x0, f.d()[0], x.stencil_radius, x.min_side) {
            Ok(g) => level.gradient = Some(g),
            Err(e) => level.gradient_error = Some(e.to_string()),
        }
    }
    level.build = Some(build);
    Ok(level)
}

fn surface_build(cfg: &ExperimentConfig, x: &SurfaceBuildSpec) -> Result<Outcome> {
    if cfg.model.is_radial() {
        return Err(Error::InvalidConfig("surface-build runs one-dimensional data".into()));
    }
    if !(x.probe_step > 0.0 && x.probe_to > x.probe_from) {
        return Err(Error::InvalidConfig("probe range must be increasing with a positive step".into()));
    }
    let count = ((x.probe_to - x.probe_from) / x.probe_step).round() as i64;
    let probes: Vec<f64> = (0..=count).map(|k| x.probe_from + k as f64 * x.probe_step).collect();
    let levels: Vec<Result<SurfaceLevel>> = x.cells.par_iter().map(|&c| surface_level(cfg, x, c, &probes)).collect();
    let levels = levels.into_iter().collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut artifacts = Artifacts::default();
    let mut gaps = Vec::new();
    for lv in &levels {
        let c = lv.cells;
        let at = lv.minimum.map_or("none".to_string(), |(x0, t0)| format!("x0 = {x0}, T = {t0}"));
        checks.push(Check::flag(format!("strict_minimum_{c}"), lv.strict, at));
        match (&lv.gradient, &lv.fitted) {
            (Some(g), Some(f)) => {
                gaps.push(g.gap);
                checks.push(Check::at_most(
                    format!("gradient_gap_{c}"),
                    g.gap,
                    x.gap_tolerance,
                    format!("∇T(x0) = {}, fitted d = {}", g.slope_limit, f.d()[0]),
                ));
            }
            _ => {
                let why = lv.fit_error.clone().or(lv.gradient_error.clone()).unwrap_or_default();
                checks.push(Check::flag(format!("gradient_gap_{c}"), false, why));
            }
        }
        if let Some(b) = &lv.build {
            artifacts.add_csv(format!("surface_{c}.csv"), |buf| b.surface.write_csv(buf))?;
            artifacts.add_csv(format!("trace_{c}.csv"), |buf| b.trace.write_csv(buf))?;
        }
    }
    if x.gap_decreasing && levels.len() >= 2 {
        checks.push(Check::flag(
            "gap_decreasing",
            gaps.len() == levels.len() && gaps.windows(2).all(|w| w[1] < w[0]),
            format!("gaps {gaps:?}"),
        ));
    }
    if let Some(expected) = x.expect_minimum {
        for lv in &levels {
            let c = lv.cells;
            let off = lv.minimum.map_or(f64::INFINITY, |(x0, _)| (x0 - expected).abs());
            checks.push(Check::at_most(format!("minimum_location_{c}"), off, 0.5 * x.probe_step, format!("minimum at {:?}", lv.minimum)));
            let d = lv.fitted.as_ref().map_or(f64::INFINITY, |f| f.d()[0].abs());
            checks.push(Check::at_most(format!("fitted_d_at_minimum_{c}"), d, x.d_tolerance, "|d(x0)| from the modulation fit"));
        }
    }
    let report = serde_json::json!({ "probes": probes.len(), "levels": levels });
    Ok(Outcome { checks, artifacts, report })
}

fn modulation_decay(cfg: &ExperimentConfig, x: &ModulationDecaySpec) -> Result<Outcome> {
    let m = cfg.model;
    let grid = YGrid::unit_ball(&m, x.cells)?;
    let prof = ProfileParams::soliton(x.e, vec![x.d_bar])?;
    let base = SelfSimFrame::from_profile(grid.clone(), 0.0, &prof)?;
    let bump = Bump::new(x.bump_center, x.bump_width, 1.0)?.with_h_norm(&grid, x.eps)?;
    let data = base.axpy(1.0, &bump.frame(&grid, 0.0)?)?;
    let eps_bar = trapping_precondition(&data, x.e, &[x.d_bar], x.eps0)?;
    let runs: Vec<Result<ModulationTrace>> = [&data, &base]
        .par_iter()
        .map(|f| ModulationTrace::from_frames(&evolve(f, x.span, &cfg.solver)?.frames))
        .collect();
    let mut runs = runs.into_iter();
    let (trace, reference) = match (runs.next(), runs.next()) {
        (Some(a), Some(b)) => (a?, b?),
        _ => unreachable!("two runs"),
    };
    let floor = reference.samples().iter().map(|p| p.qnorm).fold(0.0, f64::max);
    let (lo, hi) = bump.support();
    let skip = transport_time(lo.abs().max(hi.abs()));
    let r = trapping_check(&trace, eps_bar, &[x.d_bar], skip, floor, x.min_r2)?;
    let (mu, r2) = r.decay.map_or((f64::NAN, f64::NAN), |d| (d.mu, d.r2));
    let checks = vec![
        Check::above("decay_rate", mu, 0.0, format!("fitted mu on window {:?}", r.window)),
        Check::above("decay_fit_r2", r2, x.min_r2, "r² of the log-linear fit"),
        Check::at_most("velocity_drift", r.k_param * eps_bar, r.k_decay * eps_bar, format!("param_distance(d̄, d_final), d_final = {:?}", r.d_final)),
        Check::flag("trapping", r.passed, r.notes.join("; ")),
    ];
    let mut artifacts = Artifacts::default();
    artifacts.add_csv("modulation.csv", |b| trace.write_csv(b))?;
    artifacts.add_csv("modulation_reference.csv", |b| reference.write_csv(b))?;
    let report = serde_json::json!({ "epsilon_bar": eps_bar, "floor": floor, "skip": skip, "trapping": r });
    Ok(Outcome { checks, artifacts, report })
}

fn rigidity(cfg: &ExperimentConfig, x: &RigiditySpec) -> Result<Outcome> {
    let setup = RigiditySetup {
        intervals: x.intervals.clone(),
        span: x.span,
        cfl: cfg.solver.cfl,
        output_interval: cfg.solver.output_interval,
        u_max: cfg.solver.u_max,
        tolerance: x.tolerance,
    };
    let mut extensions: Vec<Extension> = (0..x.seeds as u64).map(|k| Extension::Seeded(cfg.seed + k)).collect();
    if let Some(b) = x.intruding {
        extensions.push(Extension::Bump(b));
    }
    let reports: Vec<Result<_>> = extensions
        .par_iter()
        .map(|&ext| rigidity_experiment(&cfg.model, x.d_star, x.a_star, ext, &setup))
        .collect();
    let reports = reports.into_iter().collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut artifacts = Artifacts::default();
    for (ext, r) in extensions.iter().zip(&reports) {
        let label = match ext {
            Extension::Seeded(s) => format!("seed_{s}"),
            Extension::Bump(_) => "intruding".to_string(),
        };
        let finest = r.runs.last().map_or(f64::INFINITY, |run| run.max_deviation);
        let devs: Vec<f64> = r.runs.iter().map(|run| run.max_deviation).collect();
        match ext {
            Extension::Seeded(_) => {
                checks.push(Check::at_most(format!("{label}_deviation"), finest, x.tolerance, format!("sup deviation on |y| < 1 at {:?} intervals: {devs:?}", x.intervals)));
                checks.push(Check::flag(format!("{label}_refines"), r.refinement_nonincreasing, "deviation nonincreasing under refinement"));
            }
            Extension::Bump(_) => checks.push(Check::flag(
                "intrusion_flagged",
                !r.hypothesis_holds && finest > x.tolerance,
                format!("hypothesis flagged: {}, deviation {finest}", !r.hypothesis_holds),
            )),
        }
        let rows = r.runs.iter().flat_map(|run| run.deviation.iter().map(move |&(s, d)| vec![run.intervals as f64, s, d]));
        artifacts.add(format!("deviation_{label}.csv"), csv_rows("intervals,s,deviation", rows));
    }
    let report = serde_json::to_value(&reports)?;
    Ok(Outcome { checks, artifacts, report })
}

fn stability(cfg: &ExperimentConfig, x: &StabilitySpec) -> Result<Outcome> {
    let m = cfg.model;
    let solver = SolverConfig { boundary: Boundary::Exact(x.soliton), ..cfg.solver.clone() };
    let grid = physical_grid(&m, solver.domain, solver.cells)?;
    let base = lorentz_snapshot(&m, &x.soliton, grid, 0.0)?;
    let reference = build_surface(&base, &solver, &x.probes)?;
    let l = x.soliton;
    let scheme_error = reference
        .surface
        .samples()
        .iter()
        .map(|s| (s.t - l.t_star - l.d * (s.x - l.x_star)).abs())
        .fold(0.0, f64::max);
    let setup = StabilitySetup {
        bump: x.bump,
        delta0: x.delta0,
        fit_cells: x.fit_cells,
        center: 0.0,
        sigma_factor: x.sigma_factor,
        scheme_error,
    };
    let mut eps = vec![0.0];
    eps.extend(x.eps.iter().copied().filter(|&e| e != 0.0));
    let r = stability_experiment(&base, &solver, &eps, &x.probes, &setup)?;
    let mut checks = vec![Check::flag(
        "continuity",
        r.continuity,
        format!(
            "|T_ε(0) - T_0(0)| for ε = {:?}: {:?}; floor {}",
            r.results.iter().map(|e| e.eps).collect::<Vec<_>>(),
            r.results.iter().map(|e| e.gap_center).collect::<Vec<_>>(),
            r.floor
        ),
    )];
    for e in &r.results {
        let failing: Vec<f64> = e.probes.iter().filter(|p| !p.cone || p.fit.is_none()).map(|p| p.x).collect();
        checks.push(Check::flag(
            format!("eps_{}", e.eps),
            e.passed,
            format!("missing probes {:?}, cone or fit failures at {failing:?}", e.missing),
        ));
    }
    let mut artifacts = Artifacts::default();
    artifacts.add(
        "stability.csv",
        csv_rows("eps,gap_center,gap_max", r.results.iter().map(|e| vec![e.eps, e.gap_center, e.gap_max])),
    );
    let report = serde_json::json!({ "scheme_error": scheme_error, "stability": r });
    Ok(Outcome { checks, artifacts, report })
}

/// `E(λκ₀, 0) = κ₀² m (λ²/2 - λ^{p+1}/(p+1)) ∫ρ`, `m = 2(p+1)/(p-1)²`, with
/// `∫ρ = |S^{N-1}| B(N/2, α+1) / 2`.
pub fn constant_energy(params: &ModelParams, lambda: f64) -> f64 {
    let n = params.n() as f64;
    let measure = crate::quadrature::sphere_area(params.n()) * 0.5 * statrs::function::beta::beta(0.5 * n, params.alpha() + 1.0);
    let k0 = params.kappa0();
    let p1 = params.p() + 1.0;
    k0 * k0 * params.mass() * (0.5 * lambda * lambda - lambda.abs().powf(p1) / p1) * measure
}

fn energy_trace(cfg: &ExperimentConfig, x: &EnergyTraceSpec) -> Result<Outcome> {
    let m = cfg.model;
    let grid = YGrid::unit_ball(&m, x.cells)?;
    let k0 = m.kappa0();
    let constant = |lambda: f64| SelfSimFrame::from_fn(grid.clone(), 0.0, |_| (lambda * k0, 0.0));
    let mut checks = Vec::new();
    let e1 = lyapunov(&constant(1.0)?);
    checks.push(Check::at_most("energy_kappa0", (e1 - constant_energy(&m, 1.0)).abs(), x.energy_tolerance, format!("E(κ₀, 0) = {e1}")));
    let big = constant(x.lambda)?;
    let el = lyapunov(&big);
    checks.push(Check::at_most(
        "energy_lambda",
        (el - constant_energy(&m, x.lambda)).abs(),
        x.energy_tolerance,
        format!("E({}κ₀, 0) = {el}", x.lambda),
    ));
    let ev = evolve(&big, x.divergence_horizon, &cfg.solver)?;
    let diverged_at = match ev.outcome {
        crate::selfsim::EvolveOutcome::Diverged { s, .. } => Some(s),
        crate::selfsim::EvolveOutcome::Completed => None,
    };
    checks.push(Check::flag(
        "criterion_divergence",
        blowup_criterion(&big) && diverged_at.is_some(),
        format!("E < 0: {}, diverged at s = {diverged_at:?}", blowup_criterion(&big)),
    ));
    let prof = ProfileParams::soliton(x.e, vec![x.d])?;
    let scheme_error = energy_scheme_error(&grid, &prof, 0.0, x.span, &cfg.solver)?;
    let tol = 10.0 * scheme_error;
    let base = SelfSimFrame::from_profile(grid.clone(), 0.0, &prof)?;
    let runs: Vec<Result<_>> = (0..x.runs as u64)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.seed + k;
            let bump = Bump::seeded(seed, (-0.6, 0.6), (0.15, 0.4)).with_h_norm(&grid, x.eps)?;
            let f = base.axpy(1.0, &bump.frame(&grid, 0.0)?)?;
            let (_, trace) = evolve_monitored(&f, x.span, &cfg.solver, f64::INFINITY)?;
            Ok((seed, trace))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut artifacts = Artifacts::default();
    let mut rows = Vec::new();
    for (seed, trace) in &runs {
        let rep = check_monotone(trace, tol);
        checks.push(Check::at_most(
            format!("monotone_seed_{seed}"),
            trace.max_increase(),
            tol,
            format!("largest E increase; tolerance 10 × scheme error {scheme_error:.3e}"),
        ));
        debug_assert_eq!(rep.passed, trace.max_increase() <= tol);
        rows.extend(trace.samples().iter().map(|&(s, e)| vec![*seed as f64, s, e]));
    }
    artifacts.add("energy.csv", csv_rows("seed,s,E", rows));
    let report = serde_json::json!({
        "energy_kappa0": e1,
        "energy_lambda": el,
        "diverged_at": diverged_at,
        "scheme_error": scheme_error,
        "tolerance": tol,
        "max_increase": runs.iter().map(|(_, t)| t.max_increase()).collect::<Vec<_>>(),
    });
    Ok(Outcome { checks, artifacts, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m13() -> ModelParams {
        ModelParams::new(1, 3.0).unwrap()
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        for kind in Kind::ALL {
            let cfg = ExperimentConfig::default_for(kind, m13());
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn unknown_keys_and_bad_models_are_rejected() {
        let ok = "kind = \"ode-check\"\n[model]\nn = 1\np = 3.0\n";
        assert!(ExperimentConfig::from_toml_str(ok).is_ok());
        assert!(ExperimentConfig::from_toml_str(&format!("{ok}[solver]\ncelss = 10\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{ok}[experiment]\nt_blowup = 1.0\ntolerence = 1.0\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("{ok}extra = 1\n")).is_err());
        assert!(ExperimentConfig::from_toml_str(&format!("extra = 1\n{ok}")).is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"ode-check\"\n[model]\nn = 3\np = 3.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("kind = \"nope\"\n[model]\nn = 1\np = 3.0\n").is_err());
    }

    #[test]
    fn solver_overrides_keep_kind_defaults() {
        let cfg = ExperimentConfig::from_toml_str("kind = \"ode-check\"\n[model]\nn = 1\np = 3.0\n[solver]\ncells = 400\n").unwrap();
        assert_eq!(cfg.solver.cells, 400);
        assert_eq!(cfg.solver.mask_cells, 0.0);
    }

    #[test]
    fn constant_energy_closed_form() {
        let m = m13();
        assert!((constant_energy(&m, 1.0) - 4.0 / 3.0).abs() < 1e-14);
        assert!((constant_energy(&m, 1.5) + 0.75).abs() < 1e-14);
        let g = YGrid::unit_ball(&ModelParams::new(3, 2.0).unwrap(), 200).unwrap();
        let f = SelfSimFrame::from_fn(g.clone(), 0.0, |_| (6.0, 0.0)).unwrap();
        assert!((lyapunov(&f) - constant_energy(g.params(), 1.0)).abs() < 1e-9 * constant_energy(g.params(), 1.0));
    }

    #[test]
    fn listing_names_every_kind() {
        let text = list_experiments(m13()).unwrap();
        for kind in Kind::ALL {
            assert!(text.contains(kind.name()));
        }
        assert!(text.contains("rigidity"));
    }

    #[test]
    fn check_constructors() {
        assert!(Check::at_most("a", 1.0, 1.0, "").passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0, "").passed);
        assert!(!Check::at_least("a", f64::NAN, 1.0, "").passed);
        assert_eq!(Check::flag("a", true, "").value, 1.0);
    }
}
