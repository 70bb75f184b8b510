//! Reproducible experiment runner.
//!
//! An experiment is an [`ExperimentSpec`]: an id, optional output name, and a
//! parameter table overriding the id's defaults. Running it yields a
//! [`Report`] with one CSV table and a list of named [`Check`]s; reports are
//! written as `<name>.csv` plus `<name>.toml` metadata.

mod continuum;
mod single;
mod suspension;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::OrientationFamily;
use crate::error::{Error, Result};
use crate::io::Csv;
use crate::kernels::Vec3;
use crate::suspension::{check_admissibility, SamplingMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    IdentityChecks,
    DipoleRemainder,
    UappConvergence,
    BoundaryErrorScaling,
    EnergySigns,
    FpStationary,
    SeparationDiagnostics,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::IdentityChecks,
        ExperimentId::DipoleRemainder,
        ExperimentId::UappConvergence,
        ExperimentId::BoundaryErrorScaling,
        ExperimentId::EnergySigns,
        ExperimentId::FpStationary,
        ExperimentId::SeparationDiagnostics,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::IdentityChecks => "identity_checks",
            ExperimentId::DipoleRemainder => "dipole_remainder",
            ExperimentId::UappConvergence => "uapp_convergence",
            ExperimentId::BoundaryErrorScaling => "boundary_error_scaling",
            ExperimentId::EnergySigns => "energy_signs",
            ExperimentId::FpStationary => "fp_stationary",
            ExperimentId::SeparationDiagnostics => "separation_diagnostics",
        }
    }

    /// Default parameter block.
    pub fn defaults(&self) -> Params {
        let base = Params::default();
        match self {
            ExperimentId::IdentityChecks => Params { betas: vec![1.5, 2.0, 4.0, 1.0001], radii: vec![0.5, 1.0], points: 1000, ..base },
            ExperimentId::DipoleRemainder => Params { radii: vec![0.005, 0.01, 0.02, 0.04], ns: vec![1000], ..base },
            ExperimentId::UappConvergence => Params {
                lambdas: vec![0.01],
                ns: vec![125, 1000, 8000],
                densities: vec![OrientationFamily::Uniform, OrientationFamily::DiracAligned { p0: Vec3::z() }],
                seeds: (0..10).collect(),
                points: 4,
                ..base
            },
            ExperimentId::BoundaryErrorScaling => Params {
                betas: vec![1.2],
                lambdas: vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1],
                ns: vec![4096],
                seeds: (0..5).collect(),
                ..base
            },
            ExperimentId::EnergySigns => Params { betas: vec![1.5], lambdas: vec![0.05], grid: 4, ..base },
            ExperimentId::FpStationary => Params { peclets: vec![0.01, 0.1, 1.0, 3.0], l_max: 12, ..base },
            ExperimentId::SeparationDiagnostics => Params { ns: vec![1000, 10_000], seeds: vec![0, 1, 2], ..base },
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Resolved parameter block. Fields an experiment does not read are carried
/// through unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub alpha: f64,
    pub mu: f64,
    pub betas: Vec<f64>,
    pub radii: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub sep_c: f64,
    pub mode: SamplingMode,
    /// Volume grid per axis, or box cells for energy integrals.
    pub grid: usize,
    /// Sample count: random points, or interior grid points per axis.
    pub points: usize,
    pub etas: Vec<f64>,
    /// `ξ|S|/D_r` values.
    pub peclets: Vec<f64>,
    pub l_max: usize,
    /// Per-check tolerance overrides, before scaling.
    pub tolerances: BTreeMap<String, f64>,
    pub densities: Vec<OrientationFamily>,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            mu: 1.0,
            betas: vec![2.0],
            radii: vec![],
            lambdas: vec![],
            ns: vec![],
            seeds: vec![0],
            sep_c: 0.8,
            mode: SamplingMode::Strict,
            grid: 48,
            points: 64,
            etas: vec![0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.6],
            peclets: vec![],
            l_max: 12,
            tolerances: BTreeMap::new(),
            densities: vec![OrientationFamily::Uniform],
        }
    }
}

impl Params {
    /// Force-offset admissibility for every `(β, λ)` pair, and `β > 1`.
    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.betas.iter().find(|b| !(**b > 1.0)) {
            return Err(Error::InvalidParameter(format!("beta must exceed 1, got {b}")));
        }
        if !(self.mu > 0.0) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {}", self.mu)));
        }
        if self.mode == SamplingMode::Strict {
            for &beta in &self.betas {
                for &lambda in &self.lambdas {
                    check_admissibility(beta, self.sep_c, lambda)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Output file stem, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Overrides of [`ExperimentId::defaults`].
    #[serde(default)]
    pub params: toml::Table,
}

impl ExperimentSpec {
    pub fn new(id: ExperimentId) -> Self {
        Self { id, name: None, output: None, params: toml::Table::new() }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<toml::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn resolve(&self) -> Result<Params> {
        let mut table = toml::Table::try_from(self.id.defaults()).map_err(|e| Error::Parse(e.to_string()))?;
        for (k, v) in &self.params {
            if !table.contains_key(k) {
                return Err(Error::Parse(format!("unknown parameter {k:?} for {}", self.id)));
            }
            table.insert(k.clone(), v.clone());
        }
        Ok(table.try_into()?)
    }

    pub fn stem(&self) -> String {
        self.output.clone().or_else(|| self.name.clone()).unwrap_or_else(|| self.id.to_string())
    }
}

/// A list of experiments, `[[experiment]]` in TOML.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub experiment: Vec<ExperimentSpec>,
}

impl Manifest {
    /// Accepts either a manifest or a single experiment table.
    pub fn parse(text: &str) -> Result<Self> {
        match toml::from_str::<Manifest>(text) {
            Ok(m) if !m.experiment.is_empty() || !text.contains("id") => Ok(m),
            _ => Ok(Manifest { experiment: vec![toml::from_str::<ExperimentSpec>(text)?] }),
        }
    }

    /// Every experiment family with its defaults, resolved so that all
    /// parameters are visible.
    pub fn default_manifest() -> Self {
        let experiment = ExperimentId::ALL
            .iter()
            .map(|id| {
                let params = toml::Table::try_from(id.defaults()).expect("defaults serialize");
                ExperimentSpec { params, ..ExperimentSpec::new(*id) }
            })
            .collect();
        Manifest { experiment }
    }

    /// Every experiment family at reduced sizes, for smoke runs.
    pub fn quick() -> Self {
        use toml::Value;
        let list = |v: &[f64]| Value::Array(v.iter().map(|x| Value::Float(*x)).collect());
        let ints = |v: &[i64]| Value::Array(v.iter().map(|x| Value::Integer(*x)).collect());
        let experiment = vec![
            ExperimentSpec::new(ExperimentId::IdentityChecks).with_param("betas", list(&[1.5, 2.0])).with_param("radii", list(&[0.5])).with_param("points", 50),
            ExperimentSpec::new(ExperimentId::DipoleRemainder),
            ExperimentSpec::new(ExperimentId::UappConvergence)
                .with_param("ns", ints(&[64, 512]))
                .with_param("seeds", ints(&[0, 1, 2]))
                .with_param("grid", 24)
                .with_param("points", 2)
                .with_param("tolerances", toml::Table::from_iter([("far_field".to_string(), Value::Float(0.25))])),
            ExperimentSpec::new(ExperimentId::BoundaryErrorScaling).with_param("ns", ints(&[512])).with_param("lambdas", list(&[1e-3, 1e-2, 3e-2])).with_param("seeds", ints(&[0, 1])),
            ExperimentSpec::new(ExperimentId::EnergySigns).with_param("grid", 2),
            ExperimentSpec::new(ExperimentId::FpStationary).with_param("peclets", list(&[0.01, 1.0])).with_param("l_max", 8),
            ExperimentSpec::new(ExperimentId::SeparationDiagnostics).with_param("ns", ints(&[500, 2000])).with_param("seeds", ints(&[0, 1])),
        ];
        Manifest { experiment }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub target: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `|measured − target| ≤ tolerance`.
    pub fn near(name: impl Into<String>, measured: f64, target: f64, tolerance: f64) -> Self {
        let passed = (measured - target).abs() <= tolerance;
        Self { name: name.into(), measured, target, tolerance, passed }
    }

    /// `measured ≤ tolerance`.
    pub fn below(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, target: 0.0, tolerance, passed: measured <= tolerance }
    }

    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), measured: if ok { 1.0 } else { 0.0 }, target: 1.0, tolerance: 0.0, passed: ok }
    }
}

/// Per-check tolerances: defaults, overridden by the parameter block, times
/// the global scale.
#[derive(Clone, Debug)]
pub struct Tolerances<'a> {
    overrides: &'a BTreeMap<String, f64>,
    scale: f64,
}

impl Tolerances<'_> {
    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.overrides.get(name).copied().unwrap_or(default) * self.scale
    }
}

/// What a single experiment body produces.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub csv: Csv,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Replaces the seed list by `seed, seed + 1, …` of the same length.
    pub seed: Option<u64>,
    pub tolerance_scale: f64,
    pub out_dir: Option<PathBuf>,
    /// Run independent experiments concurrently.
    pub concurrent: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: None, tolerance_scale: 1.0, out_dir: None, concurrent: false }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub id: ExperimentId,
    pub stem: String,
    pub params: Params,
    pub input_hash: String,
    pub tolerance_scale: f64,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub csv: Csv,
    pub elapsed_seconds: f64,
}

#[derive(Serialize)]
struct Metadata<'a> {
    experiment: &'a str,
    name: &'a str,
    passed: bool,
    version: &'a str,
    input_hash: &'a str,
    csv: String,
    elapsed_seconds: f64,
    tolerance_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    notes: &'a [String],
    params: &'a Params,
    checks: &'a [Check],
}

impl Report {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metadata_toml(&self) -> Result<String> {
        let meta = Metadata {
            experiment: self.id.as_str(),
            name: &self.stem,
            passed: self.passed(),
            version: env!("CARGO_PKG_VERSION"),
            input_hash: &self.input_hash,
            csv: format!("{}.csv", self.stem),
            elapsed_seconds: self.elapsed_seconds,
            tolerance_scale: self.tolerance_scale,
            error: self.error.as_deref(),
            notes: &self.notes,
            params: &self.params,
            checks: &self.checks,
        };
        Ok(toml::to_string(&meta)?)
    }

    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{}.csv", self.stem));
        let meta = dir.join(format!("{}.toml", self.stem));
        self.csv.write(&csv)?;
        std::fs::write(&meta, self.metadata_toml()?)?;
        Ok((csv, meta))
    }
}

/// `sha256` of `"blob <len>\0<content>"`, in the manner of git object ids.
pub fn content_hash(content: &str) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run(spec: &ExperimentSpec, opts: &RunOptions) -> Report {
    let start = Instant::now();
    let mut report = Report {
        id: spec.id,
        stem: spec.stem(),
        params: spec.id.defaults(),
        input_hash: String::new(),
        tolerance_scale: opts.tolerance_scale,
        checks: Vec::new(),
        notes: Vec::new(),
        error: None,
        csv: Csv::default(),
        elapsed_seconds: 0.0,
    };
    let params = match spec.resolve() {
        Ok(mut p) => {
            if let Some(s) = opts.seed {
                p.seeds = (0..p.seeds.len() as u64).map(|k| s + k).collect();
            }
            p
        }
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.params = params.clone();
    let hashed = format!("id = {:?}\ntolerance_scale = {}\n{}", spec.id.as_str(), opts.tolerance_scale, toml::to_string(&params).unwrap_or_default());
    report.input_hash = content_hash(&hashed);
    if let Err(e) = params.validate() {
        report.error = Some(e.to_string());
        return report;
    }
    let tol = Tolerances { overrides: &params.tolerances, scale: opts.tolerance_scale };
    let result = match spec.id {
        ExperimentId::IdentityChecks => single::identity_checks(&params, &tol),
        ExperimentId::DipoleRemainder => single::dipole_remainder(&params, &tol),
        ExperimentId::UappConvergence => suspension::uapp_convergence(&params, &tol),
        ExperimentId::BoundaryErrorScaling => suspension::boundary_error_scaling(&params, &tol),
        ExperimentId::SeparationDiagnostics => suspension::separation_diagnostics(&params, &tol),
        ExperimentId::EnergySigns => continuum::energy_signs(&params, &tol),
        ExperimentId::FpStationary => continuum::fp_stationary(&params, &tol),
    };
    match result {
        Ok(out) => {
            report.checks = out.checks;
            report.csv = out.csv;
            report.notes = out.notes;
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    let hash = report.input_hash.clone();
    report.csv.comments.insert(0, format!("{} input {hash}", spec.id));
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    report
}

#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub reports: Vec<Report>,
    /// First failed experiment and why.
    pub first_failure: Option<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(Report::passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    /// One line per check and per error.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.reports {
            if let Some(e) = &r.error {
                out.push(format!("FAIL {} error: {e}", r.stem));
            }
            for c in &r.checks {
                out.push(format!(
                    "{} {}::{} measured {:.6e} target {:.6e} tol {:.3e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    r.stem,
                    c.name,
                    c.measured,
                    c.target,
                    c.tolerance
                ));
            }
        }
        out
    }
}

/// Runs every spec, continuing past failures, and writes each report when an
/// output directory is set.
pub fn run_all(specs: &[ExperimentSpec], opts: &RunOptions) -> Result<Summary> {
    let mut specs = specs.to_vec();
    // distinct stems so outputs never collide
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for s in specs.iter_mut() {
        let stem = s.stem();
        let k = seen.entry(stem.clone()).or_insert(0);
        if *k > 0 {
            s.output = Some(format!("{stem}_{k}"));
        }
        *k += 1;
    }
    let reports: Vec<Report> = if opts.concurrent {
        specs.par_iter().map(|s| run(s, opts)).collect()
    } else {
        specs.iter().map(|s| run(s, opts)).collect()
    };
    if let Some(dir) = &opts.out_dir {
        for r in &reports {
            r.write(dir)?;
        }
    }
    let first_failure = reports.iter().find(|r| !r.passed()).map(|r| {
        let why = r.error.clone().unwrap_or_else(|| {
            r.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect::<Vec<_>>().join(", ")
        });
        format!("{}: {why}", r.stem)
    });
    Ok(Summary { reports, first_failure })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let m = Manifest::default_manifest();
        assert_eq!(m.experiment.len(), 7);
        let text = m.to_toml().unwrap();
        let back = Manifest::parse(&text).unwrap();
        assert_eq!(back, m);
        for spec in &back.experiment {
            assert_eq!(spec.resolve().unwrap(), spec.id.defaults());
        }
    }

    #[test]
    fn single_experiment_file_parses() {
        let m = Manifest::parse("id = \"energy_signs\"\n[params]\nalpha = 2.0\n").unwrap();
        assert_eq!(m.experiment.len(), 1);
        assert_eq!(m.experiment[0].resolve().unwrap().alpha, 2.0);
    }

    #[test]
    fn unknown_parameters_are_rejected() {
        let spec = ExperimentSpec::new(ExperimentId::EnergySigns).with_param("alpah", 1.0);
        let r = run(&spec, &RunOptions::default());
        assert!(r.error.unwrap().contains("alpah"));
    }

    #[test]
    fn strict_mode_rejects_inadmissible_beta_before_running() {
        let spec = ExperimentSpec::new(ExperimentId::BoundaryErrorScaling).with_param("betas", toml::Value::Array(vec![3.0.into()]));
        let r = run(&spec, &RunOptions::default());
        assert!(!r.passed());
        assert!(r.error.unwrap().contains("admissible"));
        assert!(r.csv.rows.is_empty());
    }

    #[test]
    fn empty_list_is_a_pass() {
        let s = run_all(&[], &RunOptions::default()).unwrap();
        assert!(s.reports.is_empty());
        assert_eq!(s.exit_code(), 0);
    }

    #[test]
    fn hash_depends_on_inputs() {
        let a = content_hash("x = 1");
        assert_eq!(a.len(), 64);
        assert_ne!(a, content_hash("x = 2"));
        assert_eq!(content_hash(""), content_hash(""));
    }

    #[test]
    fn check_constructors() {
        assert!(Check::near("a", 3.05, 3.0, 0.1).passed);
        assert!(!Check::near("a", f64::NAN, 3.0, 0.1).passed);
        assert!(Check::below("b", 1e-9, 1e-8).passed);
        assert!(!Check::holds("c", false).passed);
    }
}
