//! Run configuration: a flat `key = value` format with `[section]` headers.
//!
//! ```text
//! [mesh]
//! shape = triangle
//! nx = 8
//! ny = 8
//!
//! [preconditioner]
//! kind = PC-SGS
//! ```
//!
//! `#` starts a comment. Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use hdgstokes::krylov::KrylovOptions;
use hdgstokes::precond::{ApproxMode, ApproxOptions, PreconditionerKind};
use hdgstokes::solve::{SolveOptions, SolverKind};
use hdgstokes::{CellShape, Mesh, ProblemSpec, Rect};
use serde::Serialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    LidDrivenCavity,
    Manufactured,
    Zero,
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "lid-driven-cavity" | "cavity" => Ok(ProblemKind::LidDrivenCavity),
            "manufactured" => Ok(ProblemKind::Manufactured),
            "zero" => Ok(ProblemKind::Zero),
            _ => Err(format!("unknown problem '{s}'")),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshConfig {
    pub shape: CellShape,
    pub nx: usize,
    pub ny: usize,
    pub domain: Rect,
    /// Relative vertex jitter; 0 keeps the structured mesh.
    pub jitter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverConfig {
    pub method: SolverKind,
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
    pub check_stride: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PreconditionerConfig {
    pub kind: PreconditionerKind,
    pub rbar: ApproxMode,
    pub c22: ApproxMode,
    pub cycles: usize,
    pub presweeps: usize,
    pub postsweeps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyConfig {
    pub levels: usize,
    pub preconditioners: Vec<PreconditionerKind>,
    /// Preconditioners additionally run with right-preconditioned GMRES.
    pub gmres: Vec<PreconditionerKind>,
    /// Lanczos steps for the multigrid certificate; 0 disables it.
    pub certify_steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyConfig {
    pub levels: usize,
    pub identity_tol: f64,
    pub spectral_drift: f64,
    pub norm_drift: f64,
    pub field_tol: f64,
    pub norm_samples: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputConfig {
    pub solution: bool,
    pub mesh: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub degree: usize,
    pub alpha: f64,
    pub problem: ProblemKind,
    pub solver: SolverConfig,
    pub preconditioner: PreconditionerConfig,
    pub study: StudyConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
    pub seed: u64,
    /// Refinements applied to the base mesh by `solve` and `export-matrices`.
    pub level: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshConfig { shape: CellShape::Triangle, nx: 4, ny: 4, domain: Rect::biunit_square(), jitter: 0.0 },
            degree: 2,
            alpha: 24.0,
            problem: ProblemKind::LidDrivenCavity,
            solver: SolverConfig { method: SolverKind::Minres, tol: 1e-8, maxit: 1000, restart: 1000, check_stride: 1 },
            preconditioner: PreconditionerConfig {
                kind: PreconditionerKind::Pm,
                rbar: ApproxMode::Exact,
                c22: ApproxMode::Exact,
                cycles: 4,
                presweeps: 1,
                postsweeps: 1,
            },
            study: StudyConfig {
                levels: 4,
                preconditioners: PreconditionerKind::ALL.to_vec(),
                gmres: vec![PreconditionerKind::PcSgs],
                certify_steps: 30,
            },
            verify: VerifyConfig {
                levels: 3,
                identity_tol: 1e-9,
                spectral_drift: 0.2,
                norm_drift: 0.25,
                field_tol: 1e-8,
                norm_samples: 50,
            },
            output: OutputConfig { solution: true, mesh: true },
            seed: 1,
            level: 0,
        }
    }
}

fn parse<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| CliError::Config(format!("[{section}] {key} = {value}: {e}")))
}

fn parse_list<T: FromStr>(section: &str, key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(|v| parse(section, key, v)).collect()
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool, CliError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("[{section}] {key} = {value}: expected a boolean"))),
    }
}

/// Splits the text into `section -> key -> value`. Keys before the first
/// header belong to `[run]`.
fn tokenize(text: &str) -> Result<BTreeMap<String, BTreeMap<String, String>>, CliError> {
    let mut out: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut section = String::from("run");
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| CliError::Config(format!("line {}: malformed section header '{line}'", i + 1)))?;
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
        let key = key.trim().to_ascii_lowercase();
        let entry = out.entry(section.clone()).or_default();
        if entry.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key '{key}' in [{section}]", i + 1)));
        }
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        RunConfig::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        for (section, entries) in tokenize(text)? {
            for (key, value) in entries {
                cfg.set(&section, &key, &value)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<(), CliError> {
        let s = section;
        match (section, key) {
            ("run", "seed") => self.seed = parse(s, key, v)?,
            ("run", "level") => self.level = parse(s, key, v)?,
            ("mesh", "shape") => self.mesh.shape = parse(s, key, v)?,
            ("mesh", "nx") => self.mesh.nx = parse(s, key, v)?,
            ("mesh", "ny") => self.mesh.ny = parse(s, key, v)?,
            ("mesh", "jitter") => self.mesh.jitter = parse(s, key, v)?,
            ("mesh", "domain") => {
                let b: Vec<f64> = v.split_whitespace().map(|t| parse(s, key, t)).collect::<Result<_, _>>()?;
                if b.len() != 4 {
                    return Err(CliError::Config(format!("[mesh] domain = {v}: expected 'x0 x1 y0 y1'")));
                }
                self.mesh.domain = Rect::new(b[0], b[1], b[2], b[3]);
            }
            ("discretization", "degree") => self.degree = parse(s, key, v)?,
            ("discretization", "alpha") => self.alpha = parse(s, key, v)?,
            ("problem", "name") => self.problem = parse(s, key, v)?,
            ("solver", "method") => self.solver.method = parse(s, key, v)?,
            ("solver", "tol") => self.solver.tol = parse(s, key, v)?,
            ("solver", "maxit") => self.solver.maxit = parse(s, key, v)?,
            ("solver", "restart") => self.solver.restart = parse(s, key, v)?,
            ("solver", "check_stride") => self.solver.check_stride = parse(s, key, v)?,
            ("preconditioner", "kind") => self.preconditioner.kind = parse(s, key, v)?,
            ("preconditioner", "rbar") => self.preconditioner.rbar = parse(s, key, v)?,
            ("preconditioner", "c22") => self.preconditioner.c22 = parse(s, key, v)?,
            ("preconditioner", "cycles") => self.preconditioner.cycles = parse(s, key, v)?,
            ("preconditioner", "presweeps") => self.preconditioner.presweeps = parse(s, key, v)?,
            ("preconditioner", "postsweeps") => self.preconditioner.postsweeps = parse(s, key, v)?,
            ("study", "levels") => self.study.levels = parse(s, key, v)?,
            ("study", "preconditioners") => self.study.preconditioners = parse_list(s, key, v)?,
            ("study", "gmres") => self.study.gmres = parse_list(s, key, v)?,
            ("study", "certify_steps") => self.study.certify_steps = parse(s, key, v)?,
            ("verify", "levels") => self.verify.levels = parse(s, key, v)?,
            ("verify", "identity_tol") => self.verify.identity_tol = parse(s, key, v)?,
            ("verify", "spectral_drift") => self.verify.spectral_drift = parse(s, key, v)?,
            ("verify", "norm_drift") => self.verify.norm_drift = parse(s, key, v)?,
            ("verify", "field_tol") => self.verify.field_tol = parse(s, key, v)?,
            ("verify", "norm_samples") => self.verify.norm_samples = parse(s, key, v)?,
            ("output", "solution") => self.output.solution = parse_bool(s, key, v)?,
            ("output", "mesh") => self.output.mesh = parse_bool(s, key, v)?,
            _ => return Err(CliError::Config(format!("unknown key '{key}' in [{section}]"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Config(m));
        if self.mesh.nx == 0 || self.mesh.ny == 0 {
            return fail(format!("mesh size must be positive, got {}x{}", self.mesh.nx, self.mesh.ny));
        }
        let d = self.mesh.domain;
        if !(d.x1 > d.x0 && d.y1 > d.y0) {
            return fail("domain must have positive extent".into());
        }
        if !(0.0..0.25).contains(&self.mesh.jitter) {
            return fail(format!("jitter must lie in [0, 0.25), got {}", self.mesh.jitter));
        }
        if self.degree == 0 {
            return fail("degree must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.solver.tol > 0.0) || self.solver.maxit == 0 || self.solver.restart == 0 || self.solver.check_stride == 0 {
            return fail("solver tol, maxit, restart and check_stride must be positive".into());
        }
        if self.preconditioner.cycles == 0 {
            return fail("multigrid cycles must be at least 1".into());
        }
        if self.study.levels == 0 || self.verify.levels == 0 {
            return fail("refinement levels must be at least 1".into());
        }
        if self.study.preconditioners.is_empty() {
            return fail("study needs at least one preconditioner".into());
        }
        Ok(())
    }

    /// Base mesh refined `level` times.
    pub fn mesh_at(&self, level: usize) -> Result<Mesh, CliError> {
        let m = &self.mesh;
        let mut mesh = Mesh::generate(m.nx, m.ny, m.shape, m.domain)?;
        for _ in 0..level {
            mesh = mesh.refine();
        }
        if m.jitter > 0.0 {
            mesh = mesh.jittered(m.jitter, self.seed)?;
        }
        Ok(mesh)
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        match self.problem {
            ProblemKind::LidDrivenCavity => ProblemSpec::lid_driven_cavity(self.alpha, self.degree),
            ProblemKind::Manufactured => ProblemSpec::manufactured(self.alpha, self.degree),
            ProblemKind::Zero => ProblemSpec::zero(self.alpha, self.degree),
        }
    }

    fn approx(&self, mode: ApproxMode) -> ApproxOptions {
        let p = &self.preconditioner;
        ApproxOptions { mode, cycles: p.cycles, presweeps: p.presweeps, postsweeps: p.postsweeps }
    }

    pub fn solve_options(&self, solver: SolverKind, kind: PreconditionerKind) -> SolveOptions {
        let s = &self.solver;
        SolveOptions {
            solver,
            preconditioner: kind,
            krylov: KrylovOptions { tol: s.tol, maxit: s.maxit, check_stride: s.check_stride, restart: s.restart },
            rbar: self.approx(self.preconditioner.rbar),
            c22: self.approx(self.preconditioner.c22),
        }
    }
}
