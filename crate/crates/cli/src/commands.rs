//! The four subcommands. Each writes its report into the output directory
//! (when given) and returns it; the caller maps `passed()` to an exit code.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use hdgstokes::amg::HierarchyInfo;
use hdgstokes::assembly::BlockSystem;
use hdgstokes::condense::{condense, CondensedSystem};
use hdgstokes::krylov::SolverReport;
use hdgstokes::precond::{build_rbar, ApproxMode, OperatorApprox};
use hdgstokes::solve::{solve_condensed, solve_condensed_direct, Solution, SolverKind};
use hdgstokes::spectra::{
    c_spectrum, cell_infsup_range, coercivity_bounds, condensed_schur_identity, facet_infsup, field_checks, h_norm_matrix,
    norm_equivalence_samples, schur_spectrum, Bracket, FieldChecks, Spectrum, SpectrumOptions, DENSE_CHECK_LIMIT,
};
use hdgstokes::{CellShape, HdgError, Mesh, SpaceSet};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{write_json, write_matrix, write_vector};
use crate::CliError;

#[derive(Clone, Debug, Serialize)]
pub struct MeshSummary {
    pub n_cells: usize,
    pub n_facets: usize,
    pub h_max: f64,
}

impl MeshSummary {
    fn of(m: &Mesh) -> Self {
        MeshSummary { n_cells: m.n_cells(), n_facets: m.n_facets(), h_max: m.h_max() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DofSummary {
    pub n_u: usize,
    pub n_ubar: usize,
    pub n_p: usize,
    pub n_pbar: usize,
    /// Size of the condensed system `n̄_u + n_p + n̄_p`.
    pub condensed: usize,
}

impl DofSummary {
    fn of(s: &SpaceSet) -> Self {
        DofSummary { n_u: s.n_u(), n_ubar: s.n_ubar(), n_p: s.n_p(), n_pbar: s.n_pbar(), condensed: s.n_condensed() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxSummary {
    pub description: String,
    pub hierarchy: Option<HierarchyInfo>,
    /// Eigenvalue bounds of `R̄⁻¹ Ā` from Lanczos.
    pub certificate: Option<[f64; 2]>,
}

impl ApproxSummary {
    fn of(a: &OperatorApprox) -> Self {
        ApproxSummary { description: a.describe(), hierarchy: a.hierarchy(), certificate: a.certificate }
    }
}

fn build(cfg: &RunConfig, level: usize) -> Result<(BlockSystem, CondensedSystem), CliError> {
    let spaces = SpaceSet::new(cfg.mesh_at(level)?, cfg.degree)?;
    let bs = BlockSystem::assemble(spaces, &cfg.problem_spec())?;
    let cs = condense(&bs)?;
    Ok((bs, cs))
}

// ---------------------------------------------------------------- solve

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub config: RunConfig,
    pub mesh: MeshSummary,
    pub dofs: DofSummary,
    pub rbar: ApproxSummary,
    pub solver: SolverReport,
    pub field_checks: FieldChecks,
    /// Bound on the relative field-check values: `100 * tol`, the residual
    /// amplification allowed for an iterative solve.
    pub field_tol: f64,
    /// Pointwise divergence is checked on triangles only; the tensor-product
    /// quadrilateral spaces are not divergence-free.
    pub divergence_checked: bool,
    pub velocity_l2_error: Option<f64>,
    pub passed: bool,
}

impl SolveReport {
    pub fn passed(&self) -> bool {
        self.passed
    }
}

pub fn run_solve(cfg: &RunConfig, out: Option<&Path>) -> Result<SolveReport, CliError> {
    let (bs, cs) = build(cfg, cfg.level)?;
    let opts = cfg.solve_options(cfg.solver.method, cfg.preconditioner.kind);
    let rbar = Arc::new(build_rbar(&cs, &bs, &opts.rbar)?);
    let (sol, report) = solve_condensed(&bs, &cs, &opts, Some(rbar.clone()))?;
    let s = &bs.spaces;
    let checks = field_checks(s, &sol.u);
    let field_tol = 100.0 * cfg.solver.tol;
    let divergence_checked = s.mesh().shape() == CellShape::Triangle;
    let fields_ok = checks.relative_normal_jump <= field_tol && (!divergence_checked || checks.relative_divergence <= field_tol);
    let problem = cfg.problem_spec();
    let velocity_l2_error = problem.exact_velocity.as_ref().map(|g| s.velocity_l2_error(&sol.u, &|x| g(x)));
    let result = SolveReport {
        config: cfg.clone(),
        mesh: MeshSummary::of(s.mesh()),
        dofs: DofSummary::of(s),
        rbar: ApproxSummary::of(&rbar),
        passed: report.converged && fields_ok,
        solver: report,
        field_checks: checks,
        field_tol,
        divergence_checked,
        velocity_l2_error,
    };
    if let Some(dir) = out {
        write_json(dir, "solve.json", &result)?;
        if cfg.output.solution {
            write_solution(dir, s, &sol)?;
        }
        if cfg.output.mesh {
            s.mesh().write_dump(std::io::BufWriter::new(std::fs::File::create(dir.join("mesh.txt"))?))?;
        }
    }
    Ok(result)
}

/// Velocity and pressure at cell centroids.
fn write_solution(dir: &Path, s: &SpaceSet, sol: &Solution) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join("solution.csv"))?;
    w.write_record(["cell", "x", "y", "u1", "u2", "p"])?;
    for c in 0..s.mesh().n_cells() {
        let x = s.mesh().cell_centroid(c);
        let u = s.eval_velocity(&sol.u, c, x);
        let phi = s.cell_basis(c).values(x);
        let p: f64 = s.cell_p_dofs(c).zip(&phi).map(|(i, v)| sol.p[i] * v).sum();
        w.serialize((c, x[0], x[1], u[0], u[1], p))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- study

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct StudyEntry {
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub level: usize,
    pub n_cells: usize,
    pub h_max: f64,
    pub dofs: usize,
    pub rbar: ApproxSummary,
    /// Keyed by column name (see `StudyReport::columns`).
    pub runs: BTreeMap<String, StudyEntry>,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyReport {
    pub config: RunConfig,
    /// Column order: MINRES columns are named after the preconditioner,
    /// GMRES columns carry a `GMRES ` prefix.
    pub columns: Vec<String>,
    pub rows: Vec<StudyRow>,
    /// Max over min iteration count per column.
    pub ratios: BTreeMap<String, f64>,
    pub all_converged: bool,
}

impl StudyReport {
    pub fn passed(&self) -> bool {
        self.all_converged
    }

    pub fn iterations(&self, column: &str) -> Vec<usize> {
        self.rows.iter().map(|r| r.runs[column].iterations).collect()
    }
}

pub fn run_study(cfg: &RunConfig, out: Option<&Path>) -> Result<StudyReport, CliError> {
    if cfg.study.levels < 2 {
        return Err(CliError::Config(format!("a study needs at least 2 levels, got {}", cfg.study.levels)));
    }
    let mut columns: Vec<(String, SolverKind, _)> =
        cfg.study.preconditioners.iter().map(|&k| (k.name().to_string(), SolverKind::Minres, k)).collect();
    columns.extend(cfg.study.gmres.iter().map(|&k| (format!("GMRES {}", k.name()), SolverKind::Gmres, k)));
    let mut rows = Vec::new();
    for level in 0..cfg.study.levels {
        let (bs, cs) = build(cfg, level)?;
        let base = cfg.solve_options(SolverKind::Minres, cfg.preconditioner.kind);
        let mut rbar = build_rbar(&cs, &bs, &base.rbar)?;
        if cfg.preconditioner.rbar == ApproxMode::Multigrid && cfg.study.certify_steps > 0 && !rbar.is_exact() {
            rbar.certify(&cs.a_bar, cfg.study.certify_steps, cfg.seed)?;
        }
        let rbar = Arc::new(rbar);
        let mut runs = BTreeMap::new();
        for (name, solver, kind) in &columns {
            let opts = cfg.solve_options(*solver, *kind);
            let entry = match solve_condensed(&bs, &cs, &opts, Some(rbar.clone())) {
                Ok((_, r)) => StudyEntry {
                    iterations: r.iterations,
                    converged: r.converged,
                    final_residual: r.final_residual,
                    wall_time_s: r.wall_time_s,
                },
                Err(HdgError::Breakdown { iteration, reason }) => {
                    log::warn!("level {level} {name}: breakdown at iteration {iteration}: {reason}");
                    StudyEntry { iterations: iteration, converged: false, final_residual: f64::NAN, wall_time_s: 0.0 }
                }
                Err(e) => return Err(e.into()),
            };
            log::info!("level {level} dofs {} {name}: {} iterations", cs.n(), entry.iterations);
            runs.insert(name.clone(), entry);
        }
        let converged = runs.values().all(|e| e.converged);
        if !converged {
            log::warn!("level {level}: not every run converged");
        }
        rows.push(StudyRow {
            level,
            n_cells: bs.spaces.mesh().n_cells(),
            h_max: bs.spaces.mesh().h_max(),
            dofs: cs.n(),
            rbar: ApproxSummary::of(&rbar),
            runs,
            converged,
        });
    }
    let names: Vec<String> = columns.into_iter().map(|(n, _, _)| n).collect();
    let ratios = names
        .iter()
        .map(|n| {
            let it: Vec<usize> = rows.iter().map(|r| r.runs[n].iterations).collect();
            let (lo, hi) = (*it.iter().min().unwrap(), *it.iter().max().unwrap());
            (n.clone(), hi as f64 / lo.max(1) as f64)
        })
        .collect();
    let report = StudyReport {
        config: cfg.clone(),
        all_converged: rows.iter().all(|r| r.converged),
        columns: names,
        rows,
        ratios,
    };
    if let Some(dir) = out {
        write_json(dir, "study.json", &report)?;
        write_study_csv(dir, &report)?;
    }
    Ok(report)
}

fn write_study_csv(dir: &Path, report: &StudyReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(dir.join("study.csv"))?;
    let mut header = vec!["level".to_string(), "dofs".to_string()];
    header.extend(report.columns.iter().cloned());
    header.push("converged".into());
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![row.level.to_string(), row.dofs.to_string()];
        rec.extend(report.columns.iter().map(|c| row.runs[c].iterations.to_string()));
        rec.push(row.converged.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- verify

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyLevel {
    pub level: usize,
    pub n_cells: usize,
    pub h_max: f64,
    pub dofs: usize,
    /// Whether the mesh is small enough for the dense identity and
    /// coercivity checks.
    pub dense_checks: bool,
    /// `(B A⁻¹ Bᵀ, 𝓜)`.
    pub schur: Option<Spectrum>,
    /// `(𝒞, 𝓜)`.
    pub c_mass: Option<Spectrum>,
    pub schur_identity_residual: Option<f64>,
    pub coercivity: Option<Bracket>,
    pub cell_infsup: Option<Bracket>,
    pub facet_infsup: Option<f64>,
    /// `ā_h(w̄, w̄) / ⦀w̄⦀²_h` over random samples.
    pub abar_h_norm: Option<Bracket>,
    /// From a direct solve of the configured problem.
    pub field_checks: Option<FieldChecks>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub level: Option<usize>,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub config: RunConfig,
    pub levels: Vec<VerifyLevel>,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.passed
    }
}

fn record<T>(errors: &mut Vec<String>, what: &str, r: Result<T, HdgError>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(format!("{what}: {e}"));
            None
        }
    }
}

fn measure_level(cfg: &RunConfig, level: usize, spec: &SpectrumOptions) -> Result<VerifyLevel, CliError> {
    let spaces = SpaceSet::new(cfg.mesh_at(level)?, cfg.degree)?;
    let mut v = VerifyLevel {
        level,
        n_cells: spaces.mesh().n_cells(),
        h_max: spaces.mesh().h_max(),
        dofs: spaces.n_condensed(),
        ..Default::default()
    };
    let dense_ok = spaces.n_u() + spaces.n_ubar() <= DENSE_CHECK_LIMIT;
    v.dense_checks = dense_ok;
    let e = &mut v.errors;
    if dense_ok {
        v.coercivity = record(e, "coercivity", coercivity_bounds(&spaces, cfg.alpha));
    }
    v.cell_infsup = record(e, "cell inf-sup", cell_infsup_range(&spaces, cfg.alpha));
    let Some(bs) = record(e, "assembly", BlockSystem::assemble(spaces, &cfg.problem_spec())) else {
        return Ok(v);
    };
    v.schur = record(e, "schur spectrum", schur_spectrum(&bs, spec));
    v.facet_infsup = record(e, "facet inf-sup", facet_infsup(&bs, spec));
    let Some(cs) = record(e, "condensation", condense(&bs)) else {
        return Ok(v);
    };
    v.c_mass = record(e, "C spectrum", c_spectrum(&bs, &cs, spec));
    if dense_ok {
        v.schur_identity_residual = record(e, "schur identity", condensed_schur_identity(&bs, &cs));
    }
    let h = h_norm_matrix(&bs.spaces);
    let ratios = norm_equivalence_samples(&cs, &h, cfg.verify.norm_samples, cfg.seed);
    v.abar_h_norm = Some(Bracket {
        min: ratios.iter().cloned().fold(f64::INFINITY, f64::min),
        max: ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    });
    if let Some(sol) = record(e, "direct solve", solve_condensed_direct(&bs, &cs)) {
        v.field_checks = Some(field_checks(&bs.spaces, &sol.u));
    }
    Ok(v)
}

struct Checks(Vec<Check>);

impl Checks {
    /// `value <= threshold`; a missing value fails.
    fn at_most(&mut self, name: &str, level: Option<usize>, value: Option<f64>, threshold: f64) {
        let passed = value.is_some_and(|v| v <= threshold);
        let detail = if value.is_none() { "not computed".into() } else { String::new() };
        self.0.push(Check { name: name.into(), level, value: value.unwrap_or(f64::NAN), threshold, passed, detail });
    }

    /// `value > threshold`; a missing value fails.
    fn above(&mut self, name: &str, level: Option<usize>, value: Option<f64>, threshold: f64) {
        let passed = value.is_some_and(|v| v > threshold);
        let detail = if value.is_none() { "not computed".into() } else { String::new() };
        self.0.push(Check { name: name.into(), level, value: value.unwrap_or(f64::NAN), threshold, passed, detail });
    }
}

fn drift_checks(checks: &mut Checks, name: &str, levels: &[VerifyLevel], get: impl Fn(&VerifyLevel) -> Option<Bracket>, tol: f64) {
    for w in levels.windows(2) {
        let d = match (get(&w[0]), get(&w[1])) {
            (Some(a), Some(b)) => Some(a.drift(&b)),
            _ => None,
        };
        checks.at_most(name, Some(w[1].level), d, tol);
    }
}

pub fn run_verify(cfg: &RunConfig, out: Option<&Path>) -> Result<VerifyReport, CliError> {
    let spec = SpectrumOptions { seed: cfg.seed, ..SpectrumOptions::default() };
    let levels: Vec<VerifyLevel> = (0..cfg.verify.levels).map(|l| measure_level(cfg, l, &spec)).collect::<Result<_, _>>()?;
    let vc = &cfg.verify;
    let mut checks = Checks(Vec::new());
    let triangles = cfg.mesh.shape == CellShape::Triangle;
    for v in &levels {
        let l = Some(v.level);
        if v.dense_checks {
            checks.at_most("schur_identity", l, v.schur_identity_residual, vc.identity_tol);
            checks.above("coercivity_lower", l, v.coercivity.map(|b| b.min), 0.0);
        }
        checks.above("schur_lower", l, v.schur.as_ref().map(|s| s.min), 0.0);
        checks.above("c_mass_lower", l, v.c_mass.as_ref().map(|s| s.min), 0.0);
        checks.above("cell_infsup", l, v.cell_infsup.map(|b| b.min), 0.0);
        checks.above("facet_infsup", l, v.facet_infsup, 0.0);
        checks.above("abar_h_norm_lower", l, v.abar_h_norm.map(|b| b.min), 0.0);
        checks.at_most("normal_jump", l, v.field_checks.map(|f| f.relative_normal_jump), vc.field_tol);
        if triangles {
            checks.at_most("divergence", l, v.field_checks.map(|f| f.relative_divergence), vc.field_tol);
        }
    }
    drift_checks(&mut checks, "schur_drift", &levels, |v| v.schur.as_ref().map(Spectrum::bracket), vc.spectral_drift);
    drift_checks(&mut checks, "c_mass_drift", &levels, |v| v.c_mass.as_ref().map(Spectrum::bracket), vc.spectral_drift);
    drift_checks(&mut checks, "abar_h_norm_drift", &levels, |v| v.abar_h_norm, vc.norm_drift);
    let mut failures: Vec<String> = checks
        .0
        .iter()
        .filter(|c| !c.passed)
        .map(|c| match c.level {
            Some(l) => format!("{} (level {l}): value {:.6e}, threshold {:.3e}", c.name, c.value, c.threshold),
            None => format!("{}: value {:.6e}, threshold {:.3e}", c.name, c.value, c.threshold),
        })
        .collect();
    failures.extend(levels.iter().flat_map(|v| v.errors.iter().map(move |e| format!("level {}: {e}", v.level))));
    let report = VerifyReport { config: cfg.clone(), passed: failures.is_empty(), levels, checks: checks.0, failures };
    if let Some(dir) = out {
        write_json(dir, "verify.json", &report)?;
    }
    Ok(report)
}

// ------------------------------------------------------- export-matrices

#[derive(Clone, Debug, Serialize)]
pub struct ExportReport {
    pub mesh: MeshSummary,
    pub dofs: DofSummary,
    pub files: Vec<String>,
}

pub fn export_matrices(cfg: &RunConfig, out: &Path) -> Result<ExportReport, CliError> {
    let (bs, cs) = build(cfg, cfg.level)?;
    std::fs::create_dir_all(out)?;
    let matrices = [
        ("velocity.mtx", bs.velocity_matrix()),
        ("divergence.mtx", bs.divergence_matrix()),
        ("pressure_mass.mtx", bs.pressure_mass()),
        ("full.mtx", bs.full_matrix()),
        ("condensed.mtx", cs.matrix.clone()),
        ("abar.mtx", cs.a_bar.clone()),
        ("c11.mtx", cs.c11()),
        ("c22.mtx", cs.c22()),
    ];
    let mut files = Vec::new();
    for (name, a) in &matrices {
        write_matrix(out, name, a)?;
        files.push(name.to_string());
    }
    for (name, v) in [("full_rhs.mtx", bs.full_rhs()), ("condensed_rhs.mtx", cs.rhs.clone())] {
        write_vector(out, name, &v)?;
        files.push(name.to_string());
    }
    bs.spaces.mesh().write_dump(std::io::BufWriter::new(std::fs::File::create(out.join("mesh.txt"))?))?;
    files.push("mesh.txt".into());
    let report = ExportReport { mesh: MeshSummary::of(bs.spaces.mesh()), dofs: DofSummary::of(&bs.spaces), files };
    write_json(out, "export.json", &report)?;
    Ok(report)
}
