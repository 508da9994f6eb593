//! Block preconditioners for the condensed saddle-point system.
//!
//! On the condensed unknowns `(ū, p, p̄)` the diagonal preconditioners are
//! `bdiag(R̄, M, M̄)` (PM) and `bdiag(R̄, 𝒞₁₁, 𝒞₂₂)` (PC). The block symmetric
//! Gauss-Seidel variants use
//!
//! ```text
//!       [ R̄    0      0  ]
//! 𝒳  =  [ B̄_p  D₂     0  ],     𝒫 = 𝒳 D⁻¹ 𝒳ᵀ,   D = bdiag(R̄, D₂, D₃),
//!       [ B̄_p̄  -C̄_p̄p  D₃ ]
//! ```
//!
//! with `(D₂, D₃) = (M, M̄)` or `(𝒞₁₁, 𝒞₂₂)`. `𝒳` is the lower block triangle
//! of the condensed matrix with its pressure diagonal replaced by positive
//! blocks, so `𝒫` is symmetric positive definite. Applying `𝒫⁻¹` costs two
//! `R̄` solves and one sweep per pressure block.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::amg::{AmgHierarchy, AmgParams, HierarchyInfo};
use crate::assembly::BlockSystem;
use crate::condense::{CondensedLayout, CondensedSystem};
use crate::error::{HdgError, Result};
use crate::linalg::{lanczos_self_adjoint, LanczosResult, SparseCholesky};
use crate::sparse::CsrMatrix;

/// A linear map `y = A x` on vectors of length `dim()`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

/// Identity operator of a given size.
#[derive(Clone, Copy, Debug)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApproxMode {
    Exact,
    Multigrid,
}

impl FromStr for ApproxMode {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(ApproxMode::Exact),
            "multigrid" | "amg" => Ok(ApproxMode::Multigrid),
            _ => Err(HdgError::InvalidOption(format!("unknown operator approximation '{s}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ApproxOptions {
    pub mode: ApproxMode,
    pub cycles: usize,
    pub presweeps: usize,
    pub postsweeps: usize,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions { mode: ApproxMode::Exact, cycles: 4, presweeps: 1, postsweeps: 1 }
    }
}

impl ApproxOptions {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn multigrid(cycles: usize) -> Self {
        ApproxOptions { mode: ApproxMode::Multigrid, cycles, ..Self::default() }
    }
}

enum Approx {
    Exact(SparseCholesky),
    Multigrid { hierarchy: AmgHierarchy, cycles: usize },
}

/// Approximate inverse of an SPD matrix: an exact factorization or a fixed
/// number of multigrid V-cycles.
pub struct OperatorApprox {
    inner: Approx,
    /// Measured bounds on the eigenvalues of `R̄⁻¹ A`, when computed.
    pub certificate: Option<[f64; 2]>,
}

impl fmt::Debug for OperatorApprox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OperatorApprox({})", self.describe())
    }
}

impl OperatorApprox {
    /// Builds an approximation of `a`. `block` and `near_null` describe the
    /// node structure and near-null space used by multigrid.
    pub fn build(a: &CsrMatrix, block: usize, near_null: &[Vec<f64>], opts: &ApproxOptions) -> Result<OperatorApprox> {
        let inner = match opts.mode {
            ApproxMode::Exact => Approx::Exact(
                SparseCholesky::new(a).map_err(|e| HdgError::SparseFactorization(format!("exact operator approximation: {e}")))?,
            ),
            ApproxMode::Multigrid => {
                if opts.cycles == 0 {
                    return Err(HdgError::InvalidOption("multigrid cycle count must be at least 1".into()));
                }
                let params = AmgParams { presweeps: opts.presweeps, postsweeps: opts.postsweeps, ..AmgParams::default() };
                let hierarchy = AmgHierarchy::new(a, block, near_null, params)?;
                if hierarchy.n_levels() == 1 {
                    log::warn!("multigrid hierarchy has a single level; falling back to an exact solve");
                    Approx::Exact(SparseCholesky::new(a)?)
                } else {
                    Approx::Multigrid { hierarchy, cycles: opts.cycles }
                }
            }
        };
        Ok(OperatorApprox { inner, certificate: None })
    }

    pub fn dim(&self) -> usize {
        match &self.inner {
            Approx::Exact(c) => c.n(),
            Approx::Multigrid { hierarchy, .. } => hierarchy.info().sizes[0],
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.inner, Approx::Exact(_))
    }

    pub fn hierarchy(&self) -> Option<HierarchyInfo> {
        match &self.inner {
            Approx::Exact(_) => None,
            Approx::Multigrid { hierarchy, .. } => Some(hierarchy.info()),
        }
    }

    pub fn describe(&self) -> String {
        match &self.inner {
            Approx::Exact(_) => "exact".into(),
            Approx::Multigrid { hierarchy, cycles } => format!("multigrid ({} levels, {cycles} V-cycles)", hierarchy.n_levels()),
        }
    }

    /// `R̄⁻¹ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        match &self.inner {
            Approx::Exact(c) => c.solve(b),
            Approx::Multigrid { hierarchy, cycles } => hierarchy.solve(b, *cycles),
        }
    }

    /// Estimates the extreme eigenvalues of `R̄⁻¹ A` with `steps` Lanczos
    /// steps in the `A` inner product and stores them as the certificate.
    pub fn certify(&mut self, a: &CsrMatrix, steps: usize, seed: u64) -> Result<LanczosResult> {
        let r = lanczos_self_adjoint(a.nrows(), &|v| self.solve(&a.matvec(v)), &|v| a.matvec(v), &[], steps, 1e-10, seed)?;
        self.certificate = Some([r.lambda_min, r.lambda_max]);
        Ok(r)
    }
}

/// Near-null space of `Ā` for multigrid: constant and linear vector fields
/// per component, with boundary constrained DOFs set to zero. The constants
/// span the exact null space of the unconstrained operator; the linear
/// fields enrich the coarse spaces.
pub fn abar_near_null(bs: &BlockSystem) -> Vec<Vec<f64>> {
    let s = &bs.spaces;
    let mut out = Vec::new();
    for c in 0..2 {
        for m in 0..3 {
            let mut v = s.project_to_facets(&|x: [f64; 2]| {
                let val = [1.0, x[0], x[1]][m];
                if c == 0 { [val, 0.0] } else { [0.0, val] }
            });
            for (x, &con) in v.iter_mut().zip(s.constrained_mask()) {
                if con {
                    *x = 0.0;
                }
            }
            out.push(v);
        }
    }
    out
}

/// Builds `R̄` for the facet velocity block of `cs`.
pub fn build_rbar(cs: &CondensedSystem, bs: &BlockSystem, opts: &ApproxOptions) -> Result<OperatorApprox> {
    OperatorApprox::build(&cs.a_bar, 2 * bs.spaces.nf(), &abar_near_null(bs), opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PreconditionerKind {
    #[serde(rename = "PM")]
    Pm,
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "PM-SGS")]
    PmSgs,
    #[serde(rename = "PC-SGS")]
    PcSgs,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 4] =
        [PreconditionerKind::Pm, PreconditionerKind::Pc, PreconditionerKind::PmSgs, PreconditionerKind::PcSgs];

    pub fn name(self) -> &'static str {
        match self {
            PreconditionerKind::Pm => "PM",
            PreconditionerKind::Pc => "PC",
            PreconditionerKind::PmSgs => "PM-SGS",
            PreconditionerKind::PcSgs => "PC-SGS",
        }
    }

    pub fn is_sgs(self) -> bool {
        matches!(self, PreconditionerKind::PmSgs | PreconditionerKind::PcSgs)
    }

    pub fn uses_mass(self) -> bool {
        matches!(self, PreconditionerKind::Pm | PreconditionerKind::PmSgs)
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreconditionerKind {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| !matches!(c, '-' | '_' | ' ')).collect::<String>().to_ascii_uppercase();
        match norm.as_str() {
            "PM" => Ok(PreconditionerKind::Pm),
            "PC" => Ok(PreconditionerKind::Pc),
            "PMSGS" => Ok(PreconditionerKind::PmSgs),
            "PCSGS" => Ok(PreconditionerKind::PcSgs),
            _ => Err(HdgError::InvalidOption(format!("unknown preconditioner '{s}'"))),
        }
    }
}

/// Exact inverse of a block-diagonal SPD matrix with equal consecutive blocks.
#[derive(Clone, Debug)]
pub struct BlockDiagInverse {
    block: usize,
    chols: Vec<Cholesky<f64, Dyn>>,
}

impl BlockDiagInverse {
    pub fn new(a: &CsrMatrix, block: usize) -> Result<BlockDiagInverse> {
        let n = a.nrows();
        if block == 0 || !n.is_multiple_of(block) {
            return Err(HdgError::DimensionMismatch(format!("block size {block} does not divide {n}")));
        }
        for i in 0..n {
            if a.row(i).0.iter().any(|&j| j / block != i / block) {
                return Err(HdgError::DimensionMismatch(format!("row {i} couples distinct blocks")));
            }
        }
        let chols = (0..n / block)
            .map(|b| {
                let r = b * block..(b + 1) * block;
                Cholesky::new(a.submatrix(r.clone(), r).to_dense())
                    .ok_or_else(|| HdgError::SparseFactorization(format!("diagonal block {b} is not positive definite")))
            })
            .collect::<Result<_>>()?;
        Ok(BlockDiagInverse { block, chols })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.len()];
        for (k, c) in self.chols.iter().enumerate() {
            let r = k * self.block..(k + 1) * self.block;
            out[r.clone()].copy_from_slice(c.solve(&DVector::from_column_slice(&b[r])).as_slice());
        }
        out
    }
}

enum PressureSolve {
    Block(BlockDiagInverse),
    General(OperatorApprox),
}

impl PressureSolve {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            PressureSolve::Block(s) => s.solve(b),
            PressureSolve::General(s) => s.solve(b),
        }
    }
}

/// Off-diagonal blocks wired into the SGS sweeps.
struct SgsCoupling {
    /// `B̄_p`: cell-pressure rows against `ū`.
    b_p: CsrMatrix,
    /// `B̄_p̄`: facet-pressure rows against `ū`.
    b_q: CsrMatrix,
    /// `C̄_p̄p`.
    c_qp: CsrMatrix,
}

/// One of the four block preconditioners; `apply` computes `𝒫⁻¹ r`.
pub struct Preconditioner {
    kind: PreconditionerKind,
    layout: CondensedLayout,
    rbar: Arc<OperatorApprox>,
    p_solve: PressureSolve,
    q_solve: PressureSolve,
    sgs: Option<SgsCoupling>,
}

impl fmt::Debug for Preconditioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Preconditioner({}, R̄ = {})", self.kind, self.rbar.describe())
    }
}

impl Preconditioner {
    /// Builds `kind` on top of `rbar`. `c22` selects how the facet-pressure
    /// block of `𝒞` is inverted; all other pressure blocks are inverted
    /// exactly by cell- or facet-local factorizations.
    pub fn build(
        cs: &CondensedSystem,
        bs: &BlockSystem,
        kind: PreconditionerKind,
        rbar: Arc<OperatorApprox>,
        c22: &ApproxOptions,
    ) -> Result<Preconditioner> {
        let layout = cs.layout;
        let s = &bs.spaces;
        if rbar.dim() != layout.n_ubar || bs.mass_p.nrows() != layout.n_p || bs.mass_pbar.nrows() != layout.n_pbar {
            return Err(HdgError::DimensionMismatch("preconditioner blocks".into()));
        }
        let (p_solve, q_solve) = if kind.uses_mass() {
            (
                PressureSolve::Block(BlockDiagInverse::new(&bs.mass_p, s.np())?),
                PressureSolve::Block(BlockDiagInverse::new(&bs.mass_pbar, s.nf())?),
            )
        } else {
            let pbar_const = s.constant_pressure();
            let near_null = vec![pbar_const[s.n_p()..].to_vec()];
            (
                PressureSolve::Block(BlockDiagInverse::new(&cs.c11(), s.np())?),
                PressureSolve::General(OperatorApprox::build(&cs.c22(), s.nf(), &near_null, c22)?),
            )
        };
        let sgs = kind.is_sgs().then(|| {
            let np = layout.n_p;
            let nq = layout.n_pbar;
            SgsCoupling {
                b_p: cs.b_bar.submatrix(0..np, 0..layout.n_ubar),
                b_q: cs.b_bar.submatrix(np..np + nq, 0..layout.n_ubar),
                c_qp: cs.c_bar.submatrix(np..np + nq, 0..np),
            }
        });
        Ok(Preconditioner { kind, layout, rbar, p_solve, q_solve, sgs })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn rbar(&self) -> &OperatorApprox {
        &self.rbar
    }

    /// `z = 𝒫⁻¹ r`.
    pub fn apply_vec(&self, r: &[f64]) -> Vec<f64> {
        let l = self.layout;
        let (r1, r2, r3) = (&r[l.ubar()], &r[l.p()], &r[l.pbar()]);
        let mut z = Vec::with_capacity(l.n());
        match &self.sgs {
            None => {
                z.extend(self.rbar.solve(r1));
                z.extend(self.p_solve.solve(r2));
                z.extend(self.q_solve.solve(r3));
            }
            Some(c) => {
                // Forward sweep with 𝒳.
                let y1 = self.rbar.solve(r1);
                let mut t2 = r2.to_vec();
                sub_matvec(&c.b_p, &y1, &mut t2);
                let y2 = self.p_solve.solve(&t2);
                let mut t3 = r3.to_vec();
                sub_matvec(&c.b_q, &y1, &mut t3);
                c.c_qp.matvec_add(&y2, &mut t3);
                let z3 = self.q_solve.solve(&t3);
                // Backward sweep with 𝒳ᵀ.
                let mut t2 = vec![0.0; l.n_p];
                c.c_qp.matvec_transpose_add(&z3, &mut t2);
                let mut z2 = self.p_solve.solve(&t2);
                z2.iter_mut().zip(&y2).for_each(|(a, b)| *a += b);
                let mut t1 = vec![0.0; l.n_ubar];
                c.b_p.matvec_transpose_add(&z2, &mut t1);
                c.b_q.matvec_transpose_add(&z3, &mut t1);
                let mut z1 = self.rbar.solve(&t1);
                z1.iter_mut().zip(&y1).for_each(|(a, b)| *a = b - *a);
                z.extend(z1);
                z.extend(z2);
                z.extend(z3);
            }
        }
        z
    }
}

impl LinearOperator for Preconditioner {
    fn dim(&self) -> usize {
        self.layout.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&self.apply_vec(x));
    }
}

fn sub_matvec(a: &CsrMatrix, x: &[f64], y: &mut [f64]) {
    let ax = a.matvec(x);
    y.iter_mut().zip(&ax).for_each(|(a, b)| *a -= b);
}

/// Dense matrix of a linear operator, column by column.
pub fn operator_to_dense(op: &dyn LinearOperator) -> DMatrix<f64> {
    let n = op.dim();
    let mut out = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        out.column_mut(j).copy_from_slice(&y);
        e[j] = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::condense;
    use crate::mesh::{CellShape, Mesh, Rect};
    use crate::spaces::{ProblemSpec, SpaceSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_cell() -> (BlockSystem, CondensedSystem) {
        let m = Mesh::generate(1, 1, CellShape::Triangle, Rect::biunit_square()).unwrap();
        let problem = ProblemSpec::lid_driven_cavity(24.0, 2);
        let bs = BlockSystem::assemble(SpaceSet::new(m, 2).unwrap(), &problem).unwrap();
        let cs = condense(&bs).unwrap();
        (bs, cs)
    }

    fn build_all(bs: &BlockSystem, cs: &CondensedSystem) -> Vec<Preconditioner> {
        let rbar = Arc::new(build_rbar(cs, bs, &ApproxOptions::exact()).unwrap());
        PreconditionerKind::ALL
            .iter()
            .map(|&k| Preconditioner::build(cs, bs, k, rbar.clone(), &ApproxOptions::exact()).unwrap())
            .collect()
    }

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("pm-sgs".parse::<PreconditionerKind>().unwrap(), PreconditionerKind::PmSgs);
        assert_eq!("PC".parse::<PreconditionerKind>().unwrap(), PreconditionerKind::Pc);
        assert!("PX".parse::<PreconditionerKind>().is_err());
        assert!("jacobi".parse::<ApproxMode>().is_err());
    }

    #[test]
    fn applications_are_symmetric_and_linear() {
        let (bs, cs) = two_cell();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pc in build_all(&bs, &cs) {
            assert!(pc.apply_vec(&vec![0.0; cs.n()]).iter().all(|&v| v == 0.0));
            for _ in 0..5 {
                let r = random(cs.n(), &mut rng);
                let s = random(cs.n(), &mut rng);
                let a = crate::sparse::dot(&pc.apply_vec(&r), &s);
                let b = crate::sparse::dot(&r, &pc.apply_vec(&s));
                assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "{}: {a} vs {b}", pc.kind());
            }
        }
    }

    #[test]
    fn applications_are_positive_definite() {
        let (bs, cs) = two_cell();
        for pc in build_all(&bs, &cs) {
            let d = operator_to_dense(&pc);
            let sym = (&d + d.transpose()) * 0.5;
            let min = sym.symmetric_eigenvalues().min();
            assert!(min > 0.0, "{}: {min}", pc.kind());
        }
    }

    #[test]
    fn exact_rbar_inverts_abar() {
        let (bs, cs) = two_cell();
        let rbar = build_rbar(&cs, &bs, &ApproxOptions::exact()).unwrap();
        let a = cs.a_bar.to_dense();
        let n = a.nrows();
        let mut prod = DMatrix::zeros(n, n);
        for j in 0..n {
            let col: Vec<f64> = a.column(j).iter().cloned().collect();
            prod.column_mut(j).copy_from_slice(&rbar.solve(&col));
        }
        assert!((prod - DMatrix::identity(n, n)).abs().max() < 1e-10);
    }

    #[test]
    fn pm_reproduces_mass_inverses() {
        let (bs, cs) = two_cell();
        let pcs = build_all(&bs, &cs);
        let pm = &pcs[0];
        let l = cs.layout;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut r = vec![0.0; l.n()];
        let rp = random(l.n_p + l.n_pbar, &mut rng);
        r[l.pressure()].copy_from_slice(&rp);
        let z = pm.apply_vec(&r);
        let m = bs.pressure_mass().to_dense();
        let expect = m.cholesky().unwrap().solve(&DVector::from_column_slice(&rp));
        assert!(z[l.ubar()].iter().all(|&v| v == 0.0));
        for (a, b) in z[l.pressure()].iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn sgs_matches_explicit_composition() {
        let (bs, cs) = two_cell();
        let l = cs.layout;
        let n = l.n();
        let rbar_d = cs.a_bar.to_dense();
        for (kind, d2, d3) in [
            (PreconditionerKind::PmSgs, bs.mass_p.to_dense(), bs.mass_pbar.to_dense()),
            (PreconditionerKind::PcSgs, cs.c11().to_dense(), cs.c22().to_dense()),
        ] {
            let mut x = DMatrix::zeros(n, n);
            let mut d = DMatrix::zeros(n, n);
            let full = cs.matrix.to_dense();
            let (u, p, q) = (l.ubar(), l.p(), l.pbar());
            x.view_mut((u.start, u.start), (u.len(), u.len())).copy_from(&rbar_d);
            x.view_mut((p.start, p.start), (p.len(), p.len())).copy_from(&d2);
            x.view_mut((q.start, q.start), (q.len(), q.len())).copy_from(&d3);
            x.view_mut((p.start, u.start), (p.len(), u.len())).copy_from(&full.view((p.start, u.start), (p.len(), u.len())));
            x.view_mut((q.start, u.start), (q.len(), u.len())).copy_from(&full.view((q.start, u.start), (q.len(), u.len())));
            x.view_mut((q.start, p.start), (q.len(), p.len()))
                .copy_from(&(-full.view((q.start, p.start), (q.len(), p.len()))));
            d.view_mut((u.start, u.start), (u.len(), u.len())).copy_from(&rbar_d);
            d.view_mut((p.start, p.start), (p.len(), p.len())).copy_from(&d2);
            d.view_mut((q.start, q.start), (q.len(), q.len())).copy_from(&d3);
            let p_mat = &x * d.clone().try_inverse().unwrap() * x.transpose();
            let rbar = Arc::new(build_rbar(&cs, &bs, &ApproxOptions::exact()).unwrap());
            let pc = Preconditioner::build(&cs, &bs, kind, rbar, &ApproxOptions::exact()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let r = random(n, &mut rng);
            let z = pc.apply_vec(&r);
            let back = &p_mat * DVector::from_column_slice(&z);
            for (a, b) in back.iter().zip(&r) {
                assert!((a - b).abs() < 1e-12 * p_mat.abs().max().max(1.0), "{kind}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn pm_preconditioned_spectrum_straddles_zero() {
        let (bs, cs) = two_cell();
        let pm = &build_all(&bs, &cs)[0];
        let a = cs.matrix.to_dense();
        let pinv = operator_to_dense(pm);
        let c = bs.spaces.constant_pressure();
        let null = cs.pressure_nullspace(&c);
        let p_mat = pinv.try_inverse().unwrap();
        let p_mat = (&p_mat + p_mat.transpose()) * 0.5;
        let pn: Vec<f64> = (&p_mat * DVector::from_column_slice(&null)).iter().cloned().collect();
        let ev = crate::linalg::deflated_generalized_eigenvalues(&a, &p_mat, &[pn]).unwrap();
        let neg: Vec<f64> = ev.iter().cloned().filter(|&v| v < 0.0).collect();
        let pos: Vec<f64> = ev.iter().cloned().filter(|&v| v > 0.0).collect();
        assert!(!neg.is_empty() && !pos.is_empty());
        assert!(ev.iter().all(|v| v.abs() > 1e-6), "{ev:?}");
    }
}
