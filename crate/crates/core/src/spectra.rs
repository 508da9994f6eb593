//! Numerical probes for the stability constants of the discretization:
//! coercivity of `a_h`, inf-sup constants of `b_h`, spectral equivalence of
//! the pressure Schur complement with `𝓜` and `𝒞`, the condensed Schur
//! identity, equivalence of `ā_h` with `⦀·⦀_h`, and pointwise structure of
//! the recovered velocity.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble_a_unconstrained, element_matrices, BlockSystem};
use crate::condense::CondensedSystem;
use crate::error::{HdgError, Result};
use crate::linalg::{deflated_generalized_eigenvalues, lanczos_extremes, SparseCholesky};
use crate::spaces::{CellData, SpaceSet};
use crate::sparse::{dot, CsrMatrix, TripletBuilder};

/// Scalar `∫ ∇φ·∇φ + (α/h) ∮ φ φ` on one cell.
fn scalar_dg(d: &CellData, nv: usize, alpha: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nv, nv);
    for q in 0..d.points.len() {
        for i in 0..nv {
            for j in 0..nv {
                let g = d.dphi[q][i][0] * d.dphi[q][j][0] + d.dphi[q][i][1] * d.dphi[q][j][1];
                m[(i, j)] += d.weights[q] * g;
            }
        }
    }
    let pen = alpha / d.h;
    for fd in &d.facets {
        for q in 0..fd.points.len() {
            for i in 0..nv {
                for j in 0..nv {
                    m[(i, j)] += pen * fd.weights[q] * fd.phi[q][i] * fd.phi[q][j];
                }
            }
        }
    }
    m
}

fn per_component(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 {
        m.view_mut((c * n, c * n), (n, n)).copy_from(s);
    }
    m
}

/// `⦀·⦀²_DG(K)` matrix on the cell velocity of `d`.
pub fn cell_dg_matrix(s: &SpaceSet, d: &CellData, alpha: f64) -> DMatrix<f64> {
    per_component(&scalar_dg(d, s.nv(), alpha))
}

/// Quadratic forms realizing the discrete norms.
#[derive(Clone, Debug)]
pub struct NormEvaluator {
    /// `⦀(v, v̄)⦀²_v` on `[u, ū]`.
    pub v: CsrMatrix,
    /// `⦀v⦀²_DG` on `u`.
    pub dg: CsrMatrix,
    /// `⦀v̄⦀²_h` on `ū`.
    pub h: CsrMatrix,
    /// `‖q‖² + ‖q̄‖²_p` on `(p, p̄)`, i.e. `𝓜`.
    pub p: CsrMatrix,
}

impl NormEvaluator {
    pub fn new(bs: &BlockSystem) -> NormEvaluator {
        let s = &bs.spaces;
        NormEvaluator { v: v_norm_matrix(s, bs.alpha), dg: dg_norm_matrix(s, bs.alpha), h: h_norm_matrix(s), p: bs.pressure_mass() }
    }
}

pub fn dg_norm_matrix(s: &SpaceSet, alpha: f64) -> CsrMatrix {
    let mut t = TripletBuilder::new(s.n_u(), s.n_u());
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let dofs: Vec<usize> = s.cell_u_dofs(c).collect();
        t.add_block(&dofs, &dofs, &cell_dg_matrix(s, &d, alpha));
    }
    t.build()
}

pub fn v_norm_matrix(s: &SpaceSet, alpha: f64) -> CsrMatrix {
    let (nv, nf) = (s.nv(), s.nf());
    let n = s.n_u() + s.n_ubar();
    let mut t = TripletBuilder::new(n, n);
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let nu = 2 * nv;
        let nb = d.facets.len() * 2 * nf;
        let mut m = DMatrix::zeros(nu + nb, nu + nb);
        // Gradient part and the cell-cell penalty come from the DG form.
        m.view_mut((0, 0), (nu, nu)).copy_from(&cell_dg_matrix(s, &d, alpha));
        let pen = alpha / d.h;
        for (l, fd) in d.facets.iter().enumerate() {
            for q in 0..fd.points.len() {
                let w = pen * fd.weights[q];
                for comp in 0..2 {
                    for j in 0..nf {
                        let bj = nu + l * 2 * nf + comp * nf + j;
                        for jj in 0..nf {
                            let bjj = nu + l * 2 * nf + comp * nf + jj;
                            m[(bj, bjj)] += w * fd.psi[q][j] * fd.psi[q][jj];
                        }
                        for i in 0..nv {
                            let v = -w * fd.psi[q][j] * fd.phi[q][i];
                            m[(bj, comp * nv + i)] += v;
                            m[(comp * nv + i, bj)] += v;
                        }
                    }
                }
            }
        }
        let mut dofs: Vec<usize> = s.cell_u_dofs(c).collect();
        dofs.extend(s.cell_ubar_dofs(c).into_iter().map(|j| s.n_u() + j));
        t.add_block(&dofs, &dofs, &m);
    }
    t.build()
}

/// `Σ_K h_K⁻¹ ‖v̄ - m_K(v̄)‖²_{∂K}`, with `m_K` the mean over `∂K`.
pub fn h_norm_matrix(s: &SpaceSet) -> CsrMatrix {
    let nf = s.nf();
    let mut t = TripletBuilder::new(s.n_ubar(), s.n_ubar());
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let nb = d.facets.len() * nf;
        let mut gram = DMatrix::<f64>::zeros(nb, nb);
        let mut g = vec![0.0; nb];
        let mut perimeter = 0.0;
        for (l, fd) in d.facets.iter().enumerate() {
            perimeter += fd.length;
            for q in 0..fd.points.len() {
                for j in 0..nf {
                    g[l * nf + j] += fd.weights[q] * fd.psi[q][j];
                    for jj in 0..nf {
                        gram[(l * nf + j, l * nf + jj)] += fd.weights[q] * fd.psi[q][j] * fd.psi[q][jj];
                    }
                }
            }
        }
        let scalar = DMatrix::from_fn(nb, nb, |i, j| (gram[(i, j)] - g[i] * g[j] / perimeter) / d.h);
        let dofs = s.cell_ubar_dofs(c);
        for comp in 0..2 {
            let idx: Vec<usize> =
                (0..d.facets.len()).flat_map(|l| (0..nf).map(move |j| l * 2 * nf + comp * nf + j)).map(|i| dofs[i]).collect();
            t.add_block(&idx, &idx, &scalar);
        }
    }
    t.build()
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Bracket {
    pub min: f64,
    pub max: f64,
}

impl Bracket {
    fn of(values: &[f64]) -> Bracket {
        Bracket {
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Largest relative change of either end against `other`.
    pub fn drift(&self, other: &Bracket) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        rel(self.min, other.min).max(rel(self.max, other.max))
    }
}

#[derive(Clone, Debug)]
pub struct SpectrumOptions {
    /// Largest pencil solved densely; larger ones use Lanczos.
    pub dense_limit: usize,
    pub lanczos_steps: usize,
    pub lanczos_tol: f64,
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions { dense_limit: 3000, lanczos_steps: 600, lanczos_tol: 1e-10, seed: 7 }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Spectrum {
    pub min: f64,
    pub max: f64,
    pub size: usize,
    pub method: String,
    pub converged: bool,
}

impl Spectrum {
    pub fn bracket(&self) -> Bracket {
        Bracket { min: self.min, max: self.max }
    }
}

/// Extreme eigenvalues of the pencil `(S, 𝓜)` on the `𝓜`-orthogonal
/// complement of `null` (if given). `op` applies `S`; `dense` forms it.
fn pencil_spectrum(
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    dense: &dyn Fn() -> Result<DMatrix<f64>>,
    mass: &CsrMatrix,
    null: Option<&[f64]>,
    opts: &SpectrumOptions,
) -> Result<Spectrum> {
    let n = mass.nrows();
    let spec = if n <= opts.dense_limit {
        let deflate: Vec<Vec<f64>> = null.map(|c| vec![mass.matvec(c)]).unwrap_or_default();
        let ev = deflated_generalized_eigenvalues(&dense()?, &mass.to_dense(), &deflate)?;
        Spectrum { min: ev[0], max: ev[ev.len() - 1], size: n, method: "dense".into(), converged: true }
    } else {
        let msolve = SparseCholesky::new(mass)?;
        let deflate: Vec<Vec<f64>> = null.map(|c| vec![c.to_vec()]).unwrap_or_default();
        let r = lanczos_extremes(
            n,
            op,
            &|v| mass.matvec(v),
            &|v| msolve.solve(v),
            &deflate,
            opts.lanczos_steps,
            opts.lanczos_tol,
            opts.seed,
        )?;
        Spectrum { min: r.lambda_min, max: r.lambda_max, size: n, method: "lanczos".into(), converged: r.converged }
    };
    if !(spec.min > 1e-10 * spec.max.abs()) {
        return Err(HdgError::SpectralDefect(format!(
            "smallest eigenvalue {:.3e} is not positive relative to {:.3e}; a null direction was not removed",
            spec.min, spec.max
        )));
    }
    Ok(spec)
}

/// `B A⁻¹ Bᵀ` on `(p, p̄)`, with `A` the constrained velocity matrix.
pub struct SchurOperator {
    chol: SparseCholesky,
    b: CsrMatrix,
}

impl SchurOperator {
    pub fn new(bs: &BlockSystem) -> Result<SchurOperator> {
        Ok(SchurOperator { chol: SparseCholesky::new(&bs.velocity_matrix())?, b: bs.divergence_matrix() })
    }

    pub fn apply(&self, q: &[f64]) -> Vec<f64> {
        let v = self.chol.solve(&self.b.matvec_transpose(q));
        self.b.matvec(&v)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.b.nrows();
        let mut out = DMatrix::zeros(n, n);
        let bt = self.b.transpose();
        for j in 0..n {
            let mut col = vec![0.0; bt.nrows()];
            let (rows, vals) = self.b.row(j);
            for (&r, &v) in rows.iter().zip(vals) {
                col[r] = v;
            }
            self.chol.solve_in_place(&mut col);
            out.column_mut(j).copy_from_slice(&self.b.matvec(&col));
        }
        out
    }
}

/// Extreme generalized eigenvalues of `(B A⁻¹ Bᵀ, 𝓜)` with the constant
/// pressure deflated.
pub fn schur_spectrum(bs: &BlockSystem, opts: &SpectrumOptions) -> Result<Spectrum> {
    let op = SchurOperator::new(bs)?;
    let c = bs.spaces.constant_pressure();
    pencil_spectrum(&|v| op.apply(v), &|| Ok(op.to_dense()), &bs.pressure_mass(), Some(&c), opts)
}

/// Extreme generalized eigenvalues of `(𝒞, 𝓜)` with the constant pressure
/// deflated.
pub fn c_spectrum(bs: &BlockSystem, cs: &CondensedSystem, opts: &SpectrumOptions) -> Result<Spectrum> {
    let cmat = cs.c_blockdiag();
    let c = bs.spaces.constant_pressure();
    pencil_spectrum(&|v| cmat.matvec(v), &|| Ok(cmat.to_dense()), &bs.pressure_mass(), Some(&c), opts)
}

/// Largest problem the dense identity and coercivity checks accept.
pub const DENSE_CHECK_LIMIT: usize = 6000;

/// `max |(B̄ Ā⁻¹ B̄ᵀ - C̄) - B A⁻¹ Bᵀ|` by dense construction.
pub fn condensed_schur_identity(bs: &BlockSystem, cs: &CondensedSystem) -> Result<f64> {
    let a = bs.velocity_matrix();
    if a.nrows() > DENSE_CHECK_LIMIT {
        return Err(HdgError::TooLarge { size: a.nrows(), limit: DENSE_CHECK_LIMIT });
    }
    let b = bs.divergence_matrix().to_dense();
    let ainv_bt = a.to_dense().cholesky().ok_or_else(|| HdgError::Eigen("velocity matrix is not SPD".into()))?.solve(&b.transpose());
    let s_full = &b * ainv_bt;
    let bbar = cs.b_bar.to_dense();
    let abar_inv_bt =
        cs.a_bar.to_dense().cholesky().ok_or_else(|| HdgError::Eigen("condensed velocity block is not SPD".into()))?.solve(&bbar.transpose());
    let s_cond = &bbar * abar_inv_bt - cs.c_bar.to_dense();
    Ok((s_cond - s_full).abs().max())
}

/// Velocity vectors on `[u, ū]` that are constant with matching traces.
pub fn constant_velocity_pairs(s: &SpaceSet) -> Vec<Vec<f64>> {
    [[1.0, 0.0], [0.0, 1.0]]
        .iter()
        .map(|&e| {
            let mut v = s.constant_cell_velocity(e);
            v.extend(s.constant_facet_velocity(e));
            v
        })
        .collect()
}

/// Estimates of `c_a^s` and `c_a^b`: extreme eigenvalues of
/// `(A, ⦀·⦀²_v)` on `[u, ū]` without boundary constraints, with the
/// shared null space of constant pairs removed. A non-positive lower value
/// means `a_h` is not coercive for this `α`.
pub fn coercivity_bounds(s: &SpaceSet, alpha: f64) -> Result<Bracket> {
    let n = s.n_u() + s.n_ubar();
    if n > DENSE_CHECK_LIMIT {
        return Err(HdgError::TooLarge { size: n, limit: DENSE_CHECK_LIMIT });
    }
    let a = assemble_a_unconstrained(s, alpha).full().to_dense();
    let v = v_norm_matrix(s, alpha).to_dense();
    let ev = deflated_generalized_eigenvalues(&a, &v, &constant_velocity_pairs(s))?;
    Ok(Bracket { min: ev[0], max: ev[ev.len() - 1] })
}

/// `β_DG^K`: square root of the smallest eigenvalue of
/// `(B₁ D⁻¹ B₁ᵀ, M_K)` on cell `cell`, with `B₁` the cell divergence block
/// and `D` the `DG(K)` norm matrix.
pub fn cell_infsup(s: &SpaceSet, cell: usize, alpha: f64) -> Result<f64> {
    let d = s.cell_data(cell);
    let np = s.np();
    let b1 = element_matrices(s, &d, alpha).b_pu;
    let dg = cell_dg_matrix(s, &d, alpha);
    let x = dg.cholesky().ok_or(HdgError::LocalFactorization { cell, alpha })?.solve(&b1.transpose());
    let schur = &b1 * x;
    let mut mass = DMatrix::zeros(np, np);
    for q in 0..d.points.len() {
        for i in 0..np {
            for j in 0..np {
                mass[(i, j)] += d.weights[q] * d.phi[q][i] * d.phi[q][j];
            }
        }
    }
    let ev = deflated_generalized_eigenvalues(&schur, &mass, &[])?;
    Ok(ev[0].max(0.0).sqrt())
}

/// Smallest and largest `β_DG^K` over all cells.
pub fn cell_infsup_range(s: &SpaceSet, alpha: f64) -> Result<Bracket> {
    let values = (0..s.mesh().n_cells()).map(|c| cell_infsup(s, c, alpha)).collect::<Result<Vec<_>>>()?;
    Ok(Bracket::of(&values))
}

/// Facet inf-sup proxy `β̄_DG`: square root of the smallest eigenvalue of
/// `(B₂ D⁻¹ B₂ᵀ, M̄)` with `B₂` the facet-pressure block and `D` the
/// global DG norm matrix.
pub fn facet_infsup(bs: &BlockSystem, opts: &SpectrumOptions) -> Result<f64> {
    let s = &bs.spaces;
    let nq = s.n_pbar();
    let mut t = TripletBuilder::new(nq, nq);
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let ur = s.cell_u_dofs(c);
        let qdofs = s.cell_pbar_dofs(c);
        let b2 = DMatrix::from_fn(qdofs.len(), ur.len(), |i, j| bs.b_qu.get(qdofs[i], ur.start + j));
        let dg = cell_dg_matrix(s, &d, bs.alpha);
        let x = dg.cholesky().ok_or(HdgError::LocalFactorization { cell: c, alpha: bs.alpha })?.solve(&b2.transpose());
        t.add_block(&qdofs, &qdofs, &(&b2 * x));
    }
    let sm = t.build();
    let spec = pencil_spectrum(&|v| sm.matvec(v), &|| Ok(sm.to_dense()), &bs.mass_pbar, None, opts)?;
    Ok(spec.min.sqrt())
}

/// Rayleigh quotients `ā_h(w̄, w̄) / ⦀w̄⦀²_h` for `samples` random `w̄` with
/// zero boundary values.
pub fn norm_equivalence_samples(cs: &CondensedSystem, h_norm: &CsrMatrix, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let w: Vec<f64> =
                cs.constrained.iter().map(|&con| if con { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
            dot(&w, &cs.a_bar.matvec(&w)) / dot(&w, &h_norm.matvec(&w))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct FieldChecks {
    /// `max |∇·u|` over cell quadrature points.
    pub max_divergence: f64,
    /// `max |[[u·n]]|` over interior facet quadrature points.
    pub max_normal_jump: f64,
    pub velocity_l2: f64,
    pub relative_divergence: f64,
    pub relative_normal_jump: f64,
}

/// Pointwise divergence and normal-jump maxima of a cell velocity `u`.
pub fn field_checks(s: &SpaceSet, u: &[f64]) -> FieldChecks {
    let nv = s.nv();
    let mut max_div: f64 = 0.0;
    let mut l2 = 0.0;
    let mut jumps: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); s.mesh().n_facets()];
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let off = s.cell_u_dofs(c).start;
        for q in 0..d.points.len() {
            let mut div = 0.0;
            let mut val = [0.0; 2];
            for i in 0..nv {
                div += u[off + i] * d.dphi[q][i][0] + u[off + nv + i] * d.dphi[q][i][1];
                val[0] += u[off + i] * d.phi[q][i];
                val[1] += u[off + nv + i] * d.phi[q][i];
            }
            max_div = max_div.max(div.abs());
            l2 += d.weights[q] * (val[0] * val[0] + val[1] * val[1]);
        }
        for fd in &d.facets {
            let flux: Vec<f64> = (0..fd.points.len())
                .map(|q| {
                    (0..nv)
                        .map(|i| (u[off + i] * fd.normal[0] + u[off + nv + i] * fd.normal[1]) * fd.phi[q][i])
                        .sum()
                })
                .collect();
            jumps[fd.facet].push((c, flux));
        }
    }
    let mut max_jump: f64 = 0.0;
    for sides in &jumps {
        if let [(_, a), (_, b)] = sides.as_slice() {
            // Both sides use the stored facet orientation for their points.
            for (x, y) in a.iter().zip(b) {
                max_jump = max_jump.max((x + y).abs());
            }
        }
    }
    let l2 = l2.sqrt();
    let scale = if l2 > 0.0 { l2 } else { 1.0 };
    FieldChecks {
        max_divergence: max_div,
        max_normal_jump: max_jump,
        velocity_l2: l2,
        relative_divergence: max_div / scale,
        relative_normal_jump: max_jump / scale,
    }
}

#[derive(Clone, Debug)]
pub struct SpectraOptions {
    pub spectrum: SpectrumOptions,
    pub norm_samples: usize,
    pub seed: u64,
}

impl Default for SpectraOptions {
    fn default() -> Self {
        SpectraOptions { spectrum: SpectrumOptions::default(), norm_samples: 50, seed: 1 }
    }
}

/// Stability constants measured on one mesh.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SpectraReport {
    pub level: usize,
    pub n_cells: usize,
    pub h_max: f64,
    /// `(B A⁻¹ Bᵀ, 𝓜)`; `√min` bounds `β_p / √c_a^b` from below.
    pub schur: Spectrum,
    /// `(𝒞, 𝓜)`.
    pub c_mass: Spectrum,
    /// `None` when the mesh exceeds the dense limit.
    pub schur_identity_residual: Option<f64>,
    pub coercivity: Option<Bracket>,
    pub cell_infsup: Bracket,
    pub facet_infsup: f64,
    /// `ā_h(w̄, w̄) / ⦀w̄⦀²_h` over random samples.
    pub abar_h_norm: Bracket,
}

impl SpectraReport {
    pub fn compute(bs: &BlockSystem, cs: &CondensedSystem, level: usize, opts: &SpectraOptions) -> Result<SpectraReport> {
        let s = &bs.spaces;
        let dense_ok = s.n_u() + s.n_ubar() <= DENSE_CHECK_LIMIT;
        let h = h_norm_matrix(s);
        Ok(SpectraReport {
            level,
            n_cells: s.mesh().n_cells(),
            h_max: s.mesh().h_max(),
            schur: schur_spectrum(bs, &opts.spectrum)?,
            c_mass: c_spectrum(bs, cs, &opts.spectrum)?,
            schur_identity_residual: if dense_ok { Some(condensed_schur_identity(bs, cs)?) } else { None },
            coercivity: if dense_ok { Some(coercivity_bounds(s, bs.alpha)?) } else { None },
            cell_infsup: cell_infsup_range(s, bs.alpha)?,
            facet_infsup: facet_infsup(bs, &opts.spectrum)?,
            abar_h_norm: Bracket::of(&norm_equivalence_samples(cs, &h, opts.norm_samples, opts.seed)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::condense;
    use crate::mesh::{CellShape, Mesh, Rect};
    use crate::spaces::ProblemSpec;

    fn system(nx: usize) -> (BlockSystem, CondensedSystem) {
        let m = Mesh::generate(nx, nx, CellShape::Triangle, Rect::biunit_square()).unwrap();
        let bs = BlockSystem::assemble(SpaceSet::new(m, 2).unwrap(), &ProblemSpec::lid_driven_cavity(24.0, 2)).unwrap();
        let cs = condense(&bs).unwrap();
        (bs, cs)
    }

    #[test]
    fn constant_pressure_is_in_schur_kernel() {
        let (bs, _) = system(2);
        let op = SchurOperator::new(&bs).unwrap();
        let c = bs.spaces.constant_pressure();
        let rq = dot(&c, &op.apply(&c)) / dot(&c, &bs.pressure_mass().matvec(&c));
        assert!(rq.abs() < 1e-12, "{rq}");
    }

    #[test]
    fn undeflated_pencil_reports_defect() {
        let (bs, _) = system(1);
        let op = SchurOperator::new(&bs).unwrap();
        let r = pencil_spectrum(&|v| op.apply(v), &|| Ok(op.to_dense()), &bs.pressure_mass(), None, &SpectrumOptions::default());
        assert!(matches!(r, Err(HdgError::SpectralDefect(_))));
    }

    #[test]
    fn lanczos_matches_dense_schur_spectrum() {
        let (bs, _) = system(3);
        let dense = schur_spectrum(&bs, &SpectrumOptions::default()).unwrap();
        let lan = schur_spectrum(&bs, &SpectrumOptions { dense_limit: 0, ..Default::default() }).unwrap();
        assert_eq!(lan.method, "lanczos");
        assert!((dense.min - lan.min).abs() < 1e-6 * dense.max);
        assert!((dense.max - lan.max).abs() < 1e-8 * dense.max);
    }

    #[test]
    fn h_norm_vanishes_on_constants_and_matches_hand_value() {
        let m = Mesh::from_cells(CellShape::Triangle, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![vec![0, 1, 2]]).unwrap();
        let s = SpaceSet::new(m, 2).unwrap();
        let h = h_norm_matrix(&s);
        let c = s.constant_facet_velocity([0.7, -1.1]);
        assert!(dot(&c, &h.matvec(&c)).abs() < 1e-13);
        // Facet-wise constants (a, b, c) on the x-component.
        let vals = [1.0, -2.0, 0.5];
        let mut w = vec![0.0; s.n_ubar()];
        let mut hand = 0.0;
        let mut mean = 0.0;
        let mut perim = 0.0;
        for f in 0..3 {
            let len = s.mesh().facet_length(f);
            w[s.facet_ubar_dofs(f).start] = vals[f] * len.sqrt();
            mean += vals[f] * len;
            perim += len;
        }
        mean /= perim;
        for f in 0..3 {
            hand += s.mesh().facet_length(f) * (vals[f] - mean).powi(2);
        }
        hand /= s.mesh().cell_diameter(0);
        assert!((dot(&w, &h.matvec(&w)) - hand).abs() < 1e-12);
    }

    #[test]
    fn v_norm_vanishes_on_constant_pairs() {
        let (bs, _) = system(2);
        let v = v_norm_matrix(&bs.spaces, 24.0);
        for c in constant_velocity_pairs(&bs.spaces) {
            assert!(dot(&c, &v.matvec(&c)).abs() < 1e-11);
        }
        // With a zero trace the v-norm equals the DG norm.
        let dg = dg_norm_matrix(&bs.spaces, 24.0);
        let u: Vec<f64> = (0..bs.n_u()).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut uv = u.clone();
        uv.extend(vec![0.0; bs.n_ubar()]);
        let a = dot(&uv, &v.matvec(&uv));
        let b = dot(&u, &dg.matvec(&u));
        assert!((a - b).abs() < 1e-10 * b);
    }

    #[test]
    fn coercivity_detects_small_penalty() {
        let (bs, _) = system(2);
        assert!(coercivity_bounds(&bs.spaces, 24.0).unwrap().min > 0.0);
        assert!(coercivity_bounds(&bs.spaces, 0.01).unwrap().min <= 0.0);
    }

    #[test]
    fn cell_infsup_is_affine_invariant() {
        let a = Mesh::from_cells(CellShape::Triangle, vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![vec![0, 1, 2]]).unwrap();
        // Same triangle rotated by 90 degrees, scaled by 0.3 and shifted.
        let b = Mesh::from_cells(CellShape::Triangle, vec![[2.0, 1.0], [2.0, 1.3], [1.7, 1.0]], vec![vec![0, 1, 2]]).unwrap();
        for k in 1..=3 {
            let ba = cell_infsup(&SpaceSet::new(a.clone(), k).unwrap(), 0, 24.0).unwrap();
            let bb = cell_infsup(&SpaceSet::new(b.clone(), k).unwrap(), 0, 24.0).unwrap();
            assert!(ba > 0.0);
            assert!((ba - bb).abs() < 1e-12, "k={k}: {ba} vs {bb}");
        }
    }

    #[test]
    fn field_checks_of_zero_are_zero() {
        let (bs, _) = system(2);
        let f = field_checks(&bs.spaces, &vec![0.0; bs.n_u()]);
        assert_eq!((f.max_divergence, f.max_normal_jump, f.relative_divergence), (0.0, 0.0, 0.0));
    }

    #[test]
    fn schur_identity_holds_on_small_mesh() {
        let (bs, cs) = system(1);
        assert!(condensed_schur_identity(&bs, &cs).unwrap() < 1e-10);
    }
}
