//! Element matrices of the HDG Stokes forms and global block assembly.
//!
//! Full-system layout is `[u, ū, p, p̄]`; the matrix is
//! `[[A_uu, A_ūuᵀ, B_puᵀ, B_p̄uᵀ], [A_ūu, A_ūū, 0, 0], [B_pu, 0, 0, 0], [B_p̄u, 0, 0, 0]]`.
//! Facet velocity DOFs on the boundary are eliminated symmetrically: their
//! rows and columns are zeroed, the diagonal set to one and the right-hand
//! side set to the boundary value.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::spaces::{CellData, ProblemSpec, SpaceSet};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Local matrices of one cell. Facet rows are ordered by local facet, then
/// component, then facet mode.
#[derive(Clone, Debug)]
pub struct ElementMatrices {
    /// Cell velocity block, `2nv x 2nv`.
    pub a_uu: DMatrix<f64>,
    /// Facet velocity vs cell velocity, `(nfacets * 2nf) x 2nv`.
    pub a_bu: DMatrix<f64>,
    /// Facet velocity block, `(nfacets * 2nf)` square (block diagonal per facet).
    pub a_bb: DMatrix<f64>,
    /// Cell pressure vs cell velocity, `np x 2nv`.
    pub b_pu: DMatrix<f64>,
    /// Facet pressure vs cell velocity, `(nfacets * nf) x 2nv`.
    pub b_qu: DMatrix<f64>,
}

/// The scalar part of the cell velocity block: gradient, penalty and the two
/// consistency terms.
fn scalar_uu(d: &CellData, alpha: f64, nv: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(nv, nv);
    for q in 0..d.points.len() {
        let w = d.weights[q];
        let g = &d.dphi[q];
        for i in 0..nv {
            for j in 0..nv {
                s[(i, j)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    let pen = alpha / d.h;
    for fd in &d.facets {
        let n = fd.normal;
        for q in 0..fd.points.len() {
            let w = fd.weights[q];
            let v = &fd.phi[q];
            let dn: Vec<f64> = fd.dphi[q].iter().map(|g| g[0] * n[0] + g[1] * n[1]).collect();
            for i in 0..nv {
                for j in 0..nv {
                    s[(i, j)] += w * (pen * v[i] * v[j] - v[j] * dn[i] - dn[j] * v[i]);
                }
            }
        }
    }
    s
}

pub fn element_matrices(s: &SpaceSet, d: &CellData, alpha: f64) -> ElementMatrices {
    let (nv, np, nf) = (s.nv(), s.np(), s.nf());
    let nfac = d.facets.len();
    let su = scalar_uu(d, alpha, nv);
    let mut a_uu = DMatrix::zeros(2 * nv, 2 * nv);
    for c in 0..2 {
        a_uu.view_mut((c * nv, c * nv), (nv, nv)).copy_from(&su);
    }
    let pen = alpha / d.h;
    let mut a_bu = DMatrix::zeros(nfac * 2 * nf, 2 * nv);
    let mut a_bb = DMatrix::zeros(nfac * 2 * nf, nfac * 2 * nf);
    let mut b_qu = DMatrix::zeros(nfac * nf, 2 * nv);
    for (l, fd) in d.facets.iter().enumerate() {
        let n = fd.normal;
        let mut cpl = DMatrix::zeros(nf, nv);
        let mut mass = DMatrix::zeros(nf, nf);
        let mut flux = [DMatrix::zeros(nf, nv), DMatrix::zeros(nf, nv)];
        for q in 0..fd.points.len() {
            let w = fd.weights[q];
            let v = &fd.phi[q];
            let psi = &fd.psi[q];
            for m in 0..nf {
                for j in 0..nv {
                    let dn = fd.dphi[q][j][0] * n[0] + fd.dphi[q][j][1] * n[1];
                    cpl[(m, j)] += w * psi[m] * (-pen * v[j] + dn);
                    flux[0][(m, j)] += w * psi[m] * v[j] * n[0];
                    flux[1][(m, j)] += w * psi[m] * v[j] * n[1];
                }
                for m2 in 0..nf {
                    mass[(m, m2)] += w * pen * psi[m] * psi[m2];
                }
            }
        }
        for c in 0..2 {
            let r = l * 2 * nf + c * nf;
            a_bu.view_mut((r, c * nv), (nf, nv)).copy_from(&cpl);
            a_bb.view_mut((r, r), (nf, nf)).copy_from(&mass);
            b_qu.view_mut((l * nf, c * nv), (nf, nv)).copy_from(&flux[c]);
        }
    }
    let mut b_pu = DMatrix::zeros(np, 2 * nv);
    for q in 0..d.points.len() {
        let w = d.weights[q];
        for i in 0..np {
            for c in 0..2 {
                for j in 0..nv {
                    b_pu[(i, c * nv + j)] -= w * d.phi[q][i] * d.dphi[q][j][c];
                }
            }
        }
    }
    ElementMatrices { a_uu, a_bu, a_bb, b_pu, b_qu }
}

/// Velocity blocks of the full system.
#[derive(Clone, Debug)]
pub struct ABlocks {
    pub a_uu: CsrMatrix,
    pub a_bu: CsrMatrix,
    pub a_bb: CsrMatrix,
}

impl ABlocks {
    /// The velocity matrix `[[A_uu, A_ūuᵀ], [A_ūu, A_ūū]]` on `[u, ū]`.
    pub fn full(&self) -> CsrMatrix {
        let (nu, nb) = (self.a_uu.nrows(), self.a_bb.nrows());
        let mut t = TripletBuilder::new(nu + nb, nu + nb);
        push_csr(&mut t, &self.a_uu, 0, 0, false);
        push_csr(&mut t, &self.a_bu, nu, 0, false);
        push_csr(&mut t, &self.a_bu, 0, nu, true);
        push_csr(&mut t, &self.a_bb, nu, nu, false);
        t.build()
    }
}

/// Adds `m` (or `mᵀ`) into `t` with its top-left corner at `(r0, c0)`.
pub(crate) fn push_csr(t: &mut TripletBuilder, m: &CsrMatrix, r0: usize, c0: usize, transpose: bool) {
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if transpose {
                t.push(r0 + j, c0 + i, v);
            } else {
                t.push(r0 + i, c0 + j, v);
            }
        }
    }
}

/// Velocity blocks without boundary elimination.
pub fn assemble_a_unconstrained(s: &SpaceSet, alpha: f64) -> ABlocks {
    assemble_a_impl(s, alpha, false)
}

/// Velocity blocks with boundary facet DOFs replaced by identity rows.
pub fn assemble_a(s: &SpaceSet, alpha: f64) -> ABlocks {
    assemble_a_impl(s, alpha, true)
}

fn assemble_a_impl(s: &SpaceSet, alpha: f64, constrain: bool) -> ABlocks {
    let nc = s.mesh().n_cells();
    let nu_k = 2 * s.nv();
    let mut uu = TripletBuilder::with_capacity(s.n_u(), s.n_u(), nc * nu_k * nu_k);
    let mut bu = TripletBuilder::new(s.n_ubar(), s.n_u());
    let mut bb = TripletBuilder::new(s.n_ubar(), s.n_ubar());
    for c in 0..nc {
        let d = s.cell_data(c);
        let e = element_matrices(s, &d, alpha);
        let udofs: Vec<usize> = s.cell_u_dofs(c).collect();
        let bdofs = s.cell_ubar_dofs(c);
        uu.add_block(&udofs, &udofs, &e.a_uu);
        for (i, &r) in bdofs.iter().enumerate() {
            if constrain && s.is_constrained(r) {
                continue;
            }
            for (j, &col) in udofs.iter().enumerate() {
                bu.push(r, col, e.a_bu[(i, j)]);
            }
            for (j, &col) in bdofs.iter().enumerate() {
                if constrain && s.is_constrained(col) {
                    continue;
                }
                if e.a_bb[(i, j)] != 0.0 {
                    bb.push(r, col, e.a_bb[(i, j)]);
                }
            }
        }
    }
    if constrain {
        for j in s.constrained_dofs() {
            bb.push(j, j, 1.0);
        }
    }
    ABlocks { a_uu: uu.build(), a_bu: bu.build(), a_bb: bb.build() }
}

/// Returns `(B_pu, B_p̄u)`.
pub fn assemble_b(s: &SpaceSet) -> (CsrMatrix, CsrMatrix) {
    let mut pu = TripletBuilder::new(s.n_p(), s.n_u());
    let mut qu = TripletBuilder::new(s.n_pbar(), s.n_u());
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let e = element_matrices(s, &d, 1.0);
        let udofs: Vec<usize> = s.cell_u_dofs(c).collect();
        let pdofs: Vec<usize> = s.cell_p_dofs(c).collect();
        pu.add_block(&pdofs, &udofs, &e.b_pu);
        qu.add_block(&s.cell_pbar_dofs(c), &udofs, &e.b_qu);
    }
    (pu.build(), qu.build())
}

/// Returns `(M, M̄)`: the cell pressure mass matrix and the facet pressure
/// mass matrix weighted by the sum of `h_K` over adjacent cells.
pub fn assemble_mass(s: &SpaceSet) -> (CsrMatrix, CsrMatrix) {
    let np = s.np();
    let nf = s.nf();
    let mut m = TripletBuilder::new(s.n_p(), s.n_p());
    let mut mb = TripletBuilder::new(s.n_pbar(), s.n_pbar());
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let mut local = DMatrix::zeros(np, np);
        for q in 0..d.points.len() {
            for i in 0..np {
                for j in 0..np {
                    local[(i, j)] += d.weights[q] * d.phi[q][i] * d.phi[q][j];
                }
            }
        }
        let pdofs: Vec<usize> = s.cell_p_dofs(c).collect();
        m.add_block(&pdofs, &pdofs, &local);
        for fd in &d.facets {
            let mut fm = DMatrix::zeros(nf, nf);
            for q in 0..fd.points.len() {
                for i in 0..nf {
                    for j in 0..nf {
                        fm[(i, j)] += d.h * fd.weights[q] * fd.psi[q][i] * fd.psi[q][j];
                    }
                }
            }
            let fdofs: Vec<usize> = s.facet_pbar_dofs(fd.facet).collect();
            mb.add_block(&fdofs, &fdofs, &fm);
        }
    }
    (m.build(), mb.build())
}

/// Returns `(L_u, L_ū)` for body force `f` and boundary coefficients `g`
/// (as produced by [`SpaceSet::interpolate_boundary`]).
pub fn assemble_rhs(s: &SpaceSet, problem: &ProblemSpec, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nv = s.nv();
    let mut lu = vec![0.0; s.n_u()];
    let mut lb = vec![0.0; s.n_ubar()];
    let has_bc = g.iter().any(|&v| v != 0.0);
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let u0 = s.cell_u_dofs(c).start;
        for q in 0..d.points.len() {
            let f = (problem.force)(d.points[q]);
            for comp in 0..2 {
                for i in 0..nv {
                    lu[u0 + comp * nv + i] += d.weights[q] * f[comp] * d.phi[q][i];
                }
            }
        }
        if has_bc {
            // Move the coupling to eliminated facet DOFs to the right-hand side.
            let e = element_matrices(s, &d, problem.alpha);
            let bdofs = s.cell_ubar_dofs(c);
            let gl = DVector::from_iterator(bdofs.len(), bdofs.iter().map(|&j| if s.is_constrained(j) { g[j] } else { 0.0 }));
            let corr = e.a_bu.transpose() * gl;
            for i in 0..2 * nv {
                lu[u0 + i] -= corr[i];
            }
        }
    }
    for j in s.constrained_dofs() {
        lb[j] = g[j];
    }
    (lu, lb)
}

/// All blocks and right-hand sides of the discrete Stokes system.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    pub spaces: SpaceSet,
    pub alpha: f64,
    pub a_uu: CsrMatrix,
    pub a_bu: CsrMatrix,
    pub a_bb: CsrMatrix,
    pub b_pu: CsrMatrix,
    pub b_qu: CsrMatrix,
    pub mass_p: CsrMatrix,
    pub mass_pbar: CsrMatrix,
    pub l_u: Vec<f64>,
    pub l_ubar: Vec<f64>,
    /// Boundary values of the facet velocity (zero off the boundary).
    pub boundary_values: Vec<f64>,
}

impl BlockSystem {
    pub fn assemble(spaces: SpaceSet, problem: &ProblemSpec) -> Result<BlockSystem> {
        problem.validate()?;
        if problem.degree != spaces.degree() {
            return Err(crate::HdgError::DimensionMismatch(format!(
                "problem degree {} does not match space degree {}",
                problem.degree,
                spaces.degree()
            )));
        }
        let a = assemble_a(&spaces, problem.alpha);
        let (b_pu, b_qu) = assemble_b(&spaces);
        let (mass_p, mass_pbar) = assemble_mass(&spaces);
        let g = spaces.interpolate_boundary(&*problem.boundary);
        let (l_u, l_ubar) = assemble_rhs(&spaces, problem, &g);
        log::debug!(
            "assembled block system: n_u={} n_ubar={} n_p={} n_pbar={}",
            spaces.n_u(),
            spaces.n_ubar(),
            spaces.n_p(),
            spaces.n_pbar()
        );
        Ok(BlockSystem {
            alpha: problem.alpha,
            a_uu: a.a_uu,
            a_bu: a.a_bu,
            a_bb: a.a_bb,
            b_pu,
            b_qu,
            mass_p,
            mass_pbar,
            l_u,
            l_ubar,
            boundary_values: g,
            spaces,
        })
    }

    pub fn n_u(&self) -> usize {
        self.spaces.n_u()
    }

    pub fn n_ubar(&self) -> usize {
        self.spaces.n_ubar()
    }

    pub fn n_p(&self) -> usize {
        self.spaces.n_p()
    }

    pub fn n_pbar(&self) -> usize {
        self.spaces.n_pbar()
    }

    /// `A = [[A_uu, A_ūuᵀ], [A_ūu, A_ūū]]` on `[u, ū]`.
    pub fn velocity_matrix(&self) -> CsrMatrix {
        ABlocks { a_uu: self.a_uu.clone(), a_bu: self.a_bu.clone(), a_bb: self.a_bb.clone() }.full()
    }

    /// `B = [[B_pu, 0], [B_p̄u, 0]]` on rows `[p, p̄]` and columns `[u, ū]`.
    pub fn divergence_matrix(&self) -> CsrMatrix {
        let (nu, nb, np, nq) = (self.n_u(), self.n_ubar(), self.n_p(), self.n_pbar());
        let mut t = TripletBuilder::new(np + nq, nu + nb);
        push_csr(&mut t, &self.b_pu, 0, 0, false);
        push_csr(&mut t, &self.b_qu, np, 0, false);
        t.build()
    }

    /// `𝓜 = bdiag(M, M̄)`.
    pub fn pressure_mass(&self) -> CsrMatrix {
        let (np, nq) = (self.n_p(), self.n_pbar());
        let mut t = TripletBuilder::new(np + nq, np + nq);
        push_csr(&mut t, &self.mass_p, 0, 0, false);
        push_csr(&mut t, &self.mass_pbar, np, np, false);
        t.build()
    }

    /// The full saddle-point matrix on `[u, ū, p, p̄]`.
    pub fn full_matrix(&self) -> CsrMatrix {
        let a = self.velocity_matrix();
        let b = self.divergence_matrix();
        let nv = a.nrows();
        let n = nv + b.nrows();
        let mut t = TripletBuilder::new(n, n);
        push_csr(&mut t, &a, 0, 0, false);
        push_csr(&mut t, &b, nv, 0, false);
        push_csr(&mut t, &b, 0, nv, true);
        t.build()
    }

    /// Right-hand side of the full system on `[u, ū, p, p̄]`.
    pub fn full_rhs(&self) -> Vec<f64> {
        let mut r = self.l_u.clone();
        r.extend_from_slice(&self.l_ubar);
        r.resize(r.len() + self.n_p() + self.n_pbar(), 0.0);
        r
    }
}
