//! Cell-wise elimination of the cell velocity.
//!
//! With `𝖴 = (ū, p, p̄)` and `𝖡 = [A_ūu; B_pu; B_p̄u]`, the cell velocity is
//! `u = A_uu⁻¹ (L_u - 𝖡ᵀ 𝖴)` and the condensed system is
//!
//! ```text
//! [ Ā  B̄ᵀ ] [ ū ]   [ L̄ ]
//! [ B̄  C̄  ] [ P ] = [ Ḡ ]
//! ```
//!
//! with `Ā = A_ūū - A_ūu A_uu⁻¹ A_ūuᵀ`, `B̄ = -[B_pu; B_p̄u] A_uu⁻¹ A_ūuᵀ`,
//! `C̄ = -[B_pu; B_p̄u] A_uu⁻¹ [B_pu; B_p̄u]ᵀ`, `L̄ = L_ū - A_ūu A_uu⁻¹ L_u`
//! and `Ḡ = -[B_pu; B_p̄u] A_uu⁻¹ L_u`. Since `A_uu` is block diagonal per
//! cell, every product is a sum of dense cell contributions.

use std::ops::Range;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::assembly::BlockSystem;
use crate::error::{HdgError, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Clone, Debug)]
struct LocalCell {
    chol: Cholesky<f64, Dyn>,
    /// Rows of `𝖡` touching this cell, restricted to its velocity columns.
    coupling: DMatrix<f64>,
    /// Condensed indices of the rows of `coupling`.
    rows: Vec<usize>,
    u_range: Range<usize>,
}

/// Per-cell factorizations of `A_uu` and coupling blocks.
#[derive(Clone, Debug)]
pub struct LocalSolvers {
    cells: Vec<LocalCell>,
    n_u: usize,
}

impl LocalSolvers {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// `A_uu⁻¹ x` cell by cell.
    pub fn solve_auu(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_u];
        for c in &self.cells {
            let b = DVector::from_column_slice(&x[c.u_range.clone()]);
            out[c.u_range.clone()].copy_from_slice(c.chol.solve(&b).as_slice());
        }
        out
    }

    /// Dimension of the cell velocity block of `cell`.
    pub fn local_dim(&self, cell: usize) -> usize {
        self.cells[cell].u_range.len()
    }
}

/// Index ranges of the condensed layout `(ū, p, p̄)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CondensedLayout {
    pub n_ubar: usize,
    pub n_p: usize,
    pub n_pbar: usize,
}

impl CondensedLayout {
    pub fn n(&self) -> usize {
        self.n_ubar + self.n_p + self.n_pbar
    }

    pub fn ubar(&self) -> Range<usize> {
        0..self.n_ubar
    }

    pub fn p(&self) -> Range<usize> {
        self.n_ubar..self.n_ubar + self.n_p
    }

    pub fn pbar(&self) -> Range<usize> {
        self.n_ubar + self.n_p..self.n()
    }

    /// All pressure unknowns `(p, p̄)`.
    pub fn pressure(&self) -> Range<usize> {
        self.n_ubar..self.n()
    }
}

#[derive(Clone, Debug)]
pub struct CondensedSystem {
    pub layout: CondensedLayout,
    /// `[[Ā, B̄ᵀ], [B̄, C̄]]` on `(ū, p, p̄)`.
    pub matrix: CsrMatrix,
    /// `(L̄, Ḡ)`.
    pub rhs: Vec<f64>,
    pub a_bar: CsrMatrix,
    /// Pressure rows `(p, p̄)` against `ū`.
    pub b_bar: CsrMatrix,
    /// Pressure block on `(p, p̄)`.
    pub c_bar: CsrMatrix,
    pub local: LocalSolvers,
    pub l_u: Vec<f64>,
    /// Boundary-constrained facet velocity DOFs.
    pub constrained: Vec<bool>,
}

/// Eliminates the cell velocity from `bs`.
pub fn condense(bs: &BlockSystem) -> Result<CondensedSystem> {
    let s = &bs.spaces;
    let layout = CondensedLayout { n_ubar: s.n_ubar(), n_p: s.n_p(), n_pbar: s.n_pbar() };
    let n = layout.n();
    let a_ub_t = bs.a_bu.transpose();
    let b_pu_t = bs.b_pu.transpose();
    let b_qu_t = bs.b_qu.transpose();
    let mut cells = Vec::with_capacity(s.mesh().n_cells());
    let mut t = TripletBuilder::new(n, n);
    let mut rhs = vec![0.0; n];
    rhs[..layout.n_ubar].copy_from_slice(&bs.l_ubar);
    for c in 0..s.mesh().n_cells() {
        let ur = s.cell_u_dofs(c);
        let nu = ur.len();
        let local = bs.a_uu.submatrix(ur.clone(), ur.clone()).to_dense();
        let chol = Cholesky::new(local).ok_or(HdgError::LocalFactorization { cell: c, alpha: bs.alpha })?;
        // Gather the coupling rows from the transposed blocks (columns = cell velocity).
        let mut rows = Vec::new();
        let mut coupling_rows: Vec<Vec<f64>> = Vec::new();
        for (m_t, offset) in [(&a_ub_t, 0), (&b_pu_t, layout.n_ubar), (&b_qu_t, layout.n_ubar + layout.n_p)] {
            let mut found: Vec<usize> = Vec::new();
            for i in ur.clone() {
                found.extend_from_slice(m_t.row(i).0);
            }
            found.sort_unstable();
            found.dedup();
            for r in found {
                let mut row = vec![0.0; nu];
                for (k, i) in ur.clone().enumerate() {
                    row[k] = m_t.get(i, r);
                }
                rows.push(offset + r);
                coupling_rows.push(row);
            }
        }
        let coupling = DMatrix::from_fn(rows.len(), nu, |i, j| coupling_rows[i][j]);
        let x = chol.solve(&coupling.transpose());
        let schur = &coupling * &x;
        for (i, &ri) in rows.iter().enumerate() {
            for (j, &rj) in rows.iter().enumerate() {
                t.push(ri, rj, -schur[(i, j)]);
            }
        }
        let lu = DVector::from_column_slice(&bs.l_u[ur.clone()]);
        let y = &coupling * chol.solve(&lu);
        for (i, &ri) in rows.iter().enumerate() {
            rhs[ri] -= y[i];
        }
        cells.push(LocalCell { chol, coupling, rows, u_range: ur });
    }
    crate::assembly::push_csr(&mut t, &bs.a_bb, 0, 0, false);
    let matrix = t.build();
    let nb = layout.n_ubar;
    let a_bar = matrix.submatrix(0..nb, 0..nb);
    let b_bar = matrix.submatrix(nb..n, 0..nb);
    let c_bar = matrix.submatrix(nb..n, nb..n);
    log::debug!("condensed system: n = {n}, nnz = {}", matrix.nnz());
    Ok(CondensedSystem {
        layout,
        matrix,
        rhs,
        a_bar,
        b_bar,
        c_bar,
        local: LocalSolvers { cells, n_u: s.n_u() },
        l_u: bs.l_u.clone(),
        constrained: s.constrained_mask().to_vec(),
    })
}

impl CondensedSystem {
    pub fn n(&self) -> usize {
        self.layout.n()
    }

    /// `𝒞₁₁ = B_pu A_uu⁻¹ B_puᵀ`, block diagonal per cell.
    pub fn c11(&self) -> CsrMatrix {
        let r = self.layout.p().start - self.layout.n_ubar..self.layout.p().end - self.layout.n_ubar;
        self.c_bar.submatrix(r.clone(), r).scaled(-1.0)
    }

    /// `𝒞₂₂ = B_p̄u A_uu⁻¹ B_p̄uᵀ`.
    pub fn c22(&self) -> CsrMatrix {
        let off = self.layout.n_ubar;
        let r = self.layout.pbar().start - off..self.layout.pbar().end - off;
        self.c_bar.submatrix(r.clone(), r).scaled(-1.0)
    }

    /// `𝒞 = bdiag(𝒞₁₁, 𝒞₂₂)` on `(p, p̄)`.
    pub fn c_blockdiag(&self) -> CsrMatrix {
        let np = self.layout.n_p;
        let mut t = TripletBuilder::new(self.c_bar.nrows(), self.c_bar.ncols());
        crate::assembly::push_csr(&mut t, &self.c11(), 0, 0, false);
        crate::assembly::push_csr(&mut t, &self.c22(), np, np, false);
        t.build()
    }

    /// `u = A_uu⁻¹ (L_u - 𝖡ᵀ 𝖴)` from a condensed vector `x = (ū, p, p̄)`.
    pub fn recover_velocity_from(&self, x: &[f64], l_u: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.local.n_u];
        for c in &self.local.cells {
            let xl = DVector::from_iterator(c.rows.len(), c.rows.iter().map(|&r| x[r]));
            let b = DVector::from_column_slice(&l_u[c.u_range.clone()]) - c.coupling.transpose() * xl;
            u[c.u_range.clone()].copy_from_slice(c.chol.solve(&b).as_slice());
        }
        u
    }

    /// Recovers the cell velocity from separate `ū`, `p`, `p̄` vectors.
    pub fn recover_velocity(&self, ubar: &[f64], p: &[f64], pbar: &[f64], l_u: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout;
        if ubar.len() != l.n_ubar || p.len() != l.n_p || pbar.len() != l.n_pbar || l_u.len() != self.local.n_u {
            return Err(HdgError::DimensionMismatch("recover_velocity inputs".into()));
        }
        let mut x = ubar.to_vec();
        x.extend_from_slice(p);
        x.extend_from_slice(pbar);
        Ok(self.recover_velocity_from(&x, l_u))
    }

    /// Condensed null vector: zero velocity, constant pressure.
    pub fn pressure_nullspace(&self, constant_pressure: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.layout.n_ubar];
        v.extend_from_slice(constant_pressure);
        v
    }
}
