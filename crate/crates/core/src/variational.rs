//! Function-level evaluation of the reduced velocity form: lift facet data
//! into each cell with the local solver, then integrate `a_h` pointwise.
//!
//! This route shares no matrices with [`crate::assembly`] or
//! [`crate::condense`] and serves as an independent check of `Ā`.

use nalgebra::{DMatrix, DVector};

use crate::error::{HdgError, Result};
use crate::spaces::{CellData, SpaceSet};

/// A vector field on one cell together with a trace on each of its facets,
/// sampled at the quadrature points of [`CellData`].
struct Sampled {
    grad: Vec<[[f64; 2]; 2]>,
    fval: Vec<Vec<[f64; 2]>>,
    fgrad: Vec<Vec<[[f64; 2]; 2]>>,
    trace: Vec<Vec<[f64; 2]>>,
}

fn sample(d: &CellData, nv: usize, nf: usize, cell_coef: &[f64], trace_coef: &[f64]) -> Sampled {
    let field = |phi: &[f64], dphi: &[[f64; 2]]| {
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for c in 0..2 {
            for i in 0..nv {
                let a = cell_coef[c * nv + i];
                v[c] += a * phi[i];
                g[c][0] += a * dphi[i][0];
                g[c][1] += a * dphi[i][1];
            }
        }
        (v, g)
    };
    let grad = d.phi.iter().zip(&d.dphi).map(|(p, g)| field(p, g).1).collect();
    let mut fval = Vec::new();
    let mut fgrad = Vec::new();
    let mut trace = Vec::new();
    for (l, fd) in d.facets.iter().enumerate() {
        let (v, g): (Vec<_>, Vec<_>) = fd.phi.iter().zip(&fd.dphi).map(|(p, g)| field(p, g)).unzip();
        fval.push(v);
        fgrad.push(g);
        let tr = fd
            .psi
            .iter()
            .map(|psi| {
                let mut t = [0.0; 2];
                for c in 0..2 {
                    for j in 0..nf {
                        t[c] += trace_coef[l * 2 * nf + c * nf + j] * psi[j];
                    }
                }
                t
            })
            .collect();
        trace.push(tr);
    }
    Sampled { grad, fval, fgrad, trace }
}

/// `a_K((w, w̄), (v, v̄))` by quadrature on one cell.
fn cell_form(d: &CellData, alpha: f64, w: &Sampled, v: &Sampled) -> f64 {
    let mut s = 0.0;
    for q in 0..d.points.len() {
        let mut gg = 0.0;
        for c in 0..2 {
            for k in 0..2 {
                gg += w.grad[q][c][k] * v.grad[q][c][k];
            }
        }
        s += d.weights[q] * gg;
    }
    let pen = alpha / d.h;
    for (l, fd) in d.facets.iter().enumerate() {
        let n = fd.normal;
        for q in 0..fd.points.len() {
            let mut t = 0.0;
            for c in 0..2 {
                let jw = w.fval[l][q][c] - w.trace[l][q][c];
                let jv = v.fval[l][q][c] - v.trace[l][q][c];
                let dnw = w.fgrad[l][q][c][0] * n[0] + w.fgrad[l][q][c][1] * n[1];
                let dnv = v.fgrad[l][q][c][0] * n[0] + v.fgrad[l][q][c][1] * n[1];
                t += pen * jw * jv - jw * dnv - dnw * jv;
            }
            s += fd.weights[q] * t;
        }
    }
    s
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

/// Lifting of the facet data `trace_coef` (cell-local facet order) into the
/// cell with zero force and pressure data.
fn lift_cell(s: &SpaceSet, d: &CellData, alpha: f64, trace_coef: &[f64]) -> Result<Vec<f64>> {
    let (nv, nf) = (s.nv(), s.nf());
    let nu = 2 * nv;
    let zero_trace = vec![0.0; trace_coef.len()];
    let zero_cell = vec![0.0; nu];
    let tests: Vec<Sampled> = (0..nu).map(|i| sample(d, nv, nf, &unit(nu, i), &zero_trace)).collect();
    let mut k = DMatrix::zeros(nu, nu);
    for i in 0..nu {
        for j in 0..=i {
            let v = cell_form(d, alpha, &tests[j], &tests[i]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let data = sample(d, nv, nf, &zero_cell, trace_coef);
    let rhs = DVector::from_iterator(nu, (0..nu).map(|i| -cell_form(d, alpha, &data, &tests[i])));
    let chol = k.cholesky().ok_or(HdgError::LocalFactorization { cell: d.cell, alpha })?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

fn cell_traces(s: &SpaceSet, c: usize, vbar: &[f64]) -> Vec<f64> {
    s.cell_ubar_dofs(c).into_iter().map(|j| vbar[j]).collect()
}

/// Global lifting `l(v̄)` of a facet velocity vector (constraints ignored).
pub fn lift(s: &SpaceSet, alpha: f64, vbar: &[f64]) -> Result<Vec<f64>> {
    if vbar.len() != s.n_ubar() {
        return Err(HdgError::DimensionMismatch("facet velocity vector".into()));
    }
    let mut u = vec![0.0; s.n_u()];
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let l = lift_cell(s, &d, alpha, &cell_traces(s, c, vbar))?;
        u[s.cell_u_dofs(c)].copy_from_slice(&l);
    }
    Ok(u)
}

/// `ā_h(v̄, w̄) = a_h((l(v̄), v̄), (l(w̄), w̄))`, evaluated by lifting and
/// integrating. Boundary constraints are not applied.
pub fn abar_apply_variational(s: &SpaceSet, alpha: f64, vbar: &[f64], wbar: &[f64]) -> Result<f64> {
    if vbar.len() != s.n_ubar() || wbar.len() != s.n_ubar() {
        return Err(HdgError::DimensionMismatch("facet velocity vector".into()));
    }
    let (nv, nf) = (s.nv(), s.nf());
    let mut total = 0.0;
    for c in 0..s.mesh().n_cells() {
        let d = s.cell_data(c);
        let tv = cell_traces(s, c, vbar);
        let tw = cell_traces(s, c, wbar);
        let lv = lift_cell(s, &d, alpha, &tv)?;
        let lw = lift_cell(s, &d, alpha, &tw)?;
        total += cell_form(&d, alpha, &sample(&d, nv, nf, &lw, &tw), &sample(&d, nv, nf, &lv, &tv));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CellShape, Mesh, Rect};

    #[test]
    fn zero_trace_gives_zero() {
        let s = SpaceSet::new(Mesh::generate(1, 1, CellShape::Triangle, Rect::biunit_square()).unwrap(), 2).unwrap();
        let z = vec![0.0; s.n_ubar()];
        let v: Vec<f64> = (0..s.n_ubar()).map(|i| (i as f64).cos()).collect();
        assert_eq!(abar_apply_variational(&s, 24.0, &v, &z).unwrap(), 0.0);
    }

    #[test]
    fn lifting_reproduces_constants() {
        let m = Mesh::generate(3, 3, CellShape::Triangle, Rect::biunit_square()).unwrap().jittered(0.2, 8).unwrap();
        let s = SpaceSet::new(m, 2).unwrap();
        let vbar = s.constant_facet_velocity([0.3, -0.8]);
        let u = lift(&s, 24.0, &vbar).unwrap();
        let expect = s.constant_cell_velocity([0.3, -0.8]);
        for (a, b) in u.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-11);
        }
        assert!(abar_apply_variational(&s, 24.0, &vbar, &vbar).unwrap().abs() < 1e-10);
    }
}
