//! Sparse Cholesky and dense symmetric eigenvalue routines (backed by faer),
//! deflated generalized eigenvalue problems, and a Lanczos estimator for
//! extreme eigenvalues of large pencils.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HdgError, Result};
use crate::sparse::{dot, CsrMatrix};

/// Sparse `LLᵀ` factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseCholesky(n = {})", self.n)
    }
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<SparseCholesky> {
        if a.nrows() != a.ncols() {
            return Err(HdgError::DimensionMismatch(format!("Cholesky of a {}x{} matrix", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        // Rows of a symmetric CSR matrix are its columns; keep the lower triangle.
        let mut trip = Vec::with_capacity(a.nnz() / 2 + n);
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j >= i {
                    trip.push(Triplet::new(j, i, v));
                }
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| HdgError::SparseFactorization(format!("{e:?}")))?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|e| HdgError::SparseFactorization(format!("{e:?}")))?;
        Ok(SparseCholesky { n, llt })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let mut m = faer::MatMut::from_column_major_slice_mut(x, self.n, 1);
        self.llt.solve_in_place(m.as_mut());
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for every column of `b`.
    pub fn solve_columns(&self, b: &mut Mat<f64>) {
        self.llt.solve_in_place(b.as_mut());
    }
}

/// Sparse LU factorization of a general nonsingular matrix.
pub struct SparseLu {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SparseLu(n = {})", self.n)
    }
}

impl SparseLu {
    pub fn new(a: &CsrMatrix) -> Result<SparseLu> {
        if a.nrows() != a.ncols() {
            return Err(HdgError::DimensionMismatch(format!("LU of a {}x{} matrix", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let mut trip = Vec::with_capacity(a.nnz());
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                trip.push(Triplet::new(i, j, v));
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
            .map_err(|e| HdgError::SparseFactorization(format!("{e:?}")))?;
        let lu = m.sp_lu().map_err(|e| HdgError::SparseFactorization(format!("{e:?}")))?;
        Ok(SparseLu { n, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        let mut m = faer::MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
        self.lu.solve_in_place(m.as_mut());
        x
    }
}

pub fn to_faer(a: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn from_faer(a: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(a: &Mat<f64>) -> Result<Vec<f64>> {
    a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| HdgError::Eigen(format!("{e:?}")))
}

/// Applies `H = I - 2 w wᵀ` (with `|w| = 1`) from both sides.
fn reflect_both_sides(a: &mut Mat<f64>, w: &[f64]) {
    let n = a.nrows();
    // a <- H a
    for j in 0..n {
        let s: f64 = (0..n).map(|i| w[i] * a[(i, j)]).sum();
        for i in 0..n {
            a[(i, j)] -= 2.0 * s * w[i];
        }
    }
    // a <- a H
    for i in 0..n {
        let s: f64 = (0..n).map(|j| a[(i, j)] * w[j]).sum();
        for j in 0..n {
            a[(i, j)] -= 2.0 * s * w[j];
        }
    }
}

/// Householder vectors `w_1..w_m` with `H_m ... H_1 N = [R; 0]` for the
/// columns `N` of `vecs`.
fn householder_vectors(vecs: &[Vec<f64>], n: usize) -> Result<Vec<Vec<f64>>> {
    let mut cols: Vec<Vec<f64>> = vecs.to_vec();
    let mut ws = Vec::with_capacity(cols.len());
    for k in 0..cols.len() {
        let x = &cols[k];
        let norm_tail: f64 = x[k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm_tail < 1e-300 {
            return Err(HdgError::Eigen("deflation vectors are linearly dependent".into()));
        }
        let mut w = vec![0.0; n];
        let alpha = if x[k] >= 0.0 { -norm_tail } else { norm_tail };
        w[k..].copy_from_slice(&x[k..]);
        w[k] -= alpha;
        let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        w.iter_mut().for_each(|v| *v /= wn);
        for c in cols.iter_mut().skip(k) {
            let s = dot(&w, c);
            for i in 0..n {
                c[i] -= 2.0 * s * w[i];
            }
        }
        ws.push(w);
    }
    Ok(ws)
}

/// Eigenvalues of the pencil `(A, B)` restricted to the subspace orthogonal
/// (in the Euclidean inner product) to `deflate`.
///
/// To deflate an eigenvector `c` of the pencil, pass `B c`: the Euclidean
/// complement of `B c` is the `B`-orthogonal complement of `c`, which is
/// invariant. For vectors in the common nullspace of `A` and `B`, pass the
/// vectors themselves. `B` must be positive definite on the complement.
pub fn deflated_generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>, deflate: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n || deflate.iter().any(|v| v.len() != n) {
        return Err(HdgError::DimensionMismatch("generalized eigenproblem operands".into()));
    }
    let m = deflate.len();
    let mut fa = to_faer(a);
    let mut fb = to_faer(b);
    for w in householder_vectors(deflate, n)? {
        reflect_both_sides(&mut fa, &w);
        reflect_both_sides(&mut fb, &w);
    }
    let k = n - m;
    let a22 = Mat::from_fn(k, k, |i, j| 0.5 * (fa[(m + i, m + j)] + fa[(m + j, m + i)]));
    let b22 = Mat::from_fn(k, k, |i, j| 0.5 * (fb[(m + i, m + j)] + fb[(m + j, m + i)]));
    let llt = b22
        .llt(Side::Lower)
        .map_err(|e| HdgError::Eigen(format!("right-hand matrix not positive definite on the complement: {e:?}")))?;
    let l = llt.L().to_owned();
    // C = L⁻¹ A L⁻ᵀ
    let mut x = a22;
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), faer::Par::Seq);
    let mut xt = x.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), xt.as_mut(), faer::Par::Seq);
    let c = Mat::from_fn(k, k, |i, j| 0.5 * (xt[(i, j)] + xt[(j, i)]));
    symmetric_eigenvalues(&c)
}

/// Extreme eigenvalue estimates from Lanczos.
#[derive(Clone, Copy, Debug)]
pub struct LanczosResult {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Lanczos with full reorthogonalization for the pencil `(S, M)`, run in the
/// `M` inner product on the `M`-orthogonal complement of `deflate`.
///
/// `op` applies `S`, `mass` applies `M` and `mass_solve` applies `M⁻¹`.
#[allow(clippy::too_many_arguments)]
pub fn lanczos_extremes(
    n: usize,
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    mass: &dyn Fn(&[f64]) -> Vec<f64>,
    mass_solve: &dyn Fn(&[f64]) -> Vec<f64>,
    deflate: &[Vec<f64>],
    max_steps: usize,
    tol: f64,
    seed: u64,
) -> Result<LanczosResult> {
    lanczos_self_adjoint(n, &|v| mass_solve(&op(v)), mass, deflate, max_steps, tol, seed)
}

/// Extreme eigenvalues of an operator `T` that is self-adjoint in the `M`
/// inner product, restricted to the `M`-orthogonal complement of `deflate`.
pub fn lanczos_self_adjoint(
    n: usize,
    t_op: &dyn Fn(&[f64]) -> Vec<f64>,
    mass: &dyn Fn(&[f64]) -> Vec<f64>,
    deflate: &[Vec<f64>],
    max_steps: usize,
    tol: f64,
    seed: u64,
) -> Result<LanczosResult> {
    // M-orthonormal deflation basis.
    let mut dbasis: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for d in deflate {
        let mut v = d.clone();
        for (q, mq) in &dbasis {
            let s = dot(mq, &v);
            crate::sparse::axpy(-s, q, &mut v);
        }
        let mv = mass(&v);
        let nrm = dot(&v, &mv).sqrt();
        dbasis.push((v.iter().map(|x| x / nrm).collect(), mv.iter().map(|x| x / nrm).collect()));
    }
    let project = |v: &mut Vec<f64>, basis: &[(Vec<f64>, Vec<f64>)]| {
        for (q, mq) in basis {
            let s = dot(mq, v);
            crate::sparse::axpy(-s, q, v);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    project(&mut v, &dbasis);
    let mv = mass(&v);
    let nrm = dot(&v, &mv).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    let mut basis: Vec<(Vec<f64>, Vec<f64>)> = vec![(v, mv.iter().map(|x| x / nrm).collect())];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev = (f64::NAN, f64::NAN);
    let steps = max_steps.min(n.saturating_sub(deflate.len()));
    for j in 0..steps {
        let mut w = t_op(&basis[j].0);
        let a = dot(&basis[j].1, &w);
        alphas.push(a);
        // Two passes of classical Gram-Schmidt in the M inner product.
        for _ in 0..2 {
            project(&mut w, &dbasis);
            project(&mut w, &basis);
        }
        let mw = mass(&w);
        let b = dot(&w, &mw).max(0.0).sqrt();
        let ev = tridiagonal_eigenvalues(&alphas, &betas);
        let cur = (ev[0], ev[ev.len() - 1]);
        let scale = cur.1.abs().max(cur.0.abs()).max(1e-300);
        let done = (cur.0 - prev.0).abs() < tol * scale && (cur.1 - prev.1).abs() < tol * scale;
        prev = cur;
        if (done && j >= 4) || b < 1e-12 * scale || j + 1 == steps {
            return Ok(LanczosResult { lambda_min: cur.0, lambda_max: cur.1, steps: j + 1, converged: done || b < 1e-12 * scale });
        }
        betas.push(b);
        basis.push((w.iter().map(|x| x / b).collect(), mw.iter().map(|x| x / b).collect()));
    }
    Err(HdgError::Eigen("Lanczos made no progress".into()))
}

fn tridiagonal_eigenvalues(alphas: &[f64], betas: &[f64]) -> Vec<f64> {
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let mut ev: Vec<f64> = t.symmetric_eigenvalues().iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &x * x.transpose() + DMatrix::identity(n, n) * (n as f64)
    }

    #[test]
    fn sparse_cholesky_solves() {
        let a = spd(12, 1);
        let csr = CsrMatrix::from_dense(&a);
        let chol = SparseCholesky::new(&csr).unwrap();
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = chol.solve(&b);
        let r = csr.matvec(&x);
        for i in 0..12 {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_diagonal(&[1.0, -1.0, 2.0]);
        assert!(SparseCholesky::new(&a).is_err());
    }

    #[test]
    fn generalized_eigenvalues_match_nalgebra() {
        let a = spd(8, 2);
        let b = spd(8, 3);
        let ev = deflated_generalized_eigenvalues(&a, &b, &[]).unwrap();
        let l = b.clone().cholesky().unwrap().l();
        let li = l.clone().try_inverse().unwrap();
        let c = &li * &a * li.transpose();
        let mut ref_ev: Vec<f64> = c.symmetric_eigenvalues().iter().cloned().collect();
        ref_ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in ev.iter().zip(&ref_ev) {
            assert!((x - y).abs() < 1e-10 * y.abs().max(1.0));
        }
    }

    #[test]
    fn deflation_removes_known_eigenvector() {
        // A = diag(0, 1, 2, 3) in a rotated frame with B = I; deflating the
        // zero eigenvector leaves {1, 2, 3}.
        let n = 4;
        let q = spd(n, 9).qr().q();
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0]));
        let a = &q * d * q.transpose();
        let null: Vec<f64> = q.column(0).iter().cloned().collect();
        let ev = deflated_generalized_eigenvalues(&a, &DMatrix::identity(n, n), &[null]).unwrap();
        assert_eq!(ev.len(), 3);
        for (x, y) in ev.iter().zip([1.0, 2.0, 3.0]) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn lanczos_finds_extremes() {
        let n = 200;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 / 10.0).collect();
        let mdiag: Vec<f64> = (0..n).map(|i| 1.0 + (i % 3) as f64).collect();
        // Pencil (diag * mdiag, mdiag) has eigenvalues diag.
        let op = |x: &[f64]| x.iter().enumerate().map(|(i, v)| diag[i] * mdiag[i] * v).collect::<Vec<_>>();
        let mass = |x: &[f64]| x.iter().enumerate().map(|(i, v)| mdiag[i] * v).collect::<Vec<_>>();
        let msolve = |x: &[f64]| x.iter().enumerate().map(|(i, v)| v / mdiag[i]).collect::<Vec<_>>();
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        let r = lanczos_extremes(n, &op, &mass, &msolve, &[e0], 200, 1e-12, 1).unwrap();
        assert!((r.lambda_min - 1.1).abs() < 1e-8, "{r:?}");
        assert!((r.lambda_max - diag[n - 1]).abs() < 1e-8);
    }
}
