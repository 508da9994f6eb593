//! Preconditioned MINRES and right-preconditioned restarted GMRES with
//! true-residual stopping and optional nullspace projection.

use std::time::Instant;

use serde::Serialize;

use crate::error::{HdgError, Result};
use crate::precond::LinearOperator;
use crate::sparse::{axpy, dot, norm2};

#[derive(Clone, Debug)]
pub struct KrylovOptions {
    pub tol: f64,
    pub maxit: usize,
    /// Recompute the true residual every `check_stride` iterations.
    pub check_stride: usize,
    /// GMRES restart length.
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { tol: 1e-8, maxit: 1000, check_stride: 1, restart: 1000 }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SolverReport {
    pub solver: String,
    pub preconditioner: String,
    pub n_dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    /// Relative true residual at each check.
    pub residual_history: Vec<f64>,
    /// Preconditioned residual norm per iteration (MINRES) or the
    /// Arnoldi residual estimate (GMRES), relative to its initial value.
    pub estimate_history: Vec<f64>,
    /// Wall time of the solve in seconds. Not part of the deterministic
    /// content of a report.
    pub wall_time_s: f64,
}

impl SolverReport {
    /// Copy with timing zeroed, for comparing runs.
    pub fn without_timing(&self) -> SolverReport {
        SolverReport { wall_time_s: 0.0, ..self.clone() }
    }
}

/// Orthogonal projection onto the complement of a single vector.
struct Projector(Option<(Vec<f64>, f64)>);

impl Projector {
    fn new(v: Option<&[f64]>) -> Projector {
        Projector(v.map(|v| (v.to_vec(), dot(v, v))))
    }

    fn apply(&self, x: &mut [f64]) {
        if let Some((v, vv)) = &self.0 {
            let s = dot(v, x) / vv;
            axpy(-s, v, x);
        }
    }
}

fn apply(op: &dyn LinearOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; op.dim()];
    op.apply(x, &mut y);
    y
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = apply(op, x);
    b.iter().zip(&ax).map(|(b, a)| b - a).collect()
}

fn check_dims(op: &dyn LinearOperator, pc: &dyn LinearOperator, rhs: &[f64], nullspace: Option<&[f64]>) -> Result<()> {
    let n = op.dim();
    if pc.dim() != n || rhs.len() != n || nullspace.is_some_and(|v| v.len() != n) {
        return Err(HdgError::DimensionMismatch("Krylov operator, preconditioner and right-hand side".into()));
    }
    Ok(())
}

/// Preconditioned MINRES for a symmetric `op` and SPD preconditioner `pc`
/// (`pc` applies the inverse). Returns the iterate and a report.
pub fn minres(
    op: &dyn LinearOperator,
    pc: &dyn LinearOperator,
    rhs: &[f64],
    opts: &KrylovOptions,
    nullspace: Option<&[f64]>,
    pc_name: &str,
) -> Result<(Vec<f64>, SolverReport)> {
    check_dims(op, pc, rhs, nullspace)?;
    let start = Instant::now();
    let n = op.dim();
    let proj = Projector::new(nullspace);
    let mut b = rhs.to_vec();
    proj.apply(&mut b);
    let bnorm = norm2(&b);
    let mut report = SolverReport {
        solver: "MINRES".into(),
        preconditioner: pc_name.into(),
        n_dofs: n,
        iterations: 0,
        converged: false,
        final_residual: 0.0,
        residual_history: vec![],
        estimate_history: vec![],
        wall_time_s: 0.0,
    };
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        report.converged = true;
        return Ok((x, report));
    }
    let stride = opts.check_stride.max(1);
    let mut v_old = vec![0.0; n];
    let mut v = b.clone();
    let mut z = apply(pc, &v);
    let mut gamma = dot(&z, &v);
    if gamma <= 0.0 {
        return Err(HdgError::Breakdown { iteration: 0, reason: "preconditioner is not positive definite".into() });
    }
    gamma = gamma.sqrt();
    let mut gamma_old = 1.0;
    let mut eta = gamma;
    let eta0 = gamma;
    let (mut s_old, mut s) = (0.0, 0.0);
    let (mut c_old, mut c) = (1.0, 1.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    report.residual_history.push(1.0);
    report.estimate_history.push(1.0);
    for j in 1..=opts.maxit {
        z.iter_mut().for_each(|t| *t /= gamma);
        let az = apply(op, &z);
        let delta = dot(&az, &z);
        let mut v_new: Vec<f64> = az;
        axpy(-delta / gamma, &v, &mut v_new);
        axpy(-gamma / gamma_old, &v_old, &mut v_new);
        let z_new = apply(pc, &v_new);
        let gg = dot(&z_new, &v_new);
        if gg < -1e-14 * dot(&v_new, &v_new).max(1e-300) {
            return Err(HdgError::Breakdown { iteration: j, reason: "preconditioner is not positive definite".into() });
        }
        let gamma_new = gg.max(0.0).sqrt();
        let a0 = c * delta - c_old * s * gamma;
        let a1 = (a0 * a0 + gamma_new * gamma_new).sqrt();
        let a2 = s * delta + c_old * c * gamma;
        let a3 = s_old * gamma;
        if a1 == 0.0 {
            return Err(HdgError::Breakdown { iteration: j, reason: "singular tridiagonal projection".into() });
        }
        let c_new = a0 / a1;
        let s_new = gamma_new / a1;
        let mut w_new = z.clone();
        axpy(-a3, &w_old, &mut w_new);
        axpy(-a2, &w, &mut w_new);
        w_new.iter_mut().for_each(|t| *t /= a1);
        axpy(c_new * eta, &w_new, &mut x);
        proj.apply(&mut x);
        eta *= -s_new;
        report.iterations = j;
        report.estimate_history.push(eta.abs() / eta0);
        let last = j == opts.maxit || gamma_new == 0.0;
        if j % stride == 0 || last {
            let rel = norm2(&residual(op, &b, &x)) / bnorm;
            report.residual_history.push(rel);
            report.final_residual = rel;
            if rel <= opts.tol {
                report.converged = true;
                break;
            }
            if gamma_new == 0.0 {
                return Err(HdgError::Breakdown { iteration: j, reason: "Krylov space exhausted above tolerance".into() });
            }
        }
        v_old = std::mem::replace(&mut v, v_new);
        z = z_new;
        gamma_old = gamma;
        gamma = gamma_new;
        w_old = std::mem::replace(&mut w, w_new);
        s_old = s;
        s = s_new;
        c_old = c;
        c = c_new;
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    log::debug!("MINRES ({pc_name}): {} iterations, residual {:.3e}", report.iterations, report.final_residual);
    Ok((x, report))
}

/// Right-preconditioned restarted GMRES: solves `op pc y = rhs`, `x = pc y`.
pub fn gmres_right(
    op: &dyn LinearOperator,
    pc: &dyn LinearOperator,
    rhs: &[f64],
    opts: &KrylovOptions,
    nullspace: Option<&[f64]>,
    pc_name: &str,
) -> Result<(Vec<f64>, SolverReport)> {
    check_dims(op, pc, rhs, nullspace)?;
    if opts.restart == 0 {
        return Err(HdgError::InvalidOption("GMRES restart must be at least 1".into()));
    }
    let start = Instant::now();
    let n = op.dim();
    let proj = Projector::new(nullspace);
    let mut b = rhs.to_vec();
    proj.apply(&mut b);
    let bnorm = norm2(&b);
    let mut report = SolverReport {
        solver: "GMRES".into(),
        preconditioner: pc_name.into(),
        n_dofs: n,
        iterations: 0,
        converged: false,
        final_residual: 0.0,
        residual_history: vec![1.0],
        estimate_history: vec![1.0],
        wall_time_s: 0.0,
    };
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        report.converged = true;
        report.residual_history.clear();
        report.estimate_history.clear();
        return Ok((x, report));
    }
    let m = opts.restart.min(n);
    'outer: while report.iterations < opts.maxit {
        let r = residual(op, &b, &x);
        let beta = norm2(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|t| t / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        for j in 0..m {
            let zj = apply(pc, &basis[j]);
            let mut wv = apply(op, &zj);
            let mut col = vec![0.0; j + 2];
            for (i, q) in basis.iter().enumerate() {
                col[i] = dot(&wv, q);
                axpy(-col[i], q, &mut wv);
            }
            let hn = norm2(&wv);
            col[j + 1] = hn;
            for (i, &(c, s)) in cs.iter().enumerate() {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s * a + c * bb;
            }
            let rho = col[j].hypot(col[j + 1]);
            if rho == 0.0 {
                return Err(HdgError::Breakdown { iteration: report.iterations + 1, reason: "singular Hessenberg matrix".into() });
            }
            let (c, s) = (col[j] / rho, col[j + 1] / rho);
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push((c, s));
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            report.iterations += 1;
            let est = g[j + 1].abs() / bnorm;
            report.estimate_history.push(est);
            let finish = est <= opts.tol || hn == 0.0 || j + 1 == m || report.iterations >= opts.maxit;
            if !finish {
                basis.push(wv.iter().map(|t| t / hn).collect());
                continue;
            }
            // Back substitution and update.
            let k = j + 1;
            let mut y = vec![0.0; k];
            for i in (0..k).rev() {
                let mut t = g[i];
                for l in i + 1..k {
                    t -= h[l][i] * y[l];
                }
                y[i] = t / h[i][i];
            }
            let mut vy = vec![0.0; n];
            for (yi, q) in y.iter().zip(&basis) {
                axpy(*yi, q, &mut vy);
            }
            let dx = apply(pc, &vy);
            axpy(1.0, &dx, &mut x);
            proj.apply(&mut x);
            let rel = norm2(&residual(op, &b, &x)) / bnorm;
            report.residual_history.push(rel);
            report.final_residual = rel;
            if rel <= opts.tol {
                report.converged = true;
                break 'outer;
            }
            if hn == 0.0 && est <= opts.tol {
                return Err(HdgError::Breakdown { iteration: report.iterations, reason: "Krylov space exhausted above tolerance".into() });
            }
            continue 'outer;
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    log::debug!("GMRES ({pc_name}): {} iterations, residual {:.3e}", report.iterations, report.final_residual);
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::Identity;
    use crate::sparse::CsrMatrix;

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let opts = KrylovOptions::default();
        let (x, r) = minres(&Identity(4), &Identity(4), &b, &opts, None, "none").unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
        assert!(x.iter().zip(&b).all(|(a, b)| (a - b).abs() < 1e-14));
        let (_, g) = gmres_right(&Identity(4), &Identity(4), &b, &opts, None, "none").unwrap();
        assert_eq!(g.iterations, 1);
    }

    #[test]
    fn exact_inverse_preconditioner_needs_one_iteration() {
        let d = [1.0, 4.0, 9.0, 0.5, 2.0, 7.0];
        let a = CsrMatrix::from_diagonal(&d);
        let p = CsrMatrix::from_diagonal(&d.map(|v| 1.0 / v));
        let b = vec![1.0; 6];
        let (_, r) = minres(&a, &p, &b, &KrylovOptions::default(), None, "exact").unwrap();
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn three_clusters_converge_in_three() {
        let d: Vec<f64> = (0..30).map(|i| [-2.0, 1.0, 5.0][i % 3]).collect();
        let a = CsrMatrix::from_diagonal(&d);
        let b: Vec<f64> = (0..30).map(|i| 1.0 + i as f64 * 0.1).collect();
        let opts = KrylovOptions { tol: 1e-12, ..Default::default() };
        let (_, r) = minres(&a, &Identity(30), &b, &opts, None, "none").unwrap();
        assert!(r.converged && r.iterations <= 3, "{r:?}");
        let (_, g) = gmres_right(&a, &Identity(30), &b, &opts, None, "none").unwrap();
        assert!(g.converged && g.iterations <= 3, "{g:?}");
    }

    #[test]
    fn minres_estimate_is_monotone_and_projection_holds() {
        // 1D Laplacian with Neumann ends: singular with constant nullspace.
        let n = 40;
        let mut t = crate::sparse::TripletBuilder::new(n, n);
        for i in 0..n {
            let deg = if i == 0 || i == n - 1 { 1.0 } else { 2.0 };
            t.push(i, i, deg);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        let a = t.build();
        let ones = vec![1.0; n];
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let opts = KrylovOptions { tol: 1e-10, ..Default::default() };
        let (x, r) = minres(&a, &Identity(n), &b, &opts, Some(&ones), "none").unwrap();
        assert!(r.converged);
        assert!(r.estimate_history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert!(dot(&x, &ones).abs() <= 1e-10 * norm2(&x));
        let (xg, g) = gmres_right(&a, &Identity(n), &b, &opts, Some(&ones), "none").unwrap();
        assert!(g.converged && g.iterations <= r.iterations);
        assert!(dot(&xg, &ones).abs() <= 1e-10 * norm2(&xg));
    }

    #[test]
    fn maxit_reports_non_convergence() {
        let d: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let a = CsrMatrix::from_diagonal(&d);
        let b = vec![1.0; 50];
        let opts = KrylovOptions { maxit: 3, ..Default::default() };
        let (_, r) = minres(&a, &Identity(50), &b, &opts, None, "none").unwrap();
        assert!(!r.converged && r.iterations == 3);
        let (_, g) = gmres_right(&a, &Identity(50), &b, &opts, None, "none").unwrap();
        assert!(!g.converged && g.iterations == 3);
    }

    #[test]
    fn indefinite_preconditioner_is_rejected() {
        let a = CsrMatrix::identity(3);
        let p = CsrMatrix::from_diagonal(&[1.0, -1.0, 1.0]);
        assert!(matches!(
            minres(&a, &p, &[0.0, 1.0, 0.0], &KrylovOptions::default(), None, "bad"),
            Err(HdgError::Breakdown { .. })
        ));
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let (x, r) = minres(&Identity(3), &Identity(3), &[0.0; 3], &KrylovOptions::default(), None, "none").unwrap();
        assert!(r.converged && r.iterations == 0 && x == vec![0.0; 3]);
    }
}
