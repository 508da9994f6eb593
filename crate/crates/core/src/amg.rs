//! Smoothed-aggregation algebraic multigrid for symmetric positive definite
//! matrices with a blocked node structure and a given near-null space.
//!
//! Strength of connection uses Frobenius norms of node blocks; aggregation is
//! greedy; the tentative prolongator orthonormalizes the near-null space on
//! each aggregate; prolongation is smoothed by one damped Jacobi step. The
//! V-cycle uses forward Gauss-Seidel before and backward Gauss-Seidel after
//! the coarse correction, so a cycle from a zero guess is symmetric.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{HdgError, Result};
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Clone, Debug)]
pub struct AmgParams {
    /// Strength threshold on the finest level; halved on every coarser level.
    pub theta: f64,
    pub max_levels: usize,
    /// Coarsening stops once a level has at most this many unknowns.
    pub coarse_size: usize,
    pub presweeps: usize,
    pub postsweeps: usize,
}

impl Default for AmgParams {
    fn default() -> Self {
        AmgParams { theta: 0.08, max_levels: 12, coarse_size: 300, presweeps: 1, postsweeps: 1 }
    }
}

#[derive(Clone, Debug)]
struct Level {
    a: CsrMatrix,
    /// Prolongation from the next coarser level.
    p: CsrMatrix,
    r: CsrMatrix,
}

#[derive(Clone, Debug)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse: Cholesky<f64, Dyn>,
    coarse_a: CsrMatrix,
    params: AmgParams,
}

/// Summary of a hierarchy: unknowns and nonzeros per level.
#[derive(Clone, Debug, serde::Serialize)]
pub struct HierarchyInfo {
    pub sizes: Vec<usize>,
    pub nnz: Vec<usize>,
}

impl AmgHierarchy {
    /// Builds a hierarchy for `a`. Node `i` owns unknowns
    /// `i * block..(i + 1) * block`; `near_null` holds the columns of the
    /// near-null space on the finest level. Coarse nodes are aggregates and
    /// own as many unknowns as the near-null space has independent columns
    /// on them.
    pub fn new(a: &CsrMatrix, block: usize, near_null: &[Vec<f64>], params: AmgParams) -> Result<AmgHierarchy> {
        let n = a.nrows();
        if block == 0 || !n.is_multiple_of(block) || near_null.iter().any(|v| v.len() != n) || near_null.is_empty() {
            return Err(HdgError::DimensionMismatch("multigrid block structure".into()));
        }
        let mut levels = Vec::new();
        let mut cur = a.clone();
        let mut b = near_null.to_vec();
        let mut nodes: Vec<usize> = (0..n).map(|i| i / block).collect();
        let mut theta = params.theta;
        while cur.nrows() > params.coarse_size && levels.len() + 1 < params.max_levels {
            let n_nodes = nodes.last().map_or(0, |&m| m + 1);
            let strong = strength(&cur, &nodes, n_nodes, theta);
            let agg = aggregate(&strong);
            let n_agg = agg.iter().filter_map(|a| *a).max().map_or(0, |m| m + 1);
            if n_agg == 0 {
                break;
            }
            let (t, bc, coarse_nodes) = tentative(&agg, n_agg, &nodes, &b);
            if t.ncols() * 10 >= cur.nrows() * 9 {
                break;
            }
            let p = smooth_prolongator(&cur, &t);
            let r = p.transpose();
            let coarse = r.matmul(&cur).matmul(&p);
            levels.push(Level { a: cur, p, r });
            cur = coarse;
            b = bc;
            nodes = coarse_nodes;
            theta *= 0.5;
        }
        if levels.is_empty() {
            log::info!("multigrid produced a single level; using a direct solve");
        }
        let coarse = Cholesky::new(cur.to_dense())
            .ok_or_else(|| HdgError::SparseFactorization("coarsest multigrid operator is not positive definite".into()))?;
        Ok(AmgHierarchy { levels, coarse, coarse_a: cur, params })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn info(&self) -> HierarchyInfo {
        let mut sizes: Vec<usize> = self.levels.iter().map(|l| l.a.nrows()).collect();
        let mut nnz: Vec<usize> = self.levels.iter().map(|l| l.a.nnz()).collect();
        sizes.push(self.coarse_a.nrows());
        nnz.push(self.coarse_a.nnz());
        HierarchyInfo { sizes, nnz }
    }

    /// Applies `cycles` V-cycles to `A x = b` from `x = 0`.
    pub fn solve(&self, b: &[f64], cycles: usize) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        for _ in 0..cycles {
            self.vcycle(0, b, &mut x);
        }
        x
    }

    fn vcycle(&self, lvl: usize, b: &[f64], x: &mut [f64]) {
        if lvl == self.levels.len() {
            let sol = self.coarse.solve(&DVector::from_column_slice(b));
            x.copy_from_slice(sol.as_slice());
            return;
        }
        let l = &self.levels[lvl];
        for _ in 0..self.params.presweeps {
            gauss_seidel(&l.a, b, x, false);
        }
        let mut res = b.to_vec();
        let ax = l.a.matvec(x);
        for (r, v) in res.iter_mut().zip(&ax) {
            *r -= v;
        }
        let bc = l.r.matvec(&res);
        let mut xc = vec![0.0; bc.len()];
        self.vcycle(lvl + 1, &bc, &mut xc);
        l.p.matvec_add(&xc, x);
        for _ in 0..self.params.postsweeps {
            gauss_seidel(&l.a, b, x, true);
        }
    }
}

fn gauss_seidel(a: &CsrMatrix, b: &[f64], x: &mut [f64], backward: bool) {
    let n = a.nrows();
    let mut step = |i: usize| {
        let (cols, vals) = a.row(i);
        let mut s = b[i];
        let mut d = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                d = v;
            } else {
                s -= v * x[j];
            }
        }
        x[i] = s / d;
    };
    if backward {
        (0..n).rev().for_each(&mut step);
    } else {
        (0..n).for_each(&mut step);
    }
}

/// Strong node neighbours: `|A_ij|_F >= theta * sqrt(|A_ii|_F |A_jj|_F)`.
/// `nodes[d]` is the node owning unknown `d`.
fn strength(a: &CsrMatrix, nodes: &[usize], nn: usize, theta: f64) -> Vec<Vec<usize>> {
    let mut blocks: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); nn];
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            *blocks[nodes[i]].entry(nodes[j]).or_insert(0.0) += v * v;
        }
    }
    let diag: Vec<f64> = (0..nn).map(|i| blocks[i].get(&i).copied().unwrap_or(0.0).sqrt()).collect();
    (0..nn)
        .map(|i| {
            blocks[i]
                .iter()
                .filter(|(&j, &f)| j != i && f.sqrt() >= theta * (diag[i] * diag[j]).sqrt())
                .map(|(&j, _)| j)
                .collect()
        })
        .collect()
}

/// Greedy aggregation. Nodes without strong neighbours stay unaggregated.
fn aggregate(strong: &[Vec<usize>]) -> Vec<Option<usize>> {
    let n = strong.len();
    let mut agg: Vec<Option<usize>> = vec![None; n];
    let mut count = 0;
    // Pass 1: seed aggregates at nodes whose whole neighbourhood is free.
    for i in 0..n {
        if strong[i].is_empty() || agg[i].is_some() || strong[i].iter().any(|&j| agg[j].is_some()) {
            continue;
        }
        agg[i] = Some(count);
        for &j in &strong[i] {
            agg[j] = Some(count);
        }
        count += 1;
    }
    // Pass 2: attach leftovers to a neighbouring aggregate.
    let snapshot = agg.clone();
    for i in 0..n {
        if agg[i].is_none() {
            if let Some(a) = strong[i].iter().find_map(|&j| snapshot[j]) {
                agg[i] = Some(a);
            }
        }
    }
    // Pass 3: remaining connected nodes form new aggregates.
    for i in 0..n {
        if agg[i].is_none() && !strong[i].is_empty() {
            agg[i] = Some(count);
            for &j in &strong[i] {
                if agg[j].is_none() {
                    agg[j] = Some(count);
                }
            }
            count += 1;
        }
    }
    agg
}

/// Tentative prolongator: the near-null space restricted to each aggregate,
/// orthonormalized by modified Gram-Schmidt with dependent columns dropped.
/// Returns it with the coarse near-null space and coarse node map.
fn tentative(agg: &[Option<usize>], n_agg: usize, nodes: &[usize], b: &[Vec<f64>]) -> (CsrMatrix, Vec<Vec<f64>>, Vec<usize>) {
    let k = b.len();
    let n = nodes.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_agg];
    for (d, &node) in nodes.iter().enumerate() {
        if let Some(a) = agg[node] {
            members[a].push(d);
        }
    }
    let mut trips = Vec::new();
    // Coarse near-null entries as (coarse column, near-null index, value).
    let mut coarse_b: Vec<(usize, usize, f64)> = Vec::new();
    let mut coarse_nodes = Vec::new();
    let mut nc = 0;
    for (a, rows) in members.iter().enumerate() {
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut r = DMatrix::<f64>::zeros(k, k);
        for j in 0..k {
            let mut v: Vec<f64> = rows.iter().map(|&d| b[j][d]).collect();
            let orig = crate::sparse::norm2(&v);
            for (i, qi) in q.iter().enumerate() {
                let s = crate::sparse::dot(qi, &v);
                r[(i, j)] = s;
                crate::sparse::axpy(-s, qi, &mut v);
            }
            let nv = crate::sparse::norm2(&v);
            if orig > 0.0 && nv > 1e-8 * orig {
                r[(q.len(), j)] = nv;
                q.push(v.iter().map(|x| x / nv).collect());
            }
        }
        for (i, qi) in q.iter().enumerate() {
            for (&d, &val) in rows.iter().zip(qi) {
                trips.push((d, nc + i, val));
            }
            for j in 0..k {
                coarse_b.push((nc + i, j, r[(i, j)]));
            }
            coarse_nodes.push(a);
        }
        nc += q.len();
    }
    let mut t = TripletBuilder::with_capacity(n, nc, trips.len());
    for (i, j, v) in trips {
        t.push(i, j, v);
    }
    let mut bc = vec![vec![0.0; nc]; k];
    for (i, j, v) in coarse_b {
        bc[j][i] = v;
    }
    (t.build(), bc, coarse_nodes)
}

/// `P = (I - ω D⁻¹ A) T` with `ω = (4/3) / ρ(D⁻¹ A)`.
fn smooth_prolongator(a: &CsrMatrix, t: &CsrMatrix) -> CsrMatrix {
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let rho = spectral_radius_dinv_a(a, &dinv);
    let omega = 4.0 / 3.0 / rho;
    let mut da = a.clone();
    {
        let indptr = da.indptr().to_vec();
        let data = da.data_mut();
        for i in 0..indptr.len() - 1 {
            for v in &mut data[indptr[i]..indptr[i + 1]] {
                *v *= omega * dinv[i];
            }
        }
    }
    t.add_scaled(&da.matmul(t), -1.0)
}

/// Power iteration estimate of `ρ(D⁻¹ A)` from a fixed start vector.
fn spectral_radius_dinv_a(a: &CsrMatrix, dinv: &[f64]) -> f64 {
    let n = a.nrows();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut rho = 1.0;
    for _ in 0..20 {
        let y: Vec<f64> = a.matvec(&x).iter().zip(dinv).map(|(v, d)| v * d).collect();
        let ny = crate::sparse::norm2(&y);
        let nx = crate::sparse::norm2(&x);
        rho = ny / nx;
        x = y.iter().map(|v| v / ny).collect();
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 2D Laplacian on an `m x m` grid (Dirichlet), scalar nodes.
    fn laplacian(m: usize) -> CsrMatrix {
        let n = m * m;
        let mut t = TripletBuilder::new(n, n);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                t.push(k, k, 4.0);
                if i > 0 {
                    t.push(k, k - m, -1.0);
                }
                if i + 1 < m {
                    t.push(k, k + m, -1.0);
                }
                if j > 0 {
                    t.push(k, k - 1, -1.0);
                }
                if j + 1 < m {
                    t.push(k, k + 1, -1.0);
                }
            }
        }
        t.build()
    }

    #[test]
    fn vcycles_reduce_error_on_laplacian() {
        let a = laplacian(40);
        let ones = vec![vec![1.0; a.nrows()]];
        let h = AmgHierarchy::new(&a, 1, &ones, AmgParams::default()).unwrap();
        assert!(h.n_levels() >= 2);
        let b: Vec<f64> = (0..a.nrows()).map(|i| ((i * 31) % 17) as f64 - 8.0).collect();
        let x = h.solve(&b, 4);
        let r: Vec<f64> = a.matvec(&x).iter().zip(&b).map(|(ax, b)| b - ax).collect();
        assert!(crate::sparse::norm2(&r) < 1e-2 * crate::sparse::norm2(&b));
    }

    #[test]
    fn cycle_is_symmetric() {
        let a = laplacian(20);
        let ones = vec![vec![1.0; a.nrows()]];
        let h = AmgHierarchy::new(&a, 1, &ones, AmgParams { coarse_size: 30, ..Default::default() }).unwrap();
        let x: Vec<f64> = (0..a.nrows()).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..a.nrows()).map(|i| (i as f64 * 0.91).cos()).collect();
        let lhs = crate::sparse::dot(&h.solve(&x, 2), &y);
        let rhs = crate::sparse::dot(&x, &h.solve(&y, 2));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn tiny_matrix_is_solved_directly() {
        let a = laplacian(3);
        let ones = vec![vec![1.0; 9]];
        let h = AmgHierarchy::new(&a, 1, &ones, AmgParams::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let b = vec![1.0; 9];
        let x = h.solve(&b, 1);
        let r = a.matvec(&x);
        assert!(r.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));
    }
}
