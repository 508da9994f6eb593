//! Modal bases: per-cell orthonormalized monomials in physical coordinates
//! and orthonormal Legendre polynomials on facets.

use nalgebra::DMatrix;

use crate::mesh::CellShape;
use crate::quadrature::{legendre_values, reference_square, reference_triangle, unit_interval};

/// Exponent pairs `(a, b)` of the monomials spanning the scalar cell space,
/// ordered so that the degree `k - 1` space is a prefix.
pub fn monomial_exponents(shape: CellShape, k: usize) -> Vec<(u32, u32)> {
    let mut e = Vec::new();
    match shape {
        CellShape::Triangle => {
            for t in 0..=k as u32 {
                for b in 0..=t {
                    e.push((t - b, b));
                }
            }
        }
        CellShape::Quadrilateral => {
            for m in 0..=k as u32 {
                for b in 0..m {
                    e.push((m, b));
                }
                for a in 0..=m {
                    e.push((a, m));
                }
            }
        }
    }
    e
}

/// Dimension of the scalar cell space of degree `k`.
pub fn cell_space_dim(shape: CellShape, k: usize) -> usize {
    match shape {
        CellShape::Triangle => (k + 1) * (k + 2) / 2,
        CellShape::Quadrilateral => (k + 1) * (k + 1),
    }
}

/// Points and weights of a rule mapped onto a physical cell.
#[derive(Clone, Debug)]
pub struct PhysicalRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Maps a reference rule with `n` points per direction onto the cell.
pub fn cell_rule(shape: CellShape, verts: &[[f64; 2]], n: usize) -> PhysicalRule {
    match shape {
        CellShape::Triangle => {
            let r = reference_triangle(n);
            let (a, b, c) = (verts[0], verts[1], verts[2]);
            let j = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
            let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs();
            let points = r
                .points
                .iter()
                .map(|p| [a[0] + j[0][0] * p[0] + j[0][1] * p[1], a[1] + j[1][0] * p[0] + j[1][1] * p[1]])
                .collect();
            let weights = r.weights.iter().map(|w| w * det).collect();
            PhysicalRule { points, weights }
        }
        CellShape::Quadrilateral => {
            let r = reference_square(n);
            let mut points = Vec::with_capacity(r.len());
            let mut weights = Vec::with_capacity(r.len());
            for (p, w) in r.points.iter().zip(&r.weights) {
                let (s, t) = (p[0], p[1]);
                let shape_fn = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
                let ds = [-(1.0 - t), 1.0 - t, t, -t];
                let dt = [-(1.0 - s), -s, s, 1.0 - s];
                let mut x = [0.0; 2];
                let mut jac = [[0.0; 2]; 2];
                for v in 0..4 {
                    for d in 0..2 {
                        x[d] += shape_fn[v] * verts[v][d];
                        jac[d][0] += ds[v] * verts[v][d];
                        jac[d][1] += dt[v] * verts[v][d];
                    }
                }
                points.push(x);
                weights.push(w * (jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]).abs());
            }
            PhysicalRule { points, weights }
        }
    }
}

/// Gauss rule on the segment from `a` to `b`: parameters in `[0, 1]`,
/// physical points, and weights including the segment length.
pub fn facet_rule(a: [f64; 2], b: [f64; 2], n: usize) -> (Vec<f64>, PhysicalRule) {
    let (s, w) = unit_interval(n);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let points = s.iter().map(|&t| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]).collect();
    let weights = w.iter().map(|w| w * len).collect();
    (s, PhysicalRule { points, weights })
}

/// Orthonormal basis of the scalar polynomial space on one cell.
///
/// `phi_i = sum_j coef[(i, j)] m_j`, where `m_j` are monomials in
/// `((x - x_c) / h, (y - y_c) / h)`. `coef` is lower triangular, so the
/// first `n` functions span the same space as the first `n` monomials.
#[derive(Clone, Debug)]
pub struct CellBasis {
    center: [f64; 2],
    h: f64,
    exps: Vec<(u32, u32)>,
    coef: DMatrix<f64>,
}

impl CellBasis {
    /// Orthonormalizes the monomials against the mass matrix computed with `rule`.
    pub fn new(shape: CellShape, k: usize, center: [f64; 2], h: f64, rule: &PhysicalRule) -> Self {
        let exps = monomial_exponents(shape, k);
        let n = exps.len();
        let mut raw = CellBasis { center, h, exps, coef: DMatrix::identity(n, n) };
        let mut gram = DMatrix::zeros(n, n);
        let mut m = vec![0.0; n];
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            raw.monomials(*x, &mut m, None);
            for i in 0..n {
                for j in 0..=i {
                    gram[(i, j)] += w * m[i] * m[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                gram[(j, i)] = gram[(i, j)];
            }
        }
        let l = gram.cholesky().expect("monomial Gram matrix is positive definite").l();
        raw.coef = l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("nonsingular Cholesky factor");
        raw
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    fn monomials(&self, x: [f64; 2], m: &mut [f64], grad: Option<&mut [[f64; 2]]>) {
        let xi = (x[0] - self.center[0]) / self.h;
        let eta = (x[1] - self.center[1]) / self.h;
        let kmax = self.exps.iter().map(|&(a, b)| a.max(b)).max().unwrap_or(0) as usize;
        let mut px = vec![1.0; kmax + 1];
        let mut py = vec![1.0; kmax + 1];
        for i in 1..=kmax {
            px[i] = px[i - 1] * xi;
            py[i] = py[i - 1] * eta;
        }
        for (j, &(a, b)) in self.exps.iter().enumerate() {
            m[j] = px[a as usize] * py[b as usize];
        }
        if let Some(g) = grad {
            for (j, &(a, b)) in self.exps.iter().enumerate() {
                let (a, b) = (a as usize, b as usize);
                let gx = if a > 0 { a as f64 * px[a - 1] * py[b] / self.h } else { 0.0 };
                let gy = if b > 0 { b as f64 * px[a] * py[b - 1] / self.h } else { 0.0 };
                g[j] = [gx, gy];
            }
        }
    }

    /// Basis values at `x`.
    pub fn values(&self, x: [f64; 2]) -> Vec<f64> {
        let n = self.len();
        let mut m = vec![0.0; n];
        self.monomials(x, &mut m, None);
        (0..n).map(|i| (0..=i).map(|j| self.coef[(i, j)] * m[j]).sum()).collect()
    }

    /// Basis values and gradients at `x`.
    pub fn values_and_gradients(&self, x: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let n = self.len();
        let mut m = vec![0.0; n];
        let mut dm = vec![[0.0; 2]; n];
        self.monomials(x, &mut m, Some(&mut dm));
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        for i in 0..n {
            for j in 0..=i {
                let c = self.coef[(i, j)];
                v[i] += c * m[j];
                g[i][0] += c * dm[j][0];
                g[i][1] += c * dm[j][1];
            }
        }
        (v, g)
    }
}

/// Values of the orthonormal Legendre basis of `P_k` on a facet of length
/// `len`, at parameter `s` in `[0, 1]`.
pub fn facet_basis_values(k: usize, len: f64, s: f64) -> Vec<f64> {
    legendre_values(k, 2.0 * s - 1.0)
        .into_iter()
        .enumerate()
        .map(|(j, p)| ((2 * j + 1) as f64 / len).sqrt() * p)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_orders_nest() {
        for k in 1..4 {
            let hi = monomial_exponents(CellShape::Triangle, k);
            let lo = monomial_exponents(CellShape::Triangle, k - 1);
            assert_eq!(&hi[..lo.len()], &lo[..]);
            assert_eq!(hi.len(), cell_space_dim(CellShape::Triangle, k));
            let hi = monomial_exponents(CellShape::Quadrilateral, k);
            let lo = monomial_exponents(CellShape::Quadrilateral, k - 1);
            assert_eq!(&hi[..lo.len()], &lo[..]);
            assert_eq!(hi.len(), (k + 1) * (k + 1));
        }
    }

    fn gram(b: &CellBasis, r: &PhysicalRule) -> DMatrix<f64> {
        let n = b.len();
        let mut g = DMatrix::zeros(n, n);
        for (x, w) in r.points.iter().zip(&r.weights) {
            let v = b.values(*x);
            for i in 0..n {
                for j in 0..n {
                    g[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        g
    }

    #[test]
    fn cell_basis_is_orthonormal() {
        let tri = [[0.3, -0.2], [1.7, 0.1], [0.5, 1.4]];
        let r = cell_rule(CellShape::Triangle, &tri, 5);
        let b = CellBasis::new(CellShape::Triangle, 3, [0.8, 0.4], 1.6, &r);
        assert!((gram(&b, &r) - DMatrix::identity(10, 10)).abs().max() < 1e-12);

        let quad = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let r = cell_rule(CellShape::Quadrilateral, &quad, 4);
        let b = CellBasis::new(CellShape::Quadrilateral, 2, [1.0, 0.5], 2.2, &r);
        assert!((gram(&b, &r) - DMatrix::identity(9, 9)).abs().max() < 1e-12);
    }

    #[test]
    fn quadrilateral_rule_measures_area() {
        let quad = [[0.0, 0.0], [2.0, 0.1], [2.2, 1.3], [-0.1, 1.0]];
        let r = cell_rule(CellShape::Quadrilateral, &quad, 3);
        let shoelace = 0.5
            * (0..4)
                .map(|i| quad[i][0] * quad[(i + 1) % 4][1] - quad[(i + 1) % 4][0] * quad[i][1])
                .sum::<f64>();
        assert!((r.weights.iter().sum::<f64>() - shoelace).abs() < 1e-13);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let r = cell_rule(CellShape::Triangle, &tri, 4);
        let b = CellBasis::new(CellShape::Triangle, 2, [1.0 / 3.0, 1.0 / 3.0], 2f64.sqrt(), &r);
        let x = [0.21, 0.37];
        let (_, g) = b.values_and_gradients(x);
        let e = 1e-6;
        let vxp = b.values([x[0] + e, x[1]]);
        let vxm = b.values([x[0] - e, x[1]]);
        let vyp = b.values([x[0], x[1] + e]);
        let vym = b.values([x[0], x[1] - e]);
        for i in 0..b.len() {
            assert!((g[i][0] - (vxp[i] - vxm[i]) / (2.0 * e)).abs() < 1e-7);
            assert!((g[i][1] - (vyp[i] - vym[i]) / (2.0 * e)).abs() < 1e-7);
        }
    }

    #[test]
    fn facet_basis_is_orthonormal() {
        let (s, r) = facet_rule([0.0, 0.0], [0.6, 0.8], 4);
        let k = 3;
        let mut g = DMatrix::<f64>::zeros(k + 1, k + 1);
        for (q, w) in s.iter().zip(&r.weights) {
            let v = facet_basis_values(k, 1.0, *q);
            for i in 0..=k {
                for j in 0..=k {
                    g[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        assert!((g - DMatrix::identity(k + 1, k + 1)).abs().max() < 1e-13);
    }
}
