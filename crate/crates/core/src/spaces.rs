//! Discrete spaces: cell velocity `[P_k]^2` (or `[Q_k]^2`), cell pressure
//! `P_{k-1}` (or `Q_{k-1}`), facet velocity `[P_k(F)]^2` vanishing on the
//! boundary, and facet pressure `P_k(F)`.
//!
//! DOF numbering, with `nv`, `np`, `nf` the scalar local dimensions:
//!
//! * cell velocity: `cell * 2nv + comp * nv + i`
//! * cell pressure: `cell * np + i`
//! * facet velocity: `facet * 2nf + comp * nf + j`
//! * facet pressure: `facet * nf + j`

use std::fmt;
use std::sync::Arc;

use crate::basis::{cell_rule, cell_space_dim, facet_basis_values, facet_rule, CellBasis};
use crate::error::{HdgError, Result};
use crate::mesh::Mesh;

pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Data at the quadrature points of one facet, seen from one adjacent cell.
#[derive(Clone, Debug)]
pub struct CellFacetData {
    pub facet: usize,
    pub local: usize,
    /// Outward normal of the cell on this facet.
    pub normal: [f64; 2],
    pub length: f64,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Cell basis values per point.
    pub phi: Vec<Vec<f64>>,
    pub dphi: Vec<Vec<[f64; 2]>>,
    /// Facet basis values per point.
    pub psi: Vec<Vec<f64>>,
}

/// Basis and quadrature data for one cell.
#[derive(Clone, Debug)]
pub struct CellData {
    pub cell: usize,
    pub h: f64,
    pub basis: CellBasis,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub dphi: Vec<Vec<[f64; 2]>>,
    pub facets: Vec<CellFacetData>,
}

#[derive(Clone, Debug)]
pub struct SpaceSet {
    mesh: Mesh,
    k: usize,
    nv: usize,
    np: usize,
    nf: usize,
    constrained: Vec<bool>,
}

impl SpaceSet {
    pub fn new(mesh: Mesh, k: usize) -> Result<SpaceSet> {
        if k == 0 {
            return Err(HdgError::InvalidDegree(k));
        }
        let nv = cell_space_dim(mesh.shape(), k);
        let np = cell_space_dim(mesh.shape(), k - 1);
        let nf = k + 1;
        let mut constrained = vec![false; mesh.n_facets() * 2 * nf];
        for (f, facet) in mesh.facets().iter().enumerate() {
            if facet.is_boundary() {
                constrained[f * 2 * nf..(f + 1) * 2 * nf].iter_mut().for_each(|c| *c = true);
            }
        }
        Ok(SpaceSet { mesh, k, nv, np, nf, constrained })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    /// Scalar dimension of the cell velocity space.
    pub fn nv(&self) -> usize {
        self.nv
    }

    /// Dimension of the cell pressure space.
    pub fn np(&self) -> usize {
        self.np
    }

    /// Scalar dimension of the facet spaces.
    pub fn nf(&self) -> usize {
        self.nf
    }

    pub fn n_u(&self) -> usize {
        self.mesh.n_cells() * 2 * self.nv
    }

    pub fn n_p(&self) -> usize {
        self.mesh.n_cells() * self.np
    }

    pub fn n_ubar(&self) -> usize {
        self.mesh.n_facets() * 2 * self.nf
    }

    pub fn n_pbar(&self) -> usize {
        self.mesh.n_facets() * self.nf
    }

    /// Size of the condensed system `(ū, p, p̄)`.
    pub fn n_condensed(&self) -> usize {
        self.n_ubar() + self.n_p() + self.n_pbar()
    }

    pub fn cell_u_dofs(&self, c: usize) -> std::ops::Range<usize> {
        c * 2 * self.nv..(c + 1) * 2 * self.nv
    }

    pub fn cell_p_dofs(&self, c: usize) -> std::ops::Range<usize> {
        c * self.np..(c + 1) * self.np
    }

    pub fn facet_ubar_dofs(&self, f: usize) -> std::ops::Range<usize> {
        f * 2 * self.nf..(f + 1) * 2 * self.nf
    }

    pub fn facet_pbar_dofs(&self, f: usize) -> std::ops::Range<usize> {
        f * self.nf..(f + 1) * self.nf
    }

    /// Facet velocity DOFs of all facets of a cell, in local facet order.
    pub fn cell_ubar_dofs(&self, c: usize) -> Vec<usize> {
        self.mesh.cell_facets(c).iter().flat_map(|&f| self.facet_ubar_dofs(f)).collect()
    }

    pub fn cell_pbar_dofs(&self, c: usize) -> Vec<usize> {
        self.mesh.cell_facets(c).iter().flat_map(|&f| self.facet_pbar_dofs(f)).collect()
    }

    pub fn is_constrained(&self, j: usize) -> bool {
        self.constrained[j]
    }

    pub fn constrained_mask(&self) -> &[bool] {
        &self.constrained
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.constrained.len()).filter(|&j| self.constrained[j]).collect()
    }

    /// Quadrature points per direction, on cells and on facets.
    pub fn quadrature_points(&self) -> usize {
        self.k + 2
    }

    pub fn cell_basis(&self, c: usize) -> CellBasis {
        let verts = self.mesh.cell_vertex_coords(c);
        let rule = cell_rule(self.mesh.shape(), &verts, self.quadrature_points());
        CellBasis::new(self.mesh.shape(), self.k, self.mesh.cell_centroid(c), self.mesh.cell_diameter(c), &rule)
    }

    /// Basis values and quadrature on a cell and on each of its facets.
    /// Facet points follow the facet's stored orientation, so both adjacent
    /// cells see the same points.
    pub fn cell_data(&self, c: usize) -> CellData {
        let mesh = &self.mesh;
        let n = self.quadrature_points();
        let verts = mesh.cell_vertex_coords(c);
        let rule = cell_rule(mesh.shape(), &verts, n);
        let basis = CellBasis::new(mesh.shape(), self.k, mesh.cell_centroid(c), mesh.cell_diameter(c), &rule);
        let (phi, dphi): (Vec<_>, Vec<_>) = rule.points.iter().map(|x| basis.values_and_gradients(*x)).unzip();
        let facets = mesh
            .cell_facets(c)
            .iter()
            .enumerate()
            .map(|(local, &f)| {
                let [a, b] = mesh.facets()[f].vertices;
                let (s, fr) = facet_rule(mesh.vertices()[a], mesh.vertices()[b], n);
                let length = mesh.facet_length(f);
                let (fphi, fdphi): (Vec<_>, Vec<_>) = fr.points.iter().map(|x| basis.values_and_gradients(*x)).unzip();
                let psi = s.iter().map(|&t| facet_basis_values(self.k, length, t)).collect();
                CellFacetData {
                    facet: f,
                    local,
                    normal: mesh.outward_normal(c, local),
                    length,
                    points: fr.points,
                    weights: fr.weights,
                    phi: fphi,
                    dphi: fdphi,
                    psi,
                }
            })
            .collect();
        CellData {
            cell: c,
            h: mesh.cell_diameter(c),
            basis,
            points: rule.points,
            weights: rule.weights,
            phi,
            dphi,
            facets,
        }
    }

    /// Quadrature points, weights and facet basis values on facet `f`.
    pub fn facet_data(&self, f: usize) -> (Vec<[f64; 2]>, Vec<f64>, Vec<Vec<f64>>) {
        let [a, b] = self.mesh.facets()[f].vertices;
        let (s, fr) = facet_rule(self.mesh.vertices()[a], self.mesh.vertices()[b], self.quadrature_points());
        let len = self.mesh.facet_length(f);
        let psi = s.iter().map(|&t| facet_basis_values(self.k, len, t)).collect();
        (fr.points, fr.weights, psi)
    }

    /// Facet-local L² projection of `g` onto `[P_k(F)]^2` on every boundary
    /// facet; zero on interior facets.
    pub fn interpolate_boundary(&self, g: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        self.project_facets(g, true)
    }

    /// Facet-local L² projection of `g` onto `[P_k(F)]^2` on every facet.
    pub fn project_to_facets(&self, g: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        self.project_facets(g, false)
    }

    fn project_facets(&self, g: &dyn Fn([f64; 2]) -> [f64; 2], boundary_only: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.n_ubar()];
        for f in 0..self.mesh.n_facets() {
            if boundary_only && !self.mesh.facets()[f].is_boundary() {
                continue;
            }
            let (pts, w, psi) = self.facet_data(f);
            let dofs = self.facet_ubar_dofs(f);
            for q in 0..pts.len() {
                let v = g(pts[q]);
                for d in 0..2 {
                    for j in 0..self.nf {
                        out[dofs.start + d * self.nf + j] += w[q] * v[d] * psi[q][j];
                    }
                }
            }
        }
        out
    }

    /// Coefficients of the constant function 1 in the pressure spaces,
    /// laid out as `(p, p̄)`.
    pub fn constant_pressure(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_p() + self.n_pbar()];
        for c in 0..self.mesh.n_cells() {
            let verts = self.mesh.cell_vertex_coords(c);
            let rule = cell_rule(self.mesh.shape(), &verts, self.quadrature_points());
            let basis = self.cell_basis(c);
            let dofs = self.cell_p_dofs(c);
            for (x, w) in rule.points.iter().zip(&rule.weights) {
                let v = basis.values(*x);
                for i in 0..self.np {
                    out[dofs.start + i] += w * v[i];
                }
            }
        }
        let off = self.n_p();
        for f in 0..self.mesh.n_facets() {
            out[off + self.facet_pbar_dofs(f).start] = self.mesh.facet_length(f).sqrt();
        }
        out
    }

    /// Coefficients of the constant facet field `value` in `V̄_h`, ignoring
    /// the boundary constraint.
    pub fn constant_facet_velocity(&self, value: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_ubar()];
        for f in 0..self.mesh.n_facets() {
            let s = self.mesh.facet_length(f).sqrt();
            let dofs = self.facet_ubar_dofs(f);
            out[dofs.start] = value[0] * s;
            out[dofs.start + self.nf] = value[1] * s;
        }
        out
    }

    /// Coefficients of the constant cell field `value` in `V_h`.
    pub fn constant_cell_velocity(&self, value: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_u()];
        for c in 0..self.mesh.n_cells() {
            let data = self.cell_data(c);
            let dofs = self.cell_u_dofs(c);
            for q in 0..data.points.len() {
                for d in 0..2 {
                    for i in 0..self.nv {
                        out[dofs.start + d * self.nv + i] += data.weights[q] * value[d] * data.phi[q][i];
                    }
                }
            }
        }
        out
    }

    /// Cell velocity at `x` from the coefficient vector `u`, using cell `c`.
    pub fn eval_velocity(&self, u: &[f64], c: usize, x: [f64; 2]) -> [f64; 2] {
        let v = self.cell_basis(c).values(x);
        let dofs = self.cell_u_dofs(c);
        let mut out = [0.0; 2];
        for d in 0..2 {
            for i in 0..self.nv {
                out[d] += u[dofs.start + d * self.nv + i] * v[i];
            }
        }
        out
    }

    /// `‖u_h - g‖_{L²(Ω)}` for the cell velocity `u`.
    pub fn velocity_l2_error(&self, u: &[f64], g: &dyn Fn([f64; 2]) -> [f64; 2]) -> f64 {
        let mut sum = 0.0;
        for c in 0..self.mesh.n_cells() {
            let data = self.cell_data(c);
            let dofs = self.cell_u_dofs(c);
            for q in 0..data.points.len() {
                let e = g(data.points[q]);
                for d in 0..2 {
                    let uh: f64 = (0..self.nv).map(|i| u[dofs.start + d * self.nv + i] * data.phi[q][i]).sum();
                    sum += data.weights[q] * (uh - e[d]).powi(2);
                }
            }
        }
        sum.sqrt()
    }
}

/// Data of a Stokes problem: body force, boundary velocity, stabilization
/// parameter and polynomial degree.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub force: VectorField,
    pub boundary: VectorField,
    pub alpha: f64,
    pub degree: usize,
    pub exact_velocity: Option<VectorField>,
    pub exact_pressure: Option<ScalarField>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("alpha", &self.alpha)
            .field("degree", &self.degree)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(name: &str, force: VectorField, boundary: VectorField, alpha: f64, degree: usize) -> Self {
        ProblemSpec {
            name: name.to_string(),
            force,
            boundary,
            alpha,
            degree,
            exact_velocity: None,
            exact_pressure: None,
        }
    }

    /// Zero force and zero boundary data.
    pub fn zero(alpha: f64, degree: usize) -> Self {
        ProblemSpec::new("zero", Arc::new(|_| [0.0, 0.0]), Arc::new(|_| [0.0, 0.0]), alpha, degree)
    }

    /// Lid-driven cavity on `[-1, 1]^2`: `u = (1 - x^4, 0)` on `y = 1`,
    /// no slip elsewhere, no body force.
    pub fn lid_driven_cavity(alpha: f64, degree: usize) -> Self {
        let lid: VectorField = Arc::new(|x: [f64; 2]| {
            if (x[1] - 1.0).abs() < 1e-12 {
                [1.0 - x[0].powi(4), 0.0]
            } else {
                [0.0, 0.0]
            }
        });
        ProblemSpec::new("lid-driven-cavity", Arc::new(|_| [0.0, 0.0]), lid, alpha, degree)
    }

    /// Smooth solution on `[-1, 1]^2` with homogeneous boundary data:
    /// stream function `(1 - x^2)^2 (1 - y^2)^2` and pressure `xy`.
    pub fn manufactured(alpha: f64, degree: usize) -> Self {
        fn a(t: f64) -> [f64; 4] {
            let s = 1.0 - t * t;
            [s * s, -4.0 * t * s, 12.0 * t * t - 4.0, 24.0 * t]
        }
        let force: VectorField = Arc::new(|x: [f64; 2]| {
            let (ax, ay) = (a(x[0]), a(x[1]));
            let lap1 = ax[2] * ay[1] + ax[0] * ay[3];
            let lap2 = -(ax[3] * ay[0] + ax[1] * ay[2]);
            [-lap1 + x[1], -lap2 + x[0]]
        });
        let mut p = ProblemSpec::new("manufactured", force, Arc::new(|_| [0.0, 0.0]), alpha, degree);
        p.exact_velocity = Some(Arc::new(|x: [f64; 2]| {
            let (ax, ay) = (a(x[0]), a(x[1]));
            [ax[0] * ay[1], -ax[1] * ay[0]]
        }));
        p.exact_pressure = Some(Arc::new(|x: [f64; 2]| x[0] * x[1]));
        p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(HdgError::InvalidOption(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.degree == 0 {
            return Err(HdgError::InvalidDegree(0));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{CellShape, Rect};

    fn two_cell(k: usize) -> SpaceSet {
        SpaceSet::new(Mesh::generate(1, 1, CellShape::Triangle, Rect::biunit_square()).unwrap(), k).unwrap()
    }

    #[test]
    fn two_cell_counts() {
        let s = two_cell(2);
        assert_eq!((s.n_u(), s.n_p(), s.n_ubar(), s.n_pbar()), (24, 6, 30, 15));
        assert_eq!(s.constrained_dofs().len(), 24);
    }

    #[test]
    fn single_quadrilateral_counts() {
        let m = Mesh::generate(1, 1, CellShape::Quadrilateral, Rect::unit_square()).unwrap();
        let s = SpaceSet::new(m, 2).unwrap();
        assert_eq!((s.n_u(), s.n_p()), (18, 4));
    }

    #[test]
    fn degree_zero_rejected() {
        let m = Mesh::generate(1, 1, CellShape::Triangle, Rect::unit_square()).unwrap();
        assert!(matches!(SpaceSet::new(m, 0), Err(HdgError::InvalidDegree(0))));
    }

    #[test]
    fn constants_are_reproduced() {
        // Stands in for a partition-of-unity check on a modal basis.
        for shape in [CellShape::Triangle, CellShape::Quadrilateral] {
            let m = Mesh::generate(2, 2, shape, Rect::unit_square()).unwrap().jittered(0.2, 5).unwrap();
            let s = SpaceSet::new(m, 2).unwrap();
            let u = s.constant_cell_velocity([1.0, -2.0]);
            let one = s.constant_pressure();
            for c in 0..s.mesh().n_cells() {
                let d = s.cell_data(c);
                for (q, x) in d.points.iter().enumerate() {
                    let v = s.eval_velocity(&u, c, *x);
                    assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] + 2.0).abs() < 1e-12);
                    let p: f64 = (0..s.np()).map(|i| one[s.cell_p_dofs(c).start + i] * d.phi[q][i]).sum();
                    assert!((p - 1.0).abs() < 1e-12);
                }
                for fd in &d.facets {
                    for psi in &fd.psi {
                        let p: f64 = (0..s.nf()).map(|j| one[s.n_p() + s.facet_pbar_dofs(fd.facet).start + j] * psi[j]).sum();
                        assert!((p - 1.0).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_integrate_by_parts() {
        for shape in [CellShape::Triangle, CellShape::Quadrilateral] {
            let m = Mesh::generate(2, 1, shape, Rect::new(0.0, 2.0, -1.0, 0.5)).unwrap().jittered(0.15, 2).unwrap();
            let s = SpaceSet::new(m, 3).unwrap();
            for c in 0..s.mesh().n_cells() {
                let d = s.cell_data(c);
                for i in 0..s.nv() {
                    let mut vol = [0.0; 2];
                    for q in 0..d.points.len() {
                        vol[0] += d.weights[q] * d.dphi[q][i][0];
                        vol[1] += d.weights[q] * d.dphi[q][i][1];
                    }
                    let mut sur = [0.0; 2];
                    for fd in &d.facets {
                        for q in 0..fd.points.len() {
                            sur[0] += fd.weights[q] * fd.phi[q][i] * fd.normal[0];
                            sur[1] += fd.weights[q] * fd.phi[q][i] * fd.normal[1];
                        }
                    }
                    assert!((vol[0] - sur[0]).abs() < 1e-12 && (vol[1] - sur[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn facet_traces_agree_between_cells() {
        let s = two_cell(2);
        let u = s.constant_cell_velocity([0.7, 0.3]);
        let interior = (0..s.mesh().n_facets()).find(|&f| !s.mesh().facets()[f].is_boundary()).unwrap();
        let sides = &s.mesh().facets()[interior].sides;
        let d0 = s.cell_data(sides[0].cell);
        let d1 = s.cell_data(sides[1].cell);
        let f0 = &d0.facets[sides[0].local];
        let f1 = &d1.facets[sides[1].local];
        for q in 0..f0.points.len() {
            assert!((f0.points[q][0] - f1.points[q][0]).abs() < 1e-15);
            let v0 = s.eval_velocity(&u, sides[0].cell, f0.points[q]);
            let v1 = s.eval_velocity(&u, sides[1].cell, f1.points[q]);
            assert!((v0[0] - v1[0]).abs() < 1e-13 && (v0[1] - v1[1]).abs() < 1e-13);
            for n in 0..2 {
                assert!((f0.normal[n] + f1.normal[n]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn boundary_projection() {
        let s = two_cell(2);
        assert!(s.interpolate_boundary(&|_| [0.0, 0.0]).iter().all(|&v| v == 0.0));

        let m = Mesh::generate(4, 4, CellShape::Triangle, Rect::biunit_square()).unwrap();
        let s = SpaceSet::new(m, 2).unwrap();
        let lid = |x: [f64; 2]| if (x[1] - 1.0).abs() < 1e-12 { [1.0, 0.0] } else { [0.0, 0.0] };
        let g = s.interpolate_boundary(&lid);
        for f in s.mesh().boundary_facets(|x| (x[1] - 1.0).abs() < 1e-12) {
            let (pts, _, psi) = s.facet_data(f);
            let dofs = s.facet_ubar_dofs(f);
            for q in 0..pts.len() {
                let v: f64 = (0..s.nf()).map(|j| g[dofs.start + j] * psi[q][j]).sum();
                assert!((v - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn problem_validation() {
        assert!(ProblemSpec::zero(24.0, 2).validate().is_ok());
        assert!(ProblemSpec::zero(0.0, 2).validate().is_err());
        assert!(ProblemSpec::zero(24.0, 0).validate().is_err());
    }

    #[test]
    fn manufactured_force_balances() {
        // -Δu + ∇p = f, checked with finite differences of the exact fields.
        let p = ProblemSpec::manufactured(24.0, 2);
        let u = p.exact_velocity.clone().unwrap();
        let pr = p.exact_pressure.clone().unwrap();
        let x = [0.3, -0.45];
        let e = 1e-3;
        let at = |dx: f64, dy: f64| u([x[0] + dx, x[1] + dy]);
        for d in 0..2 {
            let lap = (at(e, 0.0)[d] + at(-e, 0.0)[d] + at(0.0, e)[d] + at(0.0, -e)[d] - 4.0 * at(0.0, 0.0)[d]) / (e * e);
            let gp = if d == 0 {
                (pr([x[0] + e, x[1]]) - pr([x[0] - e, x[1]])) / (2.0 * e)
            } else {
                (pr([x[0], x[1] + e]) - pr([x[0], x[1] - e])) / (2.0 * e)
            };
            assert!((-lap + gp - (p.force)(x)[d]).abs() < 1e-4);
        }
        let div = (at(e, 0.0)[0] - at(-e, 0.0)[0] + at(0.0, e)[1] - at(0.0, -e)[1]) / (2.0 * e);
        assert!(div.abs() < 1e-5);
    }
}
