//! Structured 2D meshes of rectangles, split into triangles or kept as
//! quadrilaterals, with facet topology and per-cell diameters.
//!
//! Cells list their vertices counterclockwise. Local facet `i` of a cell runs
//! from local vertex `i` to local vertex `i + 1`. A facet stores its vertex
//! pair in the orientation seen by its first adjacent cell, so the facet
//! normal is that cell's outward normal.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HdgError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellShape {
    Triangle,
    Quadrilateral,
}

impl CellShape {
    pub fn vertices_per_cell(self) -> usize {
        match self {
            CellShape::Triangle => 3,
            CellShape::Quadrilateral => 4,
        }
    }
}

impl std::str::FromStr for CellShape {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "triangle" | "tri" | "triangles" => Ok(CellShape::Triangle),
            "quadrilateral" | "quad" | "quads" | "quadrilaterals" => Ok(CellShape::Quadrilateral),
            other => Err(HdgError::InvalidMesh(format!("unknown cell shape '{other}'"))),
        }
    }
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit_square() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    /// The cavity domain `[-1, 1]^2`.
    pub fn biunit_square() -> Self {
        Rect::new(-1.0, 1.0, -1.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// A cell adjacent to a facet, together with the facet's local index in it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FacetSide {
    pub cell: usize,
    pub local: usize,
}

#[derive(Clone, Debug)]
pub struct Facet {
    pub vertices: [usize; 2],
    /// One entry for boundary facets, two for interior facets.
    pub sides: Vec<FacetSide>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.sides.len() == 1
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    shape: CellShape,
    vertices: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
    facets: Vec<Facet>,
    cell_facets: Vec<Vec<usize>>,
    cell_diameter: Vec<f64>,
}

impl Mesh {
    /// Structured mesh of `nx * ny` rectangles. In triangle mode each
    /// rectangle is split along one diagonal, alternating the diagonal
    /// direction in a checkerboard pattern.
    pub fn generate(nx: usize, ny: usize, shape: CellShape, domain: Rect) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(HdgError::InvalidMesh(format!(
                "subdivision counts must be positive (got {nx} x {ny})"
            )));
        }
        if !(domain.x1 > domain.x0 && domain.y1 > domain.y0) {
            return Err(HdgError::InvalidMesh(format!("degenerate domain {domain:?}")));
        }
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = domain.x0 + (domain.x1 - domain.x0) * i as f64 / nx as f64;
                let y = domain.y0 + (domain.y1 - domain.y0) * j as f64 / ny as f64;
                vertices.push([x, y]);
            }
        }
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                match shape {
                    CellShape::Quadrilateral => cells.push(vec![v00, v10, v11, v01]),
                    CellShape::Triangle => {
                        if (i + j) % 2 == 0 {
                            cells.push(vec![v00, v10, v11]);
                            cells.push(vec![v00, v11, v01]);
                        } else {
                            cells.push(vec![v00, v10, v01]);
                            cells.push(vec![v10, v11, v01]);
                        }
                    }
                }
            }
        }
        Mesh::from_cells(shape, vertices, cells)
    }

    /// Builds facet topology from a vertex list and counterclockwise cells.
    pub fn from_cells(shape: CellShape, vertices: Vec<[f64; 2]>, cells: Vec<Vec<usize>>) -> Result<Mesh> {
        let nv = shape.vertices_per_cell();
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut facets: Vec<Facet> = Vec::new();
        let mut cell_facets = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != nv {
                return Err(HdgError::InvalidMesh(format!(
                    "cell {c} has {} vertices, expected {nv}",
                    cell.len()
                )));
            }
            let mut local = Vec::with_capacity(nv);
            for l in 0..nv {
                let (a, b) = (cell[l], cell[(l + 1) % nv]);
                let key = (a.min(b), a.max(b));
                let side = FacetSide { cell: c, local: l };
                let f = match lookup.get(&key) {
                    Some(&f) => {
                        if facets[f].sides.len() >= 2 {
                            return Err(HdgError::InvalidMesh(format!(
                                "facet ({a}, {b}) shared by more than two cells"
                            )));
                        }
                        facets[f].sides.push(side);
                        f
                    }
                    None => {
                        facets.push(Facet { vertices: [a, b], sides: vec![side] });
                        lookup.insert(key, facets.len() - 1);
                        facets.len() - 1
                    }
                };
                local.push(f);
            }
            cell_facets.push(local);
        }
        let cell_diameter = cells
            .iter()
            .map(|cell| {
                let mut d: f64 = 0.0;
                for (i, &a) in cell.iter().enumerate() {
                    for &b in &cell[i + 1..] {
                        d = d.max(dist(vertices[a], vertices[b]));
                    }
                }
                d
            })
            .collect();
        let mesh = Mesh { shape, vertices, cells, facets, cell_facets, cell_diameter };
        for c in 0..mesh.n_cells() {
            if mesh.cell_area(c) <= 0.0 {
                return Err(HdgError::InvalidMesh(format!("cell {c} has non-positive area")));
            }
        }
        Ok(mesh)
    }

    /// Uniform refinement: every cell is split into four children.
    pub fn refine(&self) -> Mesh {
        let nv0 = self.vertices.len();
        let nf = self.facets.len();
        let mut vertices = self.vertices.clone();
        vertices.extend(self.facets.iter().map(|f| midpoint(self.vertices[f.vertices[0]], self.vertices[f.vertices[1]])));
        let mid = |c: usize, l: usize| nv0 + self.cell_facets[c][l];
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (c, cell) in self.cells.iter().enumerate() {
            match self.shape {
                CellShape::Triangle => {
                    let (a, b, d) = (cell[0], cell[1], cell[2]);
                    let (mab, mbd, mda) = (mid(c, 0), mid(c, 1), mid(c, 2));
                    cells.push(vec![a, mab, mda]);
                    cells.push(vec![mab, b, mbd]);
                    cells.push(vec![mda, mbd, d]);
                    cells.push(vec![mab, mbd, mda]);
                }
                CellShape::Quadrilateral => {
                    let center = nv0 + nf + c;
                    let (m0, m1, m2, m3) = (mid(c, 0), mid(c, 1), mid(c, 2), mid(c, 3));
                    cells.push(vec![cell[0], m0, center, m3]);
                    cells.push(vec![m0, cell[1], m1, center]);
                    cells.push(vec![center, m1, cell[2], m2]);
                    cells.push(vec![m3, center, m2, cell[3]]);
                }
            }
        }
        if self.shape == CellShape::Quadrilateral {
            for cell in &self.cells {
                let mut x = [0.0, 0.0];
                for &v in cell {
                    x[0] += 0.25 * self.vertices[v][0];
                    x[1] += 0.25 * self.vertices[v][1];
                }
                vertices.push(x);
            }
        }
        Mesh::from_cells(self.shape, vertices, cells).expect("refinement of a valid mesh is valid")
    }

    /// Moves every interior vertex by a seeded pseudo-random offset of at most
    /// `amplitude * h_local` in each coordinate, where `h_local` is the
    /// shortest facet touching the vertex. Amplitudes below ~0.25 keep
    /// cells valid.
    pub fn jittered(&self, amplitude: f64, seed: u64) -> Result<Mesh> {
        let mut on_boundary = vec![false; self.vertices.len()];
        let mut h_local = vec![f64::INFINITY; self.vertices.len()];
        for (f, facet) in self.facets.iter().enumerate() {
            let len = self.facet_length(f);
            for &v in &facet.vertices {
                h_local[v] = h_local[v].min(len);
                if facet.is_boundary() {
                    on_boundary[v] = true;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = self.vertices.clone();
        for (v, x) in vertices.iter_mut().enumerate() {
            let dx: f64 = rng.gen_range(-1.0..1.0);
            let dy: f64 = rng.gen_range(-1.0..1.0);
            if !on_boundary[v] {
                x[0] += amplitude * h_local[v] * dx;
                x[1] += amplitude * h_local[v] * dy;
            }
        }
        Mesh::from_cells(self.shape, vertices, self.cells.clone())
    }

    pub fn shape(&self) -> CellShape {
        self.shape
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn n_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.is_boundary()).count()
    }

    /// Global facet indices of a cell, in local order.
    pub fn cell_facets(&self, cell: usize) -> &[usize] {
        &self.cell_facets[cell]
    }

    pub fn cell_vertex_coords(&self, cell: usize) -> Vec<[f64; 2]> {
        self.cells[cell].iter().map(|&v| self.vertices[v]).collect()
    }

    /// `h_K`: the largest distance between two vertices of the cell.
    pub fn cell_diameter(&self, cell: usize) -> f64 {
        self.cell_diameter[cell]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let xs = self.cell_vertex_coords(cell);
        let n = xs.len();
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (xs[i], xs[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum::<f64>()
    }

    pub fn cell_perimeter(&self, cell: usize) -> f64 {
        self.cell_facets[cell].iter().map(|&f| self.facet_length(f)).sum()
    }

    pub fn cell_centroid(&self, cell: usize) -> [f64; 2] {
        let xs = self.cell_vertex_coords(cell);
        let n = xs.len() as f64;
        let mut c = [0.0, 0.0];
        for x in xs {
            c[0] += x[0] / n;
            c[1] += x[1] / n;
        }
        c
    }

    pub fn facet_length(&self, facet: usize) -> f64 {
        let [a, b] = self.facets[facet].vertices;
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn facet_midpoint(&self, facet: usize) -> [f64; 2] {
        let [a, b] = self.facets[facet].vertices;
        midpoint(self.vertices[a], self.vertices[b])
    }

    /// Unit outward normal of local facet `local` of `cell`.
    pub fn outward_normal(&self, cell: usize, local: usize) -> [f64; 2] {
        let n = self.cells[cell].len();
        let a = self.vertices[self.cells[cell][local]];
        let b = self.vertices[self.cells[cell][(local + 1) % n]];
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    }

    /// Normal of a facet as seen from its first adjacent cell.
    pub fn facet_normal(&self, facet: usize) -> [f64; 2] {
        let s = self.facets[facet].sides[0];
        self.outward_normal(s.cell, s.local)
    }

    pub fn h_min(&self) -> f64 {
        self.cell_diameter.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.cell_diameter.iter().cloned().fold(0.0, f64::max)
    }

    /// `c_* = h_min / h_max`.
    pub fn mesh_ratio(&self) -> f64 {
        self.h_min() / self.h_max()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_area(c)).sum()
    }

    /// `#vertices - #facets + #cells`; equals 1 for a simply connected mesh.
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_facets() as i64 + self.n_cells() as i64
    }

    /// Boundary facets whose midpoint satisfies `predicate`.
    pub fn boundary_facets(&self, predicate: impl Fn([f64; 2]) -> bool) -> Vec<usize> {
        (0..self.n_facets())
            .filter(|&f| self.facets[f].is_boundary() && predicate(self.facet_midpoint(f)))
            .collect()
    }

    /// Plain-text dump: a header line, one vertex per line, one cell per line.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# vertices {} cells {} shape {:?}", self.n_vertices(), self.n_cells(), self.shape)?;
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        for cell in &self.cells {
            let s: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", s.join(" "))?;
        }
        Ok(())
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(nx: usize, ny: usize) -> Mesh {
        Mesh::generate(nx, ny, CellShape::Triangle, Rect::unit_square()).unwrap()
    }

    #[test]
    fn smallest_split_square() {
        let m = Mesh::generate(1, 1, CellShape::Triangle, Rect::biunit_square()).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_facets(), 5);
        assert_eq!(m.n_boundary_facets(), 4);
        for c in 0..2 {
            assert!((m.cell_diameter(c) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_counts_and_euler() {
        let m = tri(2, 2);
        assert_eq!(m.n_cells(), 8);
        assert_eq!(m.n_facets(), 16);
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn quadrilateral_counts() {
        let m = Mesh::generate(3, 2, CellShape::Quadrilateral, Rect::unit_square()).unwrap();
        assert_eq!(m.n_cells(), 6);
        assert_eq!(m.n_facets(), 17);
        assert_eq!(m.n_boundary_facets(), 10);
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(Mesh::generate(0, 2, CellShape::Triangle, Rect::unit_square()).is_err());
        assert!(Mesh::generate(2, 0, CellShape::Quadrilateral, Rect::unit_square()).is_err());
        assert!(Mesh::generate(1, 1, CellShape::Triangle, Rect::new(0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn refinement_counts_and_h() {
        let m = Mesh::generate(1, 1, CellShape::Triangle, Rect::biunit_square()).unwrap();
        assert_eq!(m.refine().n_cells(), 8);
        let m = tri(2, 2);
        let r2 = m.refine().refine();
        assert_eq!(r2.n_cells(), 128);
        assert!((m.refine().h_max() / m.h_max() - 0.5).abs() < 1e-14);
        let q = Mesh::generate(2, 3, CellShape::Quadrilateral, Rect::unit_square()).unwrap();
        let qr = q.refine();
        assert_eq!(qr.n_cells(), 24);
        assert!((qr.h_max() / q.h_max() - 0.5).abs() < 1e-14);
        assert_eq!(qr.euler_characteristic(), 1);
    }

    #[test]
    fn refinement_preserves_area() {
        for shape in [CellShape::Triangle, CellShape::Quadrilateral] {
            let m = Mesh::generate(3, 2, shape, Rect::new(-1.0, 2.0, 0.5, 1.5)).unwrap();
            let m = m.jittered(0.2, 7).unwrap();
            let a0 = m.total_area();
            let a2 = m.refine().refine().total_area();
            assert!(((a2 - a0) / a0).abs() < 1e-12);
            assert!((a0 - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_predicates() {
        let m = Mesh::generate(1, 1, CellShape::Triangle, Rect::biunit_square()).unwrap();
        assert_eq!(m.boundary_facets(|x| (x[1] - 1.0).abs() < 1e-12).len(), 1);
        let q = Mesh::generate(4, 4, CellShape::Quadrilateral, Rect::unit_square()).unwrap();
        assert_eq!(q.boundary_facets(|x| (x[1] - 1.0).abs() < 1e-12).len(), 4);

        let m = tri(5, 5);
        let lid = m.boundary_facets(|x| (x[1] - 1.0).abs() < 1e-12);
        let walls = m.boundary_facets(|x| (x[1] - 1.0).abs() >= 1e-12);
        let mut all: Vec<usize> = lid.iter().chain(&walls).cloned().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), lid.len() + walls.len());
        assert_eq!(all.len(), 4 * 5);
    }

    #[test]
    fn adjacency_is_symmetric() {
        let m = tri(3, 4).refine();
        for (f, facet) in m.facets().iter().enumerate() {
            assert!(facet.sides.len() == 1 || facet.sides.len() == 2);
            for s in &facet.sides {
                assert_eq!(m.cell_facets(s.cell)[s.local], f);
            }
        }
        for c in 0..m.n_cells() {
            for &f in m.cell_facets(c) {
                assert!(m.facets()[f].sides.iter().any(|s| s.cell == c));
            }
        }
    }

    #[test]
    fn closed_cell_boundaries_have_zero_normal_sum() {
        for shape in [CellShape::Triangle, CellShape::Quadrilateral] {
            let m = Mesh::generate(3, 3, shape, Rect::biunit_square()).unwrap().jittered(0.2, 3).unwrap();
            for c in 0..m.n_cells() {
                let mut s = [0.0, 0.0];
                for (l, &f) in m.cell_facets(c).iter().enumerate() {
                    let n = m.outward_normal(c, l);
                    let len = m.facet_length(f);
                    s[0] += n[0] * len;
                    s[1] += n[1] * len;
                }
                assert!(s[0].abs() < 1e-14 && s[1].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mesh_ratio_in_unit_interval() {
        let m = tri(4, 3).jittered(0.2, 11).unwrap();
        let r = m.mesh_ratio();
        assert!(r > 0.0 && r <= 1.0);
        assert!((tri(4, 4).mesh_ratio() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dump_has_one_line_per_entity() {
        let m = tri(2, 1);
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 1 + m.n_vertices() + m.n_cells());
    }
}
