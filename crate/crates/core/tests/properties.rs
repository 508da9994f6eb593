//! Property tests for mesh topology, sparse algebra and quadrature.

use hdgstokes::quadrature::{reference_square, reference_triangle};
use hdgstokes::sparse::dot;
use hdgstokes::{CellShape, CsrMatrix, Mesh, Rect};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = CellShape> {
    prop_oneof![Just(CellShape::Triangle), Just(CellShape::Quadrilateral)]
}

fn sparse(n: usize, m: usize) -> impl Strategy<Value = CsrMatrix> {
    prop::collection::vec((0..n, 0..m, -5.0f64..5.0), 0..3 * (n + m)).prop_map(move |t| {
        let (r, rest): (Vec<_>, Vec<_>) = t.into_iter().map(|(i, j, v)| (i, (j, v))).unzip();
        let (c, v): (Vec<_>, Vec<_>) = rest.into_iter().unzip();
        CsrMatrix::from_triplets(n, m, &r, &c, &v)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_meshes_are_consistent(nx in 1usize..7, ny in 1usize..7, s in shape(), jitter in 0.0f64..0.2, seed in 0u64..1000) {
        let domain = Rect::new(-1.0, 2.0, 0.5, 1.5);
        let m = Mesh::generate(nx, ny, s, domain).unwrap().jittered(jitter, seed).unwrap();
        let per = if s == CellShape::Triangle { 2 } else { 1 };
        prop_assert_eq!(m.n_cells(), per * nx * ny);
        prop_assert_eq!(m.euler_characteristic(), 1);
        prop_assert_eq!(m.n_boundary_facets(), 2 * (nx + ny));
        prop_assert!((m.total_area() - domain.area()).abs() < 1e-12);
        for c in 0..m.n_cells() {
            prop_assert!(m.cell_area(c) > 0.0);
            // Closed boundary: Σ |F| n_F = 0.
            let mut sum = [0.0; 2];
            for (l, &f) in m.cell_facets(c).iter().enumerate() {
                let n = m.outward_normal(c, l);
                sum[0] += m.facet_length(f) * n[0];
                sum[1] += m.facet_length(f) * n[1];
            }
            prop_assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12);
        }
        for f in m.facets() {
            prop_assert!(f.sides.len() == 1 || f.sides.len() == 2);
        }
    }

    #[test]
    fn refinement_quadruples_cells(nx in 1usize..5, ny in 1usize..5, s in shape()) {
        let m = Mesh::generate(nx, ny, s, Rect::unit_square()).unwrap();
        let r = m.refine();
        prop_assert_eq!(r.n_cells(), 4 * m.n_cells());
        prop_assert_eq!(r.n_boundary_facets(), 2 * m.n_boundary_facets());
        prop_assert_eq!(r.euler_characteristic(), 1);
        prop_assert!((r.h_max() - 0.5 * m.h_max()).abs() < 1e-12);
    }

    #[test]
    fn transpose_is_adjoint(a in sparse(7, 5), x in prop::collection::vec(-1.0f64..1.0, 5), y in prop::collection::vec(-1.0f64..1.0, 7)) {
        let lhs = dot(&y, &a.matvec(&x));
        let rhs = dot(&a.transpose().matvec(&y), &x);
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        prop_assert_eq!(a.transpose().transpose(), a.clone());
        let at = a.matvec_transpose(&y);
        prop_assert!(at.iter().zip(&a.transpose().matvec(&y)).all(|(p, q)| (p - q).abs() < 1e-12));
    }

    #[test]
    fn sparse_product_matches_dense(a in sparse(6, 4), b in sparse(4, 5)) {
        let c = a.matmul(&b).to_dense();
        let d = a.to_dense() * b.to_dense();
        prop_assert!((c - d).amax() < 1e-12);
    }

    #[test]
    fn matrix_market_roundtrip(a in sparse(5, 6)) {
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let back = CsrMatrix::read_matrix_market(std::io::Cursor::new(buf)).unwrap();
        prop_assert!((back.to_dense() - a.to_dense()).amax() == 0.0);
    }

    #[test]
    fn triangle_rule_integrates_monomials(n in 1usize..7, a in 0i32..6, b in 0i32..6) {
        prop_assume!(((a + b) as usize) <= 2 * n - 2);
        let r = reference_triangle(n);
        let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(a) * p[1].powi(b)).sum();
        // ∫_T x^a y^b = a! b! / (a + b + 2)!
        let fact = |k: i32| (1..=k).map(f64::from).product::<f64>();
        let exact = fact(a) * fact(b) / fact(a + b + 2);
        prop_assert!((q - exact).abs() < 1e-14);
    }

    #[test]
    fn square_rule_integrates_tensor_monomials(n in 1usize..7, a in 0i32..12, b in 0i32..12) {
        prop_assume!((a.max(b) as usize) < 2 * n);
        let r = reference_square(n);
        let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w * p[0].powi(a) * p[1].powi(b)).sum();
        let exact = 1.0 / f64::from((a + 1) * (b + 1));
        prop_assert!((q - exact).abs() < 1e-14);
    }
}
