//! Discretization error for a smooth manufactured solution.

use hdgstokes::assembly::BlockSystem;
use hdgstokes::condense::condense;
use hdgstokes::solve::solve_condensed_direct;
use hdgstokes::spectra::field_checks;
use hdgstokes::{CellShape, Mesh, ProblemSpec, Rect, SpaceSet};

fn velocity_error(mesh: Mesh, k: usize) -> f64 {
    let problem = ProblemSpec::manufactured(24.0, k);
    let bs = BlockSystem::assemble(SpaceSet::new(mesh, k).unwrap(), &problem).unwrap();
    let cs = condense(&bs).unwrap();
    let sol = solve_condensed_direct(&bs, &cs).unwrap();
    let checks = field_checks(&bs.spaces, &sol.u);
    // Q_k velocities are not pointwise divergence-free against Q_{k-1}.
    if bs.spaces.mesh().shape() == CellShape::Triangle {
        assert!(checks.relative_divergence < 1e-8, "{checks:?}");
    }
    assert!(checks.relative_normal_jump < 1e-8, "{checks:?}");
    let exact = problem.exact_velocity.clone().unwrap();
    bs.spaces.velocity_l2_error(&sol.u, &|x| exact(x))
}

fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn triangles_converge_at_order_k_plus_one() {
    for k in [1, 2] {
        let mut mesh = Mesh::generate(4, 4, CellShape::Triangle, Rect::biunit_square()).unwrap();
        let mut errors = Vec::new();
        for _ in 0..4 {
            errors.push(velocity_error(mesh.clone(), k));
            mesh = mesh.refine();
        }
        let r = rates(&errors);
        // Rates approach k + 1 from below; the finest pair is asymptotic.
        assert!((r[r.len() - 1] - (k as f64 + 1.0)).abs() < 0.25, "k={k}: {errors:?} {r:?}");
        assert!(r.windows(2).all(|w| w[1] > w[0] - 0.05));
    }
}

#[test]
fn quadrilaterals_converge_at_order_k_plus_one() {
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| velocity_error(Mesh::generate(n, n, CellShape::Quadrilateral, Rect::biunit_square()).unwrap(), 2))
        .collect();
    let r = rates(&errors);
    assert!((r[1] - 3.0).abs() < 0.25, "{errors:?} {r:?}");
}
