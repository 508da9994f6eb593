//! End-to-end solve: condensed Krylov solve, velocity recovery and pressure
//! normalization to zero mean.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::BlockSystem;
use crate::condense::CondensedSystem;
use crate::error::{HdgError, Result};
use crate::linalg::SparseLu;
use crate::krylov::{gmres_right, minres, KrylovOptions, SolverReport};
use crate::precond::{build_rbar, ApproxOptions, OperatorApprox, Preconditioner, PreconditionerKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Minres,
    Gmres,
}

impl FromStr for SolverKind {
    type Err = HdgError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "minres" => Ok(SolverKind::Minres),
            "gmres" => Ok(SolverKind::Gmres),
            _ => Err(HdgError::InvalidOption(format!("unknown solver '{s}'"))),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Minres => "minres",
            SolverKind::Gmres => "gmres",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub solver: SolverKind,
    pub preconditioner: PreconditionerKind,
    pub krylov: KrylovOptions,
    pub rbar: ApproxOptions,
    pub c22: ApproxOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            solver: SolverKind::Minres,
            preconditioner: PreconditionerKind::Pm,
            krylov: KrylovOptions::default(),
            rbar: ApproxOptions::exact(),
            c22: ApproxOptions::exact(),
        }
    }
}

/// Discrete solution on the full layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub u: Vec<f64>,
    pub ubar: Vec<f64>,
    pub p: Vec<f64>,
    pub pbar: Vec<f64>,
}

impl Solution {
    /// `(u, ū, p, p̄)` concatenated.
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.u[..], &self.ubar, &self.p, &self.pbar].concat()
    }
}

/// Recovers the full solution from a condensed vector and shifts the
/// pressure pair by a constant so that the cell pressure has zero mean.
pub fn recover_solution(bs: &BlockSystem, cs: &CondensedSystem, x: &[f64]) -> Solution {
    let l = cs.layout;
    let u = cs.recover_velocity_from(x, &cs.l_u);
    let mut pres = x[l.pressure()].to_vec();
    let c = bs.spaces.constant_pressure();
    let area = bs.spaces.mesh().total_area();
    let mean: f64 = pres[..l.n_p].iter().zip(&c[..l.n_p]).map(|(a, b)| a * b).sum::<f64>() / area;
    pres.iter_mut().zip(&c).for_each(|(p, c)| *p -= mean * c);
    Solution { u, ubar: x[l.ubar()].to_vec(), p: pres[..l.n_p].to_vec(), pbar: pres[l.n_p..].to_vec() }
}

/// Builds the preconditioner (reusing `rbar` when given), runs the Krylov
/// solver on the condensed system and recovers the solution.
pub fn solve_condensed(
    bs: &BlockSystem,
    cs: &CondensedSystem,
    opts: &SolveOptions,
    rbar: Option<Arc<OperatorApprox>>,
) -> Result<(Solution, SolverReport)> {
    let rbar = match rbar {
        Some(r) => r,
        None => Arc::new(build_rbar(cs, bs, &opts.rbar)?),
    };
    let pc = Preconditioner::build(cs, bs, opts.preconditioner, rbar, &opts.c22)?;
    let null = cs.pressure_nullspace(&bs.spaces.constant_pressure());
    let name = opts.preconditioner.name();
    let (x, report) = match opts.solver {
        SolverKind::Minres => minres(&cs.matrix, &pc, &cs.rhs, &opts.krylov, Some(&null), name)?,
        SolverKind::Gmres => gmres_right(&cs.matrix, &pc, &cs.rhs, &opts.krylov, Some(&null), name)?,
    };
    Ok((recover_solution(bs, cs, &x), report))
}

/// Direct sparse LU solve of the condensed system. The pressure null space
/// is removed by pinning the first cell-pressure DOF, after which the pair is
/// shifted to zero mean.
pub fn solve_condensed_direct(bs: &BlockSystem, cs: &CondensedSystem) -> Result<Solution> {
    let pin = cs.layout.p().start;
    let n = cs.n();
    let mut t = crate::sparse::TripletBuilder::with_capacity(n, n, cs.matrix.nnz());
    for i in 0..n {
        let (cols, vals) = cs.matrix.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if i != pin && j != pin {
                t.push(i, j, v);
            }
        }
    }
    t.push(pin, pin, 1.0);
    let mut rhs = cs.rhs.clone();
    rhs[pin] = 0.0;
    let x = SparseLu::new(&t.build())?.solve(&rhs);
    Ok(recover_solution(bs, cs, &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::condense;
    use crate::mesh::{CellShape, Mesh, Rect};
    use crate::spaces::{ProblemSpec, SpaceSet};

    #[test]
    fn zero_problem_needs_no_iterations() {
        let m = Mesh::generate(2, 2, CellShape::Triangle, Rect::biunit_square()).unwrap();
        let p = ProblemSpec::zero(24.0, 2);
        let bs = BlockSystem::assemble(SpaceSet::new(m, 2).unwrap(), &p).unwrap();
        let cs = condense(&bs).unwrap();
        let (sol, rep) = solve_condensed(&bs, &cs, &SolveOptions::default(), None).unwrap();
        assert!(rep.converged && rep.iterations == 0);
        assert!(sol.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cavity_pressure_has_zero_mean() {
        let m = Mesh::generate(3, 3, CellShape::Triangle, Rect::biunit_square()).unwrap();
        let p = ProblemSpec::lid_driven_cavity(24.0, 2);
        let bs = BlockSystem::assemble(SpaceSet::new(m, 2).unwrap(), &p).unwrap();
        let cs = condense(&bs).unwrap();
        let (sol, rep) = solve_condensed(&bs, &cs, &SolveOptions::default(), None).unwrap();
        assert!(rep.converged);
        let c = bs.spaces.constant_pressure();
        let mean: f64 = sol.p.iter().zip(&c).map(|(a, b)| a * b).sum();
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn direct_and_iterative_solutions_agree() {
        let m = Mesh::generate(3, 3, CellShape::Triangle, Rect::biunit_square()).unwrap();
        let p = ProblemSpec::lid_driven_cavity(24.0, 2);
        let bs = BlockSystem::assemble(SpaceSet::new(m, 2).unwrap(), &p).unwrap();
        let cs = condense(&bs).unwrap();
        let mut o = SolveOptions::default();
        o.krylov.tol = 1e-12;
        let (it, _) = solve_condensed(&bs, &cs, &o, None).unwrap();
        let direct = solve_condensed_direct(&bs, &cs).unwrap();
        let (a, b) = (it.to_vec(), direct.to_vec());
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn solver_names_parse() {
        assert_eq!("GMRES".parse::<SolverKind>().unwrap(), SolverKind::Gmres);
        assert!("cg".parse::<SolverKind>().is_err());
    }
}
