//! Hybridized discontinuous Galerkin discretization of the Stokes equations
//! in 2D, cell-wise static condensation of the velocity, block
//! preconditioners for the condensed saddle-point system, Krylov solvers, and
//! spectral probes for the constants the preconditioners depend on.

pub mod amg;
pub mod assembly;
pub mod basis;
pub mod condense;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod mesh;
pub mod precond;
pub mod quadrature;
pub mod spaces;
pub mod spectra;
pub mod solve;
pub mod sparse;
pub mod variational;

pub use error::{HdgError, Result};
pub use mesh::{CellShape, Mesh, Rect};
pub use spaces::{ProblemSpec, SpaceSet};
pub use sparse::CsrMatrix;
