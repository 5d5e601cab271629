//! Non-symmetric (Johnson–Nédélec / MacCamy–Suri) FEM-BEM coupling for
//! parabolic-elliptic interface problems in two dimensions.
//!
//! The interior heat equation is discretised with P1 finite elements, the
//! exterior Laplace problem with P0 boundary elements for the normal flux,
//! and time is advanced with a weighted-average implicit Euler scheme whose
//! right-hand side is averaged against `ω(t) = (6t − 2tⁿ − 4tⁿ⁻¹)/τⁿ`.
//!
//! Module map:
//!
//! - [`mesh`]: points, conforming triangulations, red refinement, boundary
//!   extraction, time grids.
//! - [`linalg`]: CSR/dense containers, dense and banded LU, the bordered
//!   (sparse FEM block + dense BEM border) solver.
//! - [`fem`]: P1 mass/stiffness/load assembly, L² projection, Dirichlet data.
//! - [`bem`]: Galerkin single and double layer matrices for the 2D Laplace
//!   kernel, trace coupling, representation formula.
//! - [`timestep`]: weighted averages, coupled saddle-point system, evolution.
//! - [`convergence`]: Bochner-norm errors, V-energy flux error, dual-norm
//!   bound, EOCs.
//! - [`cases`] and [`experiment`]: manufactured solutions, the capacitor
//!   demo and the table writer used by the CLI.

pub mod bem;
pub mod cases;
pub mod convergence;
mod error;
pub mod experiment;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod timestep;

pub use error::{Error, Result};
pub use mesh::{BoundaryMesh, BoundaryTag, Point2, TimeGrid, TriMesh};
