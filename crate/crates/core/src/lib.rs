//! Spectral solvers for the stationary anisotropic Stokes and Navier-Stokes
//! systems on the flat torus `[0, 1)^n`.

pub mod error;
pub mod field;
pub mod grid;
pub mod harness;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod navier_stokes;
pub mod random;
pub mod stokes;
pub mod viscosity;

pub use error::{Error, Result};
pub use field::{MatrixField, ScalarField, VectorField};
pub use grid::GridTransform;
pub use lattice::Lattice;
pub use navier_stokes::{picard_solve, NsSolution, NsSolveOptions, NsSolveReport};
pub use stokes::{solve_stokes, StokesSolution, StokesSolveReport};
pub use viscosity::{ValidatedTensor, ViscosityTensor};
